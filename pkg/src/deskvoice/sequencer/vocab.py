"""Token vocabulary: 16 phone symbols plus 8 special tokens.

Phones double as the transcript alphabet of the synthetic corpus; each one
names a distinct parametric waveform segment. Specials cover the four
speaker tags, sequence begin/end markers, padding, and the learned
unconditional-context token used by classifier-free guidance.
"""

from __future__ import annotations

from deskvoice.errors import DataError

PHONES = [
    "aa", "ee", "ii", "oo", "uu", "ba", "da", "ga",
    "ka", "la", "ma", "na", "pa", "sa", "ta", "za",
]

N_PHONES = len(PHONES)

SPEAKER_TAGS = ["<spk1>", "<spk2>", "<spk3>", "<spk4>"]
BOS = "<bos>"
EOS = "<eos>"
PAD = "<pad>"
UNCOND = "<uncond>"

SPECIALS = SPEAKER_TAGS + [BOS, EOS, PAD, UNCOND]
TOKENS = PHONES + SPECIALS

TOKEN_TO_ID = {tok: i for i, tok in enumerate(TOKENS)}
VOCAB_SIZE = len(TOKENS)

MAX_SPEAKERS = len(SPEAKER_TAGS)

BOS_ID = TOKEN_TO_ID[BOS]
EOS_ID = TOKEN_TO_ID[EOS]
PAD_ID = TOKEN_TO_ID[PAD]
UNCOND_ID = TOKEN_TO_ID[UNCOND]


def speaker_tag_id(speaker_id: int) -> int:
    """Vocabulary id of the tag for 1-based ``speaker_id``."""
    if not 1 <= speaker_id <= MAX_SPEAKERS:
        raise DataError(f"speaker_id must be in [1, {MAX_SPEAKERS}], got {speaker_id}")
    return TOKEN_TO_ID[SPEAKER_TAGS[speaker_id - 1]]


def phone_id(name: str) -> int:
    try:
        idx = PHONES.index(name)
    except ValueError:
        raise DataError(f"unknown phone {name!r}") from None
    return idx


def phone_name(pid: int) -> str:
    if not 0 <= pid < N_PHONES:
        raise DataError(f"phone id {pid} out of range [0, {N_PHONES})")
    return PHONES[pid]

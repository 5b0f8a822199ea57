"""Interleaved context assembly.

The model input is one flat sequence: every voice prompt block first, then
every script block, each introduced by its speaker tag; generated speech
positions (each turn again introduced by a tag) follow during training and
synthesis. Layout::

    [tag s1, prompt z ...] ... [tag sN, prompt z ...]
    [tag t1, text ...]     ... [tag tM, text ...]
    [tag t1, speech ...]   ... [tag tM, speech ...]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from deskvoice.errors import ConfigError, DataError
from deskvoice.sequencer import vocab


@dataclass(frozen=True)
class ScriptTurn:
    speaker_id: int
    text_tokens: tuple[int, ...]

    def __post_init__(self):
        if not self.text_tokens:
            raise DataError("script turn must contain at least one token")
        if not 1 <= self.speaker_id <= vocab.MAX_SPEAKERS:
            raise DataError(
                f"speaker_id must be in [1, {vocab.MAX_SPEAKERS}], got {self.speaker_id}"
            )
        object.__setattr__(self, "text_tokens", tuple(int(t) for t in self.text_tokens))
        for t in self.text_tokens:
            if not 0 <= t < vocab.N_PHONES:
                raise DataError(f"unknown phone token id {t}")


@dataclass
class VoicePrompt:
    """A reference voice: frozen acoustic latents for one speaker."""

    speaker_id: int
    latents: np.ndarray  # [F, latent_dim]

    def __post_init__(self):
        self.latents = np.asarray(self.latents, dtype=np.float32)
        if self.latents.ndim != 2 or len(self.latents) == 0:
            raise DataError(f"prompt latents must be [F, latent_dim] with F >= 1, got {self.latents.shape}")


@dataclass
class ContextPosition:
    kind: str  # "tag" | "text" | "prompt" | "speech"
    speaker_id: int
    token_id: int | None = None
    z: np.ndarray | None = None
    semantic: np.ndarray | None = None
    turn_index: int | None = None


@dataclass
class ContextSequence:
    positions: list[ContextPosition] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.positions)

    def kinds(self) -> list[str]:
        return [p.kind for p in self.positions]

    def tag_offsets(self) -> list[int]:
        return [i for i, p in enumerate(self.positions) if p.kind == "tag"]

    def append_speech_tag(self, speaker_id: int, turn_index: int) -> None:
        self.positions.append(ContextPosition("tag", speaker_id, token_id=vocab.speaker_tag_id(speaker_id), turn_index=turn_index))

    def append_speech_frame(self, speaker_id: int, z: np.ndarray, semantic: np.ndarray, turn_index: int) -> None:
        self.positions.append(
            ContextPosition("speech", speaker_id, z=np.asarray(z, dtype=np.float32),
                            semantic=np.asarray(semantic, dtype=np.float32), turn_index=turn_index)
        )


def build_context(prompts: list[VoicePrompt], script: list[ScriptTurn]) -> ContextSequence:
    """Lay out prompt blocks then script blocks, each preceded by its tag.

    Total length is sum(prompt lengths) + sum(script lengths) plus one tag
    per prompt block and one per script turn.
    """
    if not 1 <= len(prompts) <= vocab.MAX_SPEAKERS:
        raise ConfigError(f"need between 1 and {vocab.MAX_SPEAKERS} voice prompts, got {len(prompts)}")
    prompt_speakers = [p.speaker_id for p in prompts]
    if len(set(prompt_speakers)) != len(prompt_speakers):
        raise DataError(f"duplicate prompt speakers: {prompt_speakers}")
    known = set(prompt_speakers)
    for turn in script:
        if turn.speaker_id not in known:
            raise DataError(f"script references speaker {turn.speaker_id} with no voice prompt")

    ctx = ContextSequence()
    for prompt in prompts:
        ctx.positions.append(
            ContextPosition("tag", prompt.speaker_id, token_id=vocab.speaker_tag_id(prompt.speaker_id))
        )
        for z in prompt.latents:
            ctx.positions.append(ContextPosition("prompt", prompt.speaker_id, z=z))
    for turn_index, turn in enumerate(script):
        ctx.positions.append(
            ContextPosition("tag", turn.speaker_id, token_id=vocab.speaker_tag_id(turn.speaker_id), turn_index=turn_index)
        )
        for tok in turn.text_tokens:
            ctx.positions.append(ContextPosition("text", turn.speaker_id, token_id=tok, turn_index=turn_index))
    return ctx


def parse_script(text: str) -> list[ScriptTurn]:
    """Parse ``SpeakerK: <phones>`` lines into script turns."""
    turns = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, body = line.partition(":")
        if not sep:
            raise DataError(f"script line {lineno}: expected 'SpeakerK: <phones>', got {line!r}")
        head = head.strip()
        if not head.lower().startswith("speaker"):
            raise DataError(f"script line {lineno}: unknown role {head!r}")
        try:
            speaker_id = int(head[len("speaker") :])
        except ValueError:
            raise DataError(f"script line {lineno}: bad speaker index in {head!r}") from None
        tokens = tuple(vocab.phone_id(tok) for tok in body.split())
        if not tokens:
            raise DataError(f"script line {lineno}: empty phone sequence")
        turns.append(ScriptTurn(speaker_id, tokens))
    if not turns:
        raise DataError("script contains no turns")
    return turns


def read_script(path: str | Path) -> list[ScriptTurn]:
    return parse_script(Path(path).read_text(encoding="utf-8"))

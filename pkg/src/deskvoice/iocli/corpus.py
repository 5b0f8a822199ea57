"""Synthetic multi-speaker corpus.

Each of the 16 phones is a fixed two-partial harmonic segment; speakers
differ in fundamental frequency (by at least 20%), formant offset, and
level. Phone waveforms are deterministic given (phone, speaker); a small
amount of seeded noise is added per sample so the corpus is not exactly
rank-deficient. Everything is a pure function of (seed, index), so
generation is reproducible and parallelizable per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from deskvoice.errors import ConfigError, DataError
from deskvoice.iocli.wav import AudioBuffer, wav_read, wav_write
from deskvoice.sequencer.vocab import N_PHONES, PHONES, phone_id

PHONE_SECONDS = 0.2
DEFAULT_NOISE_STD = 0.003


@dataclass(frozen=True)
class SyntheticSpeakerSpec:
    """Parametric voice: F0, formant offset, and amplitude envelope."""

    speaker_id: int
    f0_hz: float
    formant_offset_hz: float = 0.0
    level: float = 0.6
    attack_seconds: float = 0.008


def default_speakers() -> list[SyntheticSpeakerSpec]:
    """Four voices whose fundamentals differ pairwise by >= 20%."""
    return [
        SyntheticSpeakerSpec(1, 120.0, 0.0, 0.60),
        SyntheticSpeakerSpec(2, 150.0, 40.0, 0.55),
        SyntheticSpeakerSpec(3, 190.0, 80.0, 0.65),
        SyntheticSpeakerSpec(4, 240.0, 120.0, 0.50),
    ]


def _phone_formant_hz(pid: int) -> float:
    return 500.0 + 135.0 * pid


def render_phones(
    phone_ids,
    spec: SyntheticSpeakerSpec,
    sample_rate: int,
    noise_std: float = DEFAULT_NOISE_STD,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Render a phone sequence for one speaker; phase resets at each phone start."""
    n = int(round(PHONE_SECONDS * sample_rate))
    ramp = max(1, int(round(spec.attack_seconds * sample_rate)))
    env = np.ones(n, dtype=np.float64)
    env[:ramp] = np.linspace(0.0, 1.0, ramp, endpoint=False)
    env[-ramp:] = np.linspace(1.0, 0.0, ramp, endpoint=False)
    t = np.arange(n, dtype=np.float64) / sample_rate

    pieces = []
    for pid in phone_ids:
        if not 0 <= pid < N_PHONES:
            raise DataError(f"phone id {pid} out of range [0, {N_PHONES})")
        formant = _phone_formant_hz(pid) + spec.formant_offset_hz
        wave = (
            0.55 * np.sin(2.0 * np.pi * spec.f0_hz * t)
            + 0.20 * np.sin(2.0 * np.pi * 2.0 * spec.f0_hz * t)
            + 0.32 * np.sin(2.0 * np.pi * formant * t)
        )
        pieces.append(spec.level * env * wave)
    audio = np.concatenate(pieces) if pieces else np.zeros(0)
    if noise_std > 0 and rng is not None and len(audio):
        audio = audio + noise_std * rng.standard_normal(len(audio))
    return audio.astype(np.float32)


@dataclass
class CorpusSample:
    index: int
    speaker_id: int
    phone_ids: tuple[int, ...]
    audio: AudioBuffer
    split: str  # "train" or "heldout"


@dataclass
class Corpus:
    samples: list[CorpusSample]
    sample_rate: int
    speakers: list[SyntheticSpeakerSpec] = field(default_factory=default_speakers)
    seed: int = 0

    @property
    def train(self) -> list[CorpusSample]:
        return [s for s in self.samples if s.split == "train"]

    @property
    def heldout(self) -> list[CorpusSample]:
        return [s for s in self.samples if s.split == "heldout"]


def generate_corpus(
    speakers: list[SyntheticSpeakerSpec],
    size: int,
    seed: int,
    sample_rate: int = 8000,
    min_phones: int = 3,
    max_phones: int = 8,
    noise_std: float = DEFAULT_NOISE_STD,
) -> Corpus:
    """Draw ``size`` utterances; every tenth sample goes to the held-out split."""
    if len(speakers) < 2:
        raise ConfigError(f"need at least 2 speakers, got {len(speakers)}")
    if size < 1:
        raise ConfigError(f"corpus size must be >= 1, got {size}")
    samples = []
    for i in range(size):
        rng = np.random.default_rng([seed, i])
        spec = speakers[int(rng.integers(len(speakers)))]
        k = int(rng.integers(min_phones, max_phones + 1))
        ids = tuple(int(p) for p in rng.integers(0, N_PHONES, size=k))
        audio = AudioBuffer(render_phones(ids, spec, sample_rate, noise_std, rng), sample_rate)
        split = "heldout" if i % 10 == 9 else "train"
        samples.append(CorpusSample(i, spec.speaker_id, ids, audio, split))
    return Corpus(samples, sample_rate, speakers=list(speakers), seed=seed)


def save_corpus(corpus: Corpus, directory: str | Path) -> None:
    """Write one WAV per sample plus a tab-delimited index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["index\tsplit\tspeaker_id\twav\tphones"]
    for s in corpus.samples:
        name = f"sample_{s.index:05d}.wav"
        wav_write(s.audio, directory / name)
        phones = " ".join(PHONES[p] for p in s.phone_ids)
        lines.append(f"{s.index}\t{s.split}\t{s.speaker_id}\t{name}\t{phones}")
    (directory / "samples.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {
        "corpus.sample_rate": corpus.sample_rate,
        "corpus.seed": corpus.seed,
        "corpus.size": len(corpus.samples),
        "corpus.speaker_f0": [s.f0_hz for s in corpus.speakers],
        "corpus.speaker_formant_offset": [s.formant_offset_hz for s in corpus.speakers],
        "corpus.speaker_level": [s.level for s in corpus.speakers],
    }
    from deskvoice.iocli.config import write_config

    write_config(meta, directory / "corpus.cfg")


def load_corpus(directory: str | Path) -> Corpus:
    directory = Path(directory)
    from deskvoice.iocli.config import read_config

    meta = read_config(directory / "corpus.cfg")
    f0s = meta["corpus.speaker_f0"]
    offsets = meta["corpus.speaker_formant_offset"]
    levels = meta["corpus.speaker_level"]
    speakers = [
        SyntheticSpeakerSpec(i + 1, float(f0), float(off), float(lvl))
        for i, (f0, off, lvl) in enumerate(zip(f0s, offsets, levels))
    ]
    samples = []
    index_text = (directory / "samples.tsv").read_text(encoding="utf-8").splitlines()
    for line in index_text[1:]:
        if not line.strip():
            continue
        idx, split, speaker_id, wav_name, phones = line.split("\t")
        audio = wav_read(directory / wav_name)
        ids = tuple(phone_id(p) for p in phones.split()) if phones else ()
        samples.append(CorpusSample(int(idx), int(speaker_id), ids, audio, split))
    return Corpus(samples, int(meta["corpus.sample_rate"]), speakers=speakers, seed=int(meta["corpus.seed"]))

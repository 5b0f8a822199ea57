"""Sequence-model + diffusion-head training with frozen tokenizers.

Conversations are pre-encoded once with the frozen tokenizers; each
training step samples a batch, draws fresh sigma-VAE noise for the latent
inputs/targets, assembles the interleaved context (prompts, scripts, then
teacher-forced speech with a tag before each turn), and optimizes the
next-frame noise-prediction loss plus a small stop-classifier term.
Sequence length follows the curriculum; overlong examples lose speech
positions from the left, never prompt or script positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from deskvoice.errors import ConfigError, ContractError, DataError
from deskvoice.iocli.corpus import SyntheticSpeakerSpec, render_phones
from deskvoice.iocli.wav import AudioBuffer
from deskvoice.numcore.layers import Linear, Module
from deskvoice.numcore.tensor import Tensor, backward, concat, log, sigmoid
from deskvoice.diffusion.head import DiffusionHead, DiffusionHeadConfig, diffusion_loss
from deskvoice.diffusion.schedule import NoiseSchedule
from deskvoice.pipeline.optim import AdamW, clip_grad_norm, cosine_lr
from deskvoice.pipeline.pretrain import TrainLogRow
from deskvoice.sequencer import vocab
from deskvoice.sequencer.context import ContextPosition, ContextSequence, ScriptTurn, VoicePrompt, build_context
from deskvoice.sequencer.model import SequenceModel, SequenceModelConfig
from deskvoice.tokenizers.acoustic import AcousticTokenizer
from deskvoice.tokenizers.semantic import SemanticTokenizer

STOP_LABEL_FRAMES = 3  # matches the stop policy's debounce length


@dataclass(frozen=True)
class CurriculumSchedule:
    """Stages of (max sequence length, step count); lengths strictly increase."""

    stages: tuple[tuple[int, int], ...]

    def __post_init__(self):
        stages = tuple((int(l), int(s)) for l, s in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ConfigError("curriculum needs at least one stage")
        lengths = [l for l, _ in stages]
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ConfigError(f"curriculum lengths must strictly increase, got {lengths}")
        if any(s < 1 for _, s in stages):
            raise ConfigError("curriculum stage step counts must be >= 1")

    @property
    def total_steps(self) -> int:
        return sum(s for _, s in self.stages)

    def max_len_at(self, step: int) -> int:
        """Sequence cap in force at 0-based global step ``step``."""
        consumed = 0
        for length, count in self.stages:
            consumed += count
            if step < consumed:
                return length
        return self.stages[-1][0]

    def boundaries(self) -> list[int]:
        """Global steps at which a new stage begins (first stage starts at 0)."""
        out, consumed = [0], 0
        for _, count in self.stages[:-1]:
            consumed += count
            out.append(consumed)
        return out


def desk_curriculum() -> CurriculumSchedule:
    return CurriculumSchedule(((64, 150), (128, 200), (256, 200), (512, 150)))


# -- conversation data --------------------------------------------------------------


@dataclass
class Conversation:
    prompts: dict[int, AudioBuffer]  # speaker_id -> prompt audio
    turns: list[tuple[int, tuple[int, ...], AudioBuffer]]  # (speaker, phones, audio)


PROMPT_PHONES = (0, 5)  # every voice introduces itself with the same two phones


def make_conversations(
    speakers: list[SyntheticSpeakerSpec],
    n: int,
    seed: int,
    sample_rate: int = 8000,
    max_turns: int = 3,
    min_phones: int = 3,
    max_phones: int = 8,
) -> list[Conversation]:
    """Random 1-2 speaker dialogues rendered with the corpus voices."""
    by_id = {s.speaker_id: s for s in speakers}
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed, 7000 + i])
        n_speakers = int(rng.integers(1, 3))
        chosen = list(rng.choice(sorted(by_id), size=n_speakers, replace=False))
        prompts = {
            int(s): AudioBuffer(render_phones(PROMPT_PHONES, by_id[int(s)], sample_rate, rng=rng), sample_rate)
            for s in chosen
        }
        n_turns = int(rng.integers(1, max_turns + 1))
        turns = []
        for j in range(n_turns):
            spk = int(chosen[j % len(chosen)])
            k = int(rng.integers(min_phones, max_phones + 1))
            phones = tuple(int(p) for p in rng.integers(0, vocab.N_PHONES, size=k))
            audio = AudioBuffer(render_phones(phones, by_id[spk], sample_rate, rng=rng), sample_rate)
            turns.append((spk, phones, audio))
        out.append(Conversation(prompts, turns))
    return out


@dataclass
class EncodedConversation:
    """Frozen-tokenizer features for one conversation."""

    prompt_mu: dict[int, np.ndarray]  # speaker -> [F, latent]
    turns: list[tuple[int, tuple[int, ...], np.ndarray, np.ndarray]]  # (spk, phones, mu, semantic)


def encode_conversations(
    conversations: list[Conversation],
    acoustic: AcousticTokenizer,
    semantic: SemanticTokenizer,
) -> list[EncodedConversation]:
    out = []
    for conv in conversations:
        prompt_mu = {spk: acoustic.encode(audio) for spk, audio in conv.prompts.items()}
        turns = []
        for spk, phones, audio in conv.turns:
            turns.append((spk, phones, acoustic.encode(audio), semantic.encode(audio)))
        out.append(EncodedConversation(prompt_mu, turns))
    return out


# -- model bundle --------------------------------------------------------------------


class TtsModel(Module):
    """Sequence model, diffusion head, and stop head trained together.

    ``z_mean``/``z_std`` normalize acoustic latents into the diffusion
    head's working space; they are corpus statistics, not parameters.
    """

    def __init__(self, seq_config: SequenceModelConfig, head_config: DiffusionHeadConfig, rng):
        self.sequencer = SequenceModel(seq_config, rng)
        self.head = DiffusionHead(head_config, rng)
        self.stop_head = Linear(seq_config.model_dim, 1, rng)
        self.seq_config = seq_config
        self.head_config = head_config
        self.z_mean = np.zeros(head_config.latent_dim, dtype=np.float32)
        self.z_std = np.ones(head_config.latent_dim, dtype=np.float32)

    def set_latent_stats(self, mean: np.ndarray, std: np.ndarray) -> None:
        self.z_mean = mean.astype(np.float32)
        self.z_std = np.maximum(std.astype(np.float32), 1e-3)

    def normalize_z(self, z: np.ndarray) -> np.ndarray:
        return (z - self.z_mean) / self.z_std

    def denormalize_z(self, z: np.ndarray) -> np.ndarray:
        return z * self.z_std + self.z_mean


# -- training example assembly --------------------------------------------------------


@dataclass
class _Assembled:
    ctx: ContextSequence
    cond_positions: np.ndarray  # positions whose hidden state predicts the next frame
    target_z: np.ndarray  # [n, latent] raw-latent targets aligned with cond_positions
    stop_positions: np.ndarray  # speech-frame positions
    stop_labels: np.ndarray  # 1 within the last STOP_LABEL_FRAMES of a turn


def _assemble_example(
    enc: EncodedConversation,
    sigma_scale: float,
    rng: np.random.Generator,
    max_len: int,
) -> _Assembled:
    prompts = []
    for spk in sorted(enc.prompt_mu):
        mu = enc.prompt_mu[spk]
        sig = np.sqrt(sigma_scale) * rng.standard_normal(mu.shape)
        z = mu + sig * rng.standard_normal(mu.shape)
        prompts.append(VoicePrompt(spk, z.astype(np.float32)))
    script = [ScriptTurn(spk, phones) for spk, phones, _, _ in enc.turns]
    ctx = build_context(prompts, script)
    fixed_len = len(ctx)

    # Teacher-forced speech region: tag, then the turn's frames.
    speech: list[ContextPosition] = []
    cond_rel: list[int] = []  # index into the speech region (or -1 -> last fixed position)
    targets: list[np.ndarray] = []
    stop_rel: list[int] = []
    stop_lab: list[int] = []
    for turn_index, (spk, _, mu, semantic) in enumerate(enc.turns):
        eps = rng.standard_normal(mu.shape)
        sig = np.sqrt(sigma_scale) * rng.standard_normal(mu.shape)
        z = (mu + sig * eps).astype(np.float32)
        tag_rel = len(speech)
        speech.append(
            ContextPosition("tag", spk, token_id=vocab.speaker_tag_id(spk), turn_index=turn_index)
        )
        n_frames = len(mu)
        for j in range(n_frames):
            cond_rel.append(tag_rel + j)  # tag conditions frame 0, frame j-1 conditions frame j
            targets.append(z[j])
            frame_rel = len(speech)
            speech.append(
                ContextPosition(
                    "speech", spk, z=z[j], semantic=semantic[j].astype(np.float32), turn_index=turn_index
                )
            )
            stop_rel.append(frame_rel)
            stop_lab.append(1 if j >= n_frames - STOP_LABEL_FRAMES else 0)

    # Curriculum cap: drop speech positions from the left, keep prompts/scripts.
    total = fixed_len + len(speech)
    dropped = 0
    if total > max_len:
        dropped = total - max_len
        if dropped >= len(speech):
            raise ContractError(
                f"sequence cap {max_len} cannot even hold the prompt+script prefix ({fixed_len})"
            )
        speech = speech[dropped:]

    # A (conditioning position, target frame) pair survives truncation when
    # the conditioning position does: the target always sits one to its right.
    pairs = [(fixed_len + c - dropped, t) for c, t in zip(cond_rel, targets) if c >= dropped]
    stops = [(fixed_len + r - dropped, lab) for r, lab in zip(stop_rel, stop_lab) if r >= dropped]

    ctx.positions.extend(speech)
    latent_dim = targets[0].shape[0]
    cond_positions = np.array([p for p, _ in pairs], dtype=np.int64)
    target_z = np.stack([t for _, t in pairs]) if pairs else np.zeros((0, latent_dim), np.float32)
    stop_positions = np.array([p for p, _ in stops], dtype=np.int64)
    stop_labels = np.array([l for _, l in stops], dtype=np.float32)
    return _Assembled(ctx, cond_positions, target_z, stop_positions, stop_labels)


def prefix_length(enc: EncodedConversation) -> int:
    """Prompt+script positions including tags (the untruncatable prefix)."""
    n_prompt = sum(len(mu) for mu in enc.prompt_mu.values()) + len(enc.prompt_mu)
    n_script = sum(len(phones) + 1 for _, phones, _, _ in enc.turns)
    return n_prompt + n_script


# -- training loop --------------------------------------------------------------------


def train_tts(
    encoded: list[EncodedConversation],
    sigma_scale: float,
    model: TtsModel,
    schedule: NoiseSchedule,
    curriculum: CurriculumSchedule,
    seed: int,
    batch_size: int = 4,
    lr: float = 3e-4,
    p_uncond: float = 0.1,
    stop_weight: float = 0.3,
) -> list[TrainLogRow]:
    """Optimize sequencer + diffusion head + stop head; tokenizers are frozen
    by construction (they only appear through precomputed features)."""
    if not encoded:
        raise DataError("no training conversations")
    longest_prefix = max(prefix_length(e) for e in encoded)
    first_cap = curriculum.stages[0][0]
    if first_cap < longest_prefix:
        raise ConfigError(
            f"first curriculum length {first_cap} is shorter than the longest "
            f"prompt+script prefix {longest_prefix}"
        )

    # Latent normalization statistics over all clean turn latents.
    all_mu = np.concatenate([mu for e in encoded for _, _, mu, _ in e.turns])
    model.set_latent_stats(all_mu.mean(axis=0), all_mu.std(axis=0))

    rng = np.random.default_rng([seed, 303])
    params = model.parameters()
    opt = AdamW(params, lr=lr)
    rows: list[TrainLogRow] = []
    total_steps = curriculum.total_steps

    for step in range(total_steps):
        max_len = curriculum.max_len_at(step)
        batch = []
        attempts = 0
        while len(batch) < batch_size:
            attempts += 1
            if attempts > 50 * batch_size:
                raise ContractError(f"could not assemble a batch under sequence cap {max_len}")
            a = _assemble_example(encoded[int(rng.integers(len(encoded)))], sigma_scale, rng, max_len)
            if len(a.cond_positions):
                batch.append(a)
        t_max = max(len(a.ctx) for a in batch)
        embeddings = []
        for a in batch:
            pad = t_max - len(a.ctx)
            if pad:
                a.ctx.positions.extend(
                    ContextPosition("text", 1, token_id=vocab.PAD_ID) for _ in range(pad)
                )
            emb = model.sequencer.embed_context(a.ctx)
            embeddings.append(emb.reshape(1, t_max, emb.shape[-1]))
        x = concat(embeddings, axis=0)
        h = model.sequencer.forward(x)
        d = h.shape[-1]
        h_flat = h.reshape(len(batch) * t_max, d)

        cond_idx = np.concatenate([a.cond_positions + i * t_max for i, a in enumerate(batch)])
        z0 = np.concatenate([a.target_z for a in batch])
        h_cond = h_flat[cond_idx]
        z0_norm = model.normalize_z(z0)
        diff_loss = diffusion_loss(
            model.head, h_cond, z0_norm, rng, schedule, p_uncond=p_uncond
        )

        stop_idx = np.concatenate([a.stop_positions + i * t_max for i, a in enumerate(batch)])
        labels = np.concatenate([a.stop_labels for a in batch])
        logits = model.stop_head(h_flat[stop_idx]).reshape(len(labels))
        p = sigmoid(logits)
        weights = np.where(labels > 0, 6.0, 1.0).astype(np.float32)
        weights = weights / weights.sum()
        bce_terms = log(p + 1e-7) * Tensor(labels) + log(1.0 - p + 1e-7) * Tensor(1.0 - labels)
        stop_loss = -(bce_terms * Tensor(weights)).sum()

        loss = diff_loss + stop_weight * stop_loss
        value = loss.item()
        if not np.isfinite(value):
            raise ContractError(f"TTS training diverged at step {step}: loss={value}")
        opt.zero_grad()
        backward(loss)
        clip_grad_norm(params, 5.0)
        opt.lr = cosine_lr(step, total_steps, lr)
        opt.step()
        rows.append(TrainLogRow(step, f"len{max_len}", value, opt.lr))
    return rows


def smoothed_loss(rows: list[TrainLogRow], window: int = 50) -> np.ndarray:
    values = np.array([r.loss for r in rows])
    if len(values) < window:
        return values
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")

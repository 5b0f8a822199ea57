"""Tokenizer pretraining: reconstruction for the acoustic codec, the ASR
proxy for the semantic encoder, plus the held-out evaluations that gate a
desk run (reconstruction SNR, linear probe accuracy)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from deskvoice.errors import ContractError
from deskvoice.iocli.corpus import Corpus, PHONE_SECONDS
from deskvoice.iocli.metrics import eval_metrics
from deskvoice.iocli.wav import AudioBuffer
from deskvoice.numcore.tensor import Tensor, backward
from deskvoice.pipeline.optim import AdamW, clip_grad_norm, cosine_lr
from deskvoice.tokenizers.acoustic import AcousticTokenizer, sample_latent_batch
from deskvoice.tokenizers.config import AcousticTokenizerConfig
from deskvoice.tokenizers.losses import reconstruction_loss
from deskvoice.tokenizers.semantic import AsrProxyDecoder, SemanticTokenizer, asr_proxy_step


@dataclass
class TrainLogRow:
    step: int
    stage: str
    loss: float
    lr: float

    def tsv(self) -> str:
        return f"{self.step}\t{self.stage}\t{self.loss:.6f}\t{self.lr:.6g}"


def write_log(rows: list[TrainLogRow], path: str | Path) -> None:
    lines = ["step\tstage\tloss\tlr"] + [r.tsv() for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _crop_pool(corpus: Corpus, crop_samples: int, hop: int) -> list[tuple[np.ndarray, int]]:
    """(padded sample array, number of valid frame-aligned crop offsets) pairs."""
    pool = []
    for s in corpus.train:
        x = s.audio.samples
        if len(x) < crop_samples:
            x = np.pad(x, (0, crop_samples - len(x)))
        offsets = (len(x) - crop_samples) // hop + 1
        pool.append((x, offsets))
    return pool


def pretrain_acoustic(
    corpus: Corpus,
    config: AcousticTokenizerConfig,
    seed: int,
    steps: int = 1500,
    batch_size: int = 8,
    crop_frames: int = 5,
    lr: float = 2e-3,
) -> tuple[AcousticTokenizer, list[TrainLogRow]]:
    """Reconstruction training: L1 + multi-resolution STFT on sampled latents."""
    rng = np.random.default_rng([seed, 101])
    model = AcousticTokenizer(config, rng)
    params = model.parameters()
    opt = AdamW(params, lr=lr)
    hop = config.hop
    crop = crop_frames * hop
    pool = _crop_pool(corpus, crop, hop)
    rows: list[TrainLogRow] = []

    for step in range(steps):
        xs = []
        for _ in range(batch_size):
            x, offsets = pool[int(rng.integers(len(pool)))]
            start = int(rng.integers(offsets)) * hop
            xs.append(x[start : start + crop])
        batch = np.stack(xs).astype(np.float32)

        mu = model.encoder(Tensor(batch))
        z = sample_latent_batch(mu, config.sigma_scale, rng)
        pred = model.decoder(z)
        loss, _ = reconstruction_loss(pred, Tensor(batch))
        value = loss.item()
        if not np.isfinite(value):
            raise ContractError(f"acoustic pretraining diverged at step {step}: loss={value}")
        opt.zero_grad()
        backward(loss)
        clip_grad_norm(params, 5.0)
        opt.lr = cosine_lr(step, steps, lr)
        opt.step()
        rows.append(TrainLogRow(step, "acoustic", value, opt.lr))
    return model, rows


def pretrain_semantic(
    corpus: Corpus,
    config: AcousticTokenizerConfig,
    seed: int,
    steps: int = 1200,
    batch_size: int = 8,
    lr: float = 1e-3,
) -> tuple[SemanticTokenizer, AsrProxyDecoder, list[TrainLogRow]]:
    """ASR-proxy training; the decoder is a separate group, discarded later."""
    rng = np.random.default_rng([seed, 202])
    model = SemanticTokenizer(config, rng)
    decoder = AsrProxyDecoder(config.semantic_dim, rng)
    params = model.parameters() + decoder.parameters()
    opt = AdamW(params, lr=lr)
    hop = config.hop
    train = corpus.train
    rows: list[TrainLogRow] = []

    for step in range(steps):
        picks = [train[int(rng.integers(len(train)))] for _ in range(batch_size)]
        max_len = max(len(p.audio.samples) for p in picks)
        max_len += (-max_len) % hop
        batch = np.zeros((batch_size, max_len), dtype=np.float32)
        transcripts = []
        for i, p in enumerate(picks):
            batch[i, : len(p.audio.samples)] = p.audio.samples
            transcripts.append(list(p.phone_ids))

        frames = model.encoder(Tensor(batch))
        loss = asr_proxy_step(decoder, frames, transcripts)
        value = loss.item()
        if not np.isfinite(value):
            raise ContractError(f"semantic pretraining diverged at step {step}: loss={value}")
        opt.zero_grad()
        backward(loss)
        clip_grad_norm(params, 5.0)
        opt.lr = cosine_lr(step, steps, lr)
        opt.step()
        rows.append(TrainLogRow(step, "semantic", value, opt.lr))
    return model, decoder, rows


def pretrain_tokenizers(
    corpus: Corpus,
    config: AcousticTokenizerConfig,
    seed: int,
    acoustic_steps: int = 1500,
    semantic_steps: int = 1200,
    batch_size: int = 8,
) -> tuple[AcousticTokenizer, SemanticTokenizer, AsrProxyDecoder, list[TrainLogRow]]:
    acoustic, rows_a = pretrain_acoustic(corpus, config, seed, steps=acoustic_steps, batch_size=batch_size)
    semantic, decoder, rows_s = pretrain_semantic(corpus, config, seed, steps=semantic_steps, batch_size=batch_size)
    return acoustic, semantic, decoder, rows_a + rows_s


# -- held-out evaluations ------------------------------------------------------------


def acoustic_heldout_snr(model: AcousticTokenizer, corpus: Corpus) -> float:
    """Mean reconstruction SNR (dB) over the held-out split, deterministic path."""
    snrs = []
    for s in corpus.heldout:
        mu = model.encode(s.audio)
        recon = model.decode(mu)
        snrs.append(eval_metrics(s.audio, recon)["snr_db"])
    return float(np.mean(snrs))


def _frame_phone_labels(sample, hop: int) -> np.ndarray:
    """Phone id active at each frame's center; frames past the transcript get -1."""
    n_frames = -(-len(sample.audio.samples) // hop)
    phone_len = int(round(PHONE_SECONDS * sample.audio.sample_rate))
    centers = hop * np.arange(n_frames) + hop // 2
    labels = centers // phone_len
    labels = np.where(labels < len(sample.phone_ids), labels, -1)
    return np.array([sample.phone_ids[l] if l >= 0 else -1 for l in labels])


def semantic_probe_accuracy(model: SemanticTokenizer, corpus: Corpus) -> float:
    """Accuracy of a logistic probe (train split -> held-out) on frame phone labels."""
    from sklearn.linear_model import LogisticRegression

    def collect(samples):
        feats, labels = [], []
        for s in samples:
            frames = model.encode(s.audio)
            lab = _frame_phone_labels(s, model.config.hop)
            keep = lab >= 0
            feats.append(frames[: len(lab)][keep])
            labels.append(lab[keep])
        return np.concatenate(feats), np.concatenate(labels)

    x_train, y_train = collect(corpus.train)
    x_test, y_test = collect(corpus.heldout)
    probe = LogisticRegression(max_iter=2000)
    probe.fit(x_train, y_train)
    return float(probe.score(x_test, y_test))

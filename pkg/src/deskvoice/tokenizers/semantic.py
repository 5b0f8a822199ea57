"""Semantic tokenizer: the acoustic encoder geometry without VAE sampling,
trained through an ASR proxy decoder that is discarded after pretraining.

The proxy decoder cross-attends from transcript tokens to the semantic
frames; its cross-entropy gradients are what shape the encoder features.
It lives in a separate parameter group (``asr.*``) that synthesis never
loads.
"""

from __future__ import annotations

import numpy as np

from deskvoice.errors import ConfigError, DataError
from deskvoice.iocli.wav import AudioBuffer
from deskvoice.numcore.layers import Embedding, LayerNorm, Linear, Module, MultiHeadAttention
from deskvoice.numcore.tensor import Tensor, cross_entropy, no_grad, silu
from deskvoice.sequencer import vocab
from deskvoice.tokenizers.acoustic import EncoderStream, HierarchicalEncoder
from deskvoice.tokenizers.config import AcousticTokenizerConfig


class SemanticTokenizer(Module):
    """Deterministic content encoder sharing the acoustic hierarchy."""

    def __init__(self, config: AcousticTokenizerConfig, rng, dtype=np.float32):
        self.encoder = HierarchicalEncoder(config, config.semantic_dim, rng, dtype)
        self.config = config
        self.dtype = dtype

    def encode(self, audio: AudioBuffer) -> np.ndarray:
        if audio.sample_rate != self.config.sample_rate:
            raise ConfigError(
                f"audio sample rate {audio.sample_rate} does not match tokenizer "
                f"sample rate {self.config.sample_rate}"
            )
        if len(audio) == 0:
            return np.zeros((0, self.config.semantic_dim), dtype=self.dtype)
        hop = self.config.hop
        x = audio.samples.astype(self.dtype)
        remainder = len(x) % hop
        if remainder:
            x = np.pad(x, (0, hop - remainder))
        with no_grad():
            feats = self.encoder(Tensor(x[None, :]))
        return feats.numpy()[0]

    def encode_stream(self) -> EncoderStream:
        return EncoderStream(self.encoder, self.config)


class _AsrDecoderLayer(Module):
    def __init__(self, dim: int, heads: int, rng, dtype=np.float32):
        self.norm_self = LayerNorm(dim, dtype=dtype)
        self.self_attn = MultiHeadAttention(dim, heads, rng, causal=True, dtype=dtype)
        self.norm_cross = LayerNorm(dim, dtype=dtype)
        self.cross_attn = MultiHeadAttention(dim, heads, rng, dtype=dtype)
        self.norm_ffn = LayerNorm(dim, dtype=dtype)
        self.ffn_in = Linear(dim, 2 * dim, rng, dtype=dtype)
        self.ffn_out = Linear(2 * dim, dim, rng, dtype=dtype)

    def forward(self, x: Tensor, memory: Tensor) -> Tensor:
        x = x + self.self_attn(self.norm_self(x))
        x = x + self.cross_attn(self.norm_cross(x), memory=memory)
        return x + self.ffn_out(silu(self.ffn_in(self.norm_ffn(x))))


class AsrProxyDecoder(Module):
    """Small transformer decoder predicting transcripts from semantic frames."""

    def __init__(
        self,
        semantic_dim: int,
        rng,
        dim: int = 48,
        heads: int = 4,
        n_layers: int = 2,
        max_len: int = 64,
        dtype=np.float32,
    ):
        self.embed = Embedding(vocab.VOCAB_SIZE, dim, rng, dtype=dtype)
        self.pos = Embedding(max_len, dim, rng, dtype=dtype)
        self.mem_proj = Linear(semantic_dim, dim, rng, dtype=dtype)
        self.layers = [_AsrDecoderLayer(dim, heads, rng, dtype) for _ in range(n_layers)]
        self.out_norm = LayerNorm(dim, dtype=dtype)
        self.out_proj = Linear(dim, vocab.VOCAB_SIZE, rng, dtype=dtype)
        self.max_len = max_len

    def forward(self, token_ids: np.ndarray, semantic_frames: Tensor) -> Tensor:
        """token_ids [B, L] -> logits [B, L, vocab]."""
        b, length = token_ids.shape
        x = self.embed(token_ids) + self.pos(np.arange(length))
        memory = self.mem_proj(semantic_frames)
        for layer in self.layers:
            x = layer(x, memory)
        return self.out_proj(self.out_norm(x))


def asr_proxy_step(
    decoder: AsrProxyDecoder, semantic_frames: Tensor, transcripts: list[list[int]]
) -> Tensor:
    """Teacher-forced cross-entropy of transcripts given semantic frames.

    ``semantic_frames`` is [B, F, semantic_dim]; gradients flow back into
    whatever produced it. Transcripts are phone-id sequences; BOS is
    prepended on the input side and EOS appended on the target side.
    """
    batch = len(transcripts)
    if semantic_frames.shape[0] != batch:
        raise DataError(
            f"batch mismatch: {semantic_frames.shape[0]} frame sequences vs {batch} transcripts"
        )
    for t in transcripts:
        for tok in t:
            if not 0 <= tok < vocab.N_PHONES:
                raise DataError(f"unknown token id {tok} (phone vocabulary has {vocab.N_PHONES})")
    length = max(len(t) for t in transcripts) + 1  # room for BOS/EOS shift
    inputs = np.full((batch, length), vocab.PAD_ID, dtype=np.int64)
    targets = np.full((batch, length), vocab.PAD_ID, dtype=np.int64)
    mask = np.zeros((batch, length), dtype=bool)
    for i, t in enumerate(transcripts):
        inputs[i, 0] = vocab.BOS_ID
        inputs[i, 1 : 1 + len(t)] = t
        targets[i, : len(t)] = t
        targets[i, len(t)] = vocab.EOS_ID
        mask[i, : len(t) + 1] = True

    logits = decoder(inputs, semantic_frames)
    flat = logits.reshape(batch * length, vocab.VOCAB_SIZE)
    keep = np.flatnonzero(mask.reshape(-1))
    return cross_entropy(flat[keep], targets.reshape(-1)[keep])

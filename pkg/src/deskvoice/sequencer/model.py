"""Causal transformer over the interleaved context.

Three input pathways share the model width: a token embedding table for
text and speaker tags, a linear projection for prompt latents, and the
hybrid projection (concatenate acoustic z with semantic features, then
project) for generated-speech positions. Positions are learned embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deskvoice.errors import CapacityError, ShapeError
from deskvoice.numcore.layers import Embedding, KVCache, LayerNorm, Linear, Module, MultiHeadAttention
from deskvoice.numcore.tensor import Tensor, concat, silu
from deskvoice.sequencer import vocab
from deskvoice.sequencer.context import ContextSequence


@dataclass(frozen=True)
class SequenceModelConfig:
    model_dim: int = 128
    heads: int = 4
    layers: int = 4
    max_len: int = 512
    latent_dim: int = 16
    semantic_dim: int = 16

    def to_flat(self, prefix: str = "sequencer.") -> dict:
        return {
            f"{prefix}model_dim": self.model_dim,
            f"{prefix}heads": self.heads,
            f"{prefix}layers": self.layers,
            f"{prefix}max_len": self.max_len,
            f"{prefix}latent_dim": self.latent_dim,
            f"{prefix}semantic_dim": self.semantic_dim,
        }

    @classmethod
    def from_flat(cls, flat: dict, prefix: str = "sequencer.") -> "SequenceModelConfig":
        return cls(
            model_dim=int(flat[f"{prefix}model_dim"]),
            heads=int(flat[f"{prefix}heads"]),
            layers=int(flat[f"{prefix}layers"]),
            max_len=int(flat[f"{prefix}max_len"]),
            latent_dim=int(flat[f"{prefix}latent_dim"]),
            semantic_dim=int(flat[f"{prefix}semantic_dim"]),
        )


class _TransformerLayer(Module):
    def __init__(self, dim: int, heads: int, rng, dtype=np.float32):
        self.norm_attn = LayerNorm(dim, dtype=dtype)
        self.attn = MultiHeadAttention(dim, heads, rng, causal=True, dtype=dtype)
        self.norm_ffn = LayerNorm(dim, dtype=dtype)
        self.ffn_in = Linear(dim, 4 * dim, rng, dtype=dtype)
        self.ffn_out = Linear(4 * dim, dim, rng, dtype=dtype)

    def forward(self, x: Tensor, cache: KVCache | None = None, layer_index: int = 0) -> Tensor:
        x = x + self.attn(self.norm_attn(x), cache=cache, layer_index=layer_index)
        return x + self.ffn_out(silu(self.ffn_in(self.norm_ffn(x))))


class SequenceModel(Module):
    def __init__(self, config: SequenceModelConfig, rng, dtype=np.float32):
        d = config.model_dim
        self.text_embed = Embedding(vocab.VOCAB_SIZE, d, rng, dtype=dtype)
        self.prompt_proj = Linear(config.latent_dim, d, rng, dtype=dtype)
        self.hybrid_proj = Linear(config.latent_dim + config.semantic_dim, d, rng, dtype=dtype)
        self.pos_embed = Embedding(config.max_len, d, rng, dtype=dtype)
        self.blocks = [_TransformerLayer(d, config.heads, rng, dtype) for _ in range(config.layers)]
        self.final_norm = LayerNorm(d, dtype=dtype)
        self.config = config

    # -- input pathways -----------------------------------------------------------

    def embed_hybrid(self, z, semantic) -> Tensor:
        """Concatenate-then-project combination of acoustic and semantic features.

        Accepts single vectors or [N, dim] stacks; the result is affine in
        the concatenated pair.
        """
        z = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=np.float32))
        semantic = semantic if isinstance(semantic, Tensor) else Tensor(np.asarray(semantic, dtype=np.float32))
        single = z.ndim == 1
        if single:
            z = z.reshape(1, z.shape[0])
            semantic = semantic.reshape(1, semantic.shape[0])
        if z.shape[-1] != self.config.latent_dim or semantic.shape[-1] != self.config.semantic_dim:
            raise ShapeError(
                f"hybrid inputs must be [*, {self.config.latent_dim}] and [*, {self.config.semantic_dim}], "
                f"got {z.shape} and {semantic.shape}"
            )
        out = self.hybrid_proj(concat([z, semantic], axis=-1))
        return out.reshape(out.shape[-1]) if single else out

    def embed_context(self, ctx: ContextSequence) -> Tensor:
        """ContextSequence -> [T, model_dim] input embeddings (no positions)."""
        token_ids, token_pos = [], []
        prompt_zs, prompt_pos = [], []
        speech_feats, speech_pos = [], []
        for i, p in enumerate(ctx.positions):
            if p.kind in ("tag", "text"):
                token_ids.append(p.token_id)
                token_pos.append(i)
            elif p.kind == "prompt":
                prompt_zs.append(p.z)
                prompt_pos.append(i)
            elif p.kind == "speech":
                speech_feats.append(np.concatenate([p.z, p.semantic]))
                speech_pos.append(i)
            else:
                raise ShapeError(f"unknown context position kind {p.kind!r}")
        chunks, order = [], []
        if token_ids:
            chunks.append(self.text_embed(np.array(token_ids)))
            order.extend(token_pos)
        if prompt_zs:
            chunks.append(self.prompt_proj(Tensor(np.stack(prompt_zs))))
            order.extend(prompt_pos)
        if speech_feats:
            chunks.append(self.hybrid_proj(Tensor(np.stack(speech_feats))))
            order.extend(speech_pos)
        rows = chunks[0] if len(chunks) == 1 else concat(chunks, axis=0)
        perm = np.argsort(np.array(order))
        return rows[perm]

    # -- transformer --------------------------------------------------------------

    def forward(self, x: Tensor, cache: KVCache | None = None, start_pos: int = 0) -> Tensor:
        """Embedded inputs [B, T, D] -> hidden states [B, T, D].

        With a cache, ``start_pos`` is the number of positions already
        consumed; new positions attend over everything cached plus
        themselves.
        """
        b, t, d = x.shape
        end = start_pos + t
        if end > self.config.max_len:
            raise CapacityError(
                f"sequence length {end} exceeds configured maximum {self.config.max_len}"
            )
        x = x + self.pos_embed(np.arange(start_pos, end))
        for i, block in enumerate(self.blocks):
            x = block(x, cache=cache, layer_index=i)
        return self.final_norm(x)

    def hidden_states(self, ctx: ContextSequence) -> Tensor:
        """Convenience single-sequence path: context -> [T, model_dim]."""
        emb = self.embed_context(ctx)
        t, d = emb.shape
        return self.forward(emb.reshape(1, t, d)).reshape(t, d)

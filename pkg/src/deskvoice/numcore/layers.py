"""Parameterized layers built on the tensor ops.

All layers operate channels-last ([B, T, C] for sequence data) and take an
explicit ``rng`` for initialization so builds are reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from deskvoice.errors import ShapeError
from deskvoice.numcore import functional as F
from deskvoice.numcore.tensor import (
    Tensor,
    concat,
    embedding_lookup,
    matmul,
    softmax,
)


class Module:
    """Base class providing parameter discovery and state (de)serialization."""

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{key}.{i}"] = item
        return out

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ShapeError(
                f"parameter names do not match: missing {sorted(missing)[:4]}, unexpected {sorted(extra)[:4]}"
            )
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ShapeError(f"parameter {name}: expected shape {p.data.shape}, got {arr.shape}")
            p.data = arr.copy()
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _init(rng: np.random.Generator, shape, scale: float, dtype) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape).astype(dtype), requires_grad=True)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True, dtype=np.float32):
        self.weight = _init(rng, (d_in, d_out), 1.0 / np.sqrt(d_in), dtype)
        self.bias = Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        lead = x.shape[:-1]
        flat = x.reshape(int(np.prod(lead)) if lead else 1, x.shape[-1])
        y = matmul(flat, self.weight)
        if self.bias is not None:
            y = y + self.bias
        return y.reshape(*lead, self.weight.shape[1])


class Embedding(Module):
    def __init__(self, n_embeddings: int, dim: int, rng: np.random.Generator, dtype=np.float32):
        self.weight = _init(rng, (n_embeddings, dim), 0.02, dtype)

    def forward(self, ids: np.ndarray) -> Tensor:
        return embedding_lookup(self.weight, np.asarray(ids))


class LayerNorm(Module):
    def __init__(self, dim: int, dtype=np.float32, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.shift = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        from deskvoice.numcore.tensor import sqrt as tsqrt

        return centered / tsqrt(var + self.eps) * self.gain + self.shift


class DepthwiseCausalConv1d(Module):
    """Per-channel causal convolution over [B, T, C] with optional dilation."""

    def __init__(self, channels: int, width: int, rng: np.random.Generator, dilation: int = 1, dtype=np.float32):
        self.kernel = _init(rng, (width, channels), 1.0 / np.sqrt(width), dtype)
        self.bias = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.dilation = dilation

    @property
    def left_context(self) -> int:
        return (self.kernel.shape[0] - 1) * self.dilation

    def forward(self, x: Tensor) -> Tensor:
        return F.dw_causal_conv(x, self.kernel, self.dilation) + self.bias


class DownsampleConv1d(Module):
    """Strided causal conv reducing time by ``factor`` while mapping channels."""

    def __init__(self, c_in: int, c_out: int, factor: int, rng: np.random.Generator, dtype=np.float32):
        width = 2 * factor
        self.weight = _init(rng, (width, c_in, c_out), 1.0 / np.sqrt(width * c_in), dtype)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.factor = factor

    @property
    def left_context(self) -> int:
        return self.weight.shape[0] - self.factor

    def forward(self, x: Tensor) -> Tensor:
        return F.strided_causal_conv(x, self.weight, self.bias, self.factor)


class UpsampleConv1d(Module):
    """Transposed strided conv expanding time by ``factor`` (decoder mirror)."""

    def __init__(self, c_in: int, c_out: int, factor: int, rng: np.random.Generator, dtype=np.float32):
        width = 2 * factor
        self.weight = _init(rng, (c_in, width, c_out), 1.0 / np.sqrt(width * c_in), dtype)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.factor = factor

    def forward(self, x: Tensor) -> Tensor:
        return F.transposed_causal_conv(x, self.weight, self.bias, self.factor)


class KVCache:
    """Per-layer key/value memory for incremental decoding."""

    def __init__(self):
        self.keys: dict[int, np.ndarray] = {}
        self.values: dict[int, np.ndarray] = {}

    def append(self, layer: int, k: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if layer in self.keys:
            self.keys[layer] = np.concatenate([self.keys[layer], k], axis=-2)
            self.values[layer] = np.concatenate([self.values[layer], v], axis=-2)
        else:
            self.keys[layer] = k
            self.values[layer] = v
        return self.keys[layer], self.values[layer]

    def length(self, layer: int = 0) -> int:
        k = self.keys.get(layer)
        return 0 if k is None else k.shape[-2]


class MultiHeadAttention(Module):
    """Multi-head attention over [B, T, D]; self-attention or cross-attention.

    For incremental decoding pass ``cache`` and ``layer_index``: queries for
    the new suffix attend over all cached positions plus the suffix itself.
    """

    def __init__(
        self,
        dim: int,
        heads: int,
        rng: np.random.Generator,
        causal: bool = False,
        kv_dim: int | None = None,
        dtype=np.float32,
    ):
        if dim % heads != 0:
            raise ShapeError(f"model dim {dim} not divisible by head count {heads}")
        kv_dim = kv_dim or dim
        self.q_proj = Linear(dim, dim, rng, dtype=dtype)
        self.k_proj = Linear(kv_dim, dim, rng, dtype=dtype)
        self.v_proj = Linear(kv_dim, dim, rng, dtype=dtype)
        self.out_proj = Linear(dim, dim, rng, dtype=dtype)
        self.heads = heads
        self.causal = causal

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        return x.reshape(b, t, self.heads, d // self.heads).transpose(0, 2, 1, 3)

    def forward(
        self,
        x: Tensor,
        memory: Tensor | None = None,
        cache: KVCache | None = None,
        layer_index: int = 0,
    ) -> Tensor:
        source = memory if memory is not None else x
        q = self._split(self.q_proj(x))
        k = self._split(self.k_proj(source))
        v = self._split(self.v_proj(source))

        past = 0
        if cache is not None:
            past = cache.length(layer_index)
            kc, vc = cache.append(layer_index, k.data, v.data)
            k, v = Tensor(kc), Tensor(vc)

        b, h, tq, dh = q.shape
        tk = k.shape[2]
        kt = k.transpose(0, 1, 3, 2)
        scores = matmul(q, kt) * (1.0 / np.sqrt(dh))
        if self.causal and memory is None:
            # Query i (global position past + i) may see keys <= past + i.
            qpos = past + np.arange(tq)[:, None]
            kpos = np.arange(tk)[None, :]
            mask = np.where(kpos > qpos, -1e30, 0.0).astype(scores.data.dtype)
            scores = scores + Tensor(mask)
        weights = softmax(scores, axis=-1)
        out = matmul(weights, v)
        out = out.transpose(0, 2, 1, 3).reshape(b, tq, h * dh)
        return self.out_proj(out)

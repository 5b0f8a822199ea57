"""Token-level diffusion head: predicts the noise added to a clean acoustic
latent, conditioned on a sequence-model hidden state and a timestep.

Four residual MLP blocks; the conditioning signal (projected hidden state
plus sinusoidal timestep embedding) is injected into every block. The
learned unconditional embedding lives here too: during training it replaces
the hidden state for a fraction of examples so classifier-free guidance has
an unconditional branch to interpolate against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deskvoice.errors import ShapeError
from deskvoice.numcore.layers import LayerNorm, Linear, Module
from deskvoice.numcore.tensor import Tensor, silu
from deskvoice.diffusion.schedule import NoiseSchedule


def timestep_embedding(t: np.ndarray, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps: [B] -> [B, dim]."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / half)
    args = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1).astype(np.float32)


@dataclass(frozen=True)
class DiffusionHeadConfig:
    latent_dim: int = 16
    cond_dim: int = 128
    hidden: int = 128
    blocks: int = 4
    t_emb_dim: int = 64

    def to_flat(self, prefix: str = "diffusion.") -> dict:
        return {
            f"{prefix}latent_dim": self.latent_dim,
            f"{prefix}cond_dim": self.cond_dim,
            f"{prefix}hidden": self.hidden,
            f"{prefix}blocks": self.blocks,
            f"{prefix}t_emb_dim": self.t_emb_dim,
        }

    @classmethod
    def from_flat(cls, flat: dict, prefix: str = "diffusion.") -> "DiffusionHeadConfig":
        return cls(
            latent_dim=int(flat[f"{prefix}latent_dim"]),
            cond_dim=int(flat[f"{prefix}cond_dim"]),
            hidden=int(flat[f"{prefix}hidden"]),
            blocks=int(flat[f"{prefix}blocks"]),
            t_emb_dim=int(flat[f"{prefix}t_emb_dim"]),
        )


class _ResBlock(Module):
    def __init__(self, hidden: int, rng, dtype=np.float32):
        self.norm = LayerNorm(hidden, dtype=dtype)
        self.fc_in = Linear(hidden, hidden, rng, dtype=dtype)
        self.fc_out = Linear(hidden, hidden, rng, dtype=dtype)

    def forward(self, x: Tensor, cond: Tensor) -> Tensor:
        return x + self.fc_out(silu(self.fc_in(self.norm(x) + cond)))


class DiffusionHead(Module):
    def __init__(self, config: DiffusionHeadConfig, rng, dtype=np.float32):
        self.in_proj = Linear(config.latent_dim, config.hidden, rng, dtype=dtype)
        self.cond_proj = Linear(config.cond_dim, config.hidden, rng, dtype=dtype)
        self.t_proj = Linear(config.t_emb_dim, config.hidden, rng, dtype=dtype)
        self.res_blocks = [_ResBlock(config.hidden, rng, dtype) for _ in range(config.blocks)]
        self.out_norm = LayerNorm(config.hidden, dtype=dtype)
        self.out_proj = Linear(config.hidden, config.latent_dim, rng, dtype=dtype)
        self.uncond = Tensor(rng.normal(0.0, 0.02, size=config.cond_dim).astype(dtype), requires_grad=True)
        self.config = config

    def forward(self, z_t, t, cond) -> Tensor:
        """(z_t [B, D], t [B], cond [B, C]) -> predicted noise [B, D]."""
        z_t = z_t if isinstance(z_t, Tensor) else Tensor(np.asarray(z_t, dtype=np.float32))
        cond = cond if isinstance(cond, Tensor) else Tensor(np.asarray(cond, dtype=np.float32))
        if z_t.shape[-1] != self.config.latent_dim:
            raise ShapeError(f"z_t must be [B, {self.config.latent_dim}], got {z_t.shape}")
        if cond.shape[-1] != self.config.cond_dim:
            raise ShapeError(f"cond must be [B, {self.config.cond_dim}], got {cond.shape}")
        t_emb = Tensor(timestep_embedding(t, self.config.t_emb_dim).astype(z_t.data.dtype))
        c = self.cond_proj(cond) + self.t_proj(t_emb)
        x = self.in_proj(z_t)
        for block in self.res_blocks:
            x = block(x, c)
        return self.out_proj(self.out_norm(x))


def diffusion_loss(
    head,
    h,
    z0: np.ndarray,
    rng: np.random.Generator,
    schedule: NoiseSchedule,
    p_uncond: float = 0.1,
    uncond: Tensor | None = None,
) -> Tensor:
    """Noise-prediction objective: mean over the batch of ||eps - eps_hat||^2.

    Draws (t, eps) per example, noises z0 forward, and asks the head to
    recover eps. With probability ``p_uncond`` an example's conditioning is
    replaced by the learned unconditional embedding so the head also fits
    an unconditional branch (required for classifier-free guidance).
    """
    z0 = np.asarray(z0)
    if z0.ndim != 2:
        raise ShapeError(f"z0 must be [B, latent_dim], got {z0.shape}")
    batch, dim = z0.shape
    h = h if isinstance(h, Tensor) else Tensor(np.asarray(h, dtype=np.float32))
    t = rng.integers(1, schedule.T + 1, size=batch)
    eps = rng.standard_normal((batch, dim)).astype(z0.dtype)
    ab = schedule.alpha_bar[t].astype(np.float64)
    z_t = (np.sqrt(ab)[:, None] * z0 + np.sqrt(1.0 - ab)[:, None] * eps).astype(np.float32)

    cond = h
    if p_uncond > 0.0:
        drop = (rng.random(batch) < p_uncond).astype(np.float32)[:, None]
        if drop.any():
            null = uncond if uncond is not None else getattr(head, "uncond")
            null_row = null.reshape(1, null.shape[-1]) if isinstance(null, Tensor) else Tensor(
                np.asarray(null, dtype=np.float32).reshape(1, -1)
            )
            cond = h * Tensor(1.0 - drop) + null_row * Tensor(drop)

    eps_hat = head(z_t, t, cond)
    diff = eps_hat - Tensor(eps.astype(np.float32))
    return (diff * diff).sum() * (1.0 / batch)

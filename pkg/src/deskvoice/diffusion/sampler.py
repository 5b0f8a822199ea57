"""Classifier-free guidance and the few-step deterministic sampler.

The sampler is the second-order multistep solver in data-prediction form:
epsilon predictions are converted to clean-data predictions via
``x0 = (z_t - sigma_t * eps) / alpha_t`` and combined across steps with
log-SNR spacing. The first update (no history yet) and the final update to
t = 0 are first order; at t = 0 the update collapses to returning the data
prediction exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deskvoice.errors import ConfigError
from deskvoice.numcore.tensor import Tensor, no_grad
from deskvoice.diffusion.schedule import NoiseSchedule


@dataclass
class GuidanceConfig:
    """Guidance scale w, inference step count, optional explicit null embedding."""

    scale: float = 1.3
    steps: int = 10
    uncond_token: np.ndarray | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"denoising steps must be >= 1, got {self.steps}")
        if self.scale < 0:
            raise ConfigError(f"guidance scale must be >= 0, got {self.scale}")


def cfg_predict(head, z_t, t, h, w: float, uncond=None):
    """eps_uncond + w * (eps_cond - eps_uncond), evaluated elementwise.

    ``head`` is any callable (z_t, t, cond) -> noise prediction. ``h`` is
    [B, C]; the unconditional branch uses ``uncond`` (or ``head.uncond``)
    broadcast across the batch.
    """
    h_arr = h.numpy() if isinstance(h, Tensor) else np.asarray(h, dtype=np.float32)
    if h_arr.ndim == 1:
        h_arr = h_arr[None, :]
    null = uncond if uncond is not None else getattr(head, "uncond")
    null_arr = null.numpy() if isinstance(null, Tensor) else np.asarray(null, dtype=np.float32)
    null_batch = np.broadcast_to(null_arr.reshape(1, -1), h_arr.shape)

    eps_cond = head(z_t, t, h_arr)
    eps_uncond = head(z_t, t, null_batch)
    eps_cond = eps_cond.numpy() if isinstance(eps_cond, Tensor) else np.asarray(eps_cond)
    eps_uncond = eps_uncond.numpy() if isinstance(eps_uncond, Tensor) else np.asarray(eps_uncond)
    return eps_uncond + w * (eps_cond - eps_uncond)


def select_timesteps(schedule: NoiseSchedule, steps: int) -> np.ndarray:
    """Strictly decreasing timesteps from T to 0, uniform in log-SNR.

    ``steps`` solver updates need ``steps + 1`` grid points; the final point
    is t = 0, reached from the log-SNR-uniform grid over [T, 1].
    """
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    if steps == 1:
        return np.array([schedule.T, 0], dtype=np.int64)
    lam = schedule.log_snr(np.arange(1, schedule.T + 1))
    targets = np.linspace(lam[schedule.T - 1], lam[0], steps)
    chosen = []
    for target in targets:
        t = 1 + int(np.argmin(np.abs(lam - target)))
        if chosen and t >= chosen[-1]:
            t = chosen[-1] - 1
        if t < 1:
            break
        chosen.append(t)
    return np.array(chosen + [0], dtype=np.int64)


def sample(
    head,
    h,
    guidance: GuidanceConfig,
    rng: np.random.Generator,
    schedule: NoiseSchedule,
    uncond=None,
) -> np.ndarray:
    """Draw z_T ~ N(0, I) and integrate the probability-flow ODE to t = 0.

    Returns the clean-latent estimate with the same leading shape as ``h``
    ([D] for a single hidden state, [B, D] for a batch).
    """
    h_arr = h.numpy() if isinstance(h, Tensor) else np.asarray(h, dtype=np.float32)
    single = h_arr.ndim == 1
    if single:
        h_arr = h_arr[None, :]
    batch = h_arr.shape[0]
    dim = _head_latent_dim(head)
    timesteps = select_timesteps(schedule, guidance.steps)

    z = rng.standard_normal((batch, dim))
    x0_prev = None
    h_prev_step = None
    with no_grad():
        for i in range(1, len(timesteps)):
            t_from = int(timesteps[i - 1])
            t_to = int(timesteps[i])
            alpha_from = float(schedule.alpha(t_from))
            sigma_from = float(schedule.sigma(t_from))
            eps_hat = cfg_predict(head, z, np.full(batch, t_from), h_arr, guidance.scale, uncond)
            x0 = (z - sigma_from * np.asarray(eps_hat, dtype=np.float64)) / alpha_from

            if t_to == 0:
                z = x0
                break
            lam_from = float(schedule.log_snr(t_from))
            lam_to = float(schedule.log_snr(t_to))
            h_step = lam_to - lam_from
            if x0_prev is None:
                data_est = x0
            else:
                r = h_prev_step / h_step
                data_est = (1.0 + 1.0 / (2.0 * r)) * x0 - (1.0 / (2.0 * r)) * x0_prev
            alpha_to = float(schedule.alpha(t_to))
            sigma_to = float(schedule.sigma(t_to))
            z = (sigma_to / sigma_from) * z - alpha_to * np.expm1(-h_step) * data_est
            x0_prev = x0
            h_prev_step = h_step

    out = z.astype(np.float32)
    return out[0] if single else out


def _head_latent_dim(head) -> int:
    config = getattr(head, "config", None)
    if config is not None and hasattr(config, "latent_dim"):
        return config.latent_dim
    dim = getattr(head, "latent_dim", None)
    if dim is None:
        raise ConfigError("sampler needs head.config.latent_dim or head.latent_dim")
    return int(dim)

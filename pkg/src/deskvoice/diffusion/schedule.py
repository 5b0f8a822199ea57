"""Discretized diffusion noise schedule shared by training and sampling."""

from __future__ import annotations

import numpy as np

from deskvoice.errors import ConfigError, ContractError


class NoiseSchedule:
    """alpha_bar over T+1 steps: alpha_bar[0] = 1, strictly decreasing, in (0, 1]."""

    def __init__(self, alpha_bar: np.ndarray):
        alpha_bar = np.asarray(alpha_bar, dtype=np.float64)
        if alpha_bar.ndim != 1 or len(alpha_bar) < 2:
            raise ConfigError("alpha_bar must be a vector of at least 2 entries")
        if alpha_bar[0] != 1.0:
            raise ConfigError(f"alpha_bar[0] must be exactly 1, got {alpha_bar[0]}")
        if np.any(np.diff(alpha_bar) >= 0):
            raise ConfigError("alpha_bar must be strictly decreasing")
        if np.any(alpha_bar <= 0) or np.any(alpha_bar > 1):
            raise ConfigError("alpha_bar values must lie in (0, 1]")
        self.alpha_bar = alpha_bar
        self.T = len(alpha_bar) - 1

    @classmethod
    def cosine(cls, T: int = 1000, offset: float = 0.008, floor: float = 1e-7) -> "NoiseSchedule":
        """Squared-cosine schedule; well conditioned at few-step inference."""
        t = np.arange(T + 1, dtype=np.float64) / T
        f = np.cos((t + offset) / (1.0 + offset) * np.pi / 2.0) ** 2
        alpha_bar = np.clip(f / f[0], floor, 1.0)
        alpha_bar[0] = 1.0
        return cls(alpha_bar)

    def _check_t(self, t) -> np.ndarray:
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.T):
            raise ContractError(f"timestep out of range [0, {self.T}]: {t}")
        return t

    def alpha(self, t) -> np.ndarray:
        """sqrt(alpha_bar[t]) — the signal coefficient."""
        return np.sqrt(self.alpha_bar[self._check_t(t)])

    def sigma(self, t) -> np.ndarray:
        """sqrt(1 - alpha_bar[t]) — the noise coefficient."""
        return np.sqrt(1.0 - self.alpha_bar[self._check_t(t)])

    def log_snr(self, t) -> np.ndarray:
        """lambda(t) = log(alpha / sigma); +inf at t = 0."""
        t = self._check_t(t)
        with np.errstate(divide="ignore"):
            return np.log(self.alpha(t)) - np.log(self.sigma(t))


def forward_noising(z0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps."""
    z0 = np.asarray(z0)
    eps = np.asarray(eps)
    if z0.shape != eps.shape:
        raise ContractError(f"z0 and eps shapes differ: {z0.shape} vs {eps.shape}")
    schedule._check_t(t)
    ab = schedule.alpha_bar[t]
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps

"""Reconstruction losses: time-domain L1 plus multi-resolution STFT magnitude L2.

The STFT is expressed as framing followed by matmuls against fixed
Hann-windowed DFT matrices so gradients flow through the ordinary tensor
ops. Stands in for the adversarial codec objective at desk scale.
"""

from __future__ import annotations

import numpy as np

from deskvoice.numcore.functional import unfold_frames
from deskvoice.numcore.tensor import Tensor, absolute, sqrt

DEFAULT_RESOLUTIONS = ((64, 16), (128, 32), (256, 64))

_DFT_CACHE: dict[tuple[int, str], tuple[np.ndarray, np.ndarray]] = {}


def _dft_matrices(window: int, dtype) -> tuple[np.ndarray, np.ndarray]:
    key = (window, np.dtype(dtype).name)
    if key not in _DFT_CACHE:
        n = np.arange(window)[:, None]
        k = np.arange(window // 2 + 1)[None, :]
        hann = (0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window))[:, None]
        scale = 2.0 / window
        cos_m = (scale * hann * np.cos(2.0 * np.pi * n * k / window)).astype(dtype)
        sin_m = (-scale * hann * np.sin(2.0 * np.pi * n * k / window)).astype(dtype)
        _DFT_CACHE[key] = (cos_m, sin_m)
    return _DFT_CACHE[key]


def stft_magnitude(x: Tensor, window: int, hop: int) -> Tensor:
    """Hann-windowed magnitude spectrogram of x [B, T] -> [B, F, window//2 + 1]."""
    cos_m, sin_m = _dft_matrices(window, x.data.dtype)
    frames = unfold_frames(x, window, hop)
    re = frames @ Tensor(cos_m)
    im = frames @ Tensor(sin_m)
    return sqrt(re * re + im * im + 1e-9)


def multi_resolution_stft_loss(pred: Tensor, target: Tensor, resolutions=DEFAULT_RESOLUTIONS) -> Tensor:
    total = None
    used = 0
    for window, hop in resolutions:
        if pred.shape[-1] < window:
            continue
        diff = stft_magnitude(pred, window, hop) - stft_magnitude(target, window, hop)
        term = (diff * diff).mean()
        total = term if total is None else total + term
        used += 1
    if total is None:
        raise ValueError(f"signal too short ({pred.shape[-1]} samples) for every STFT resolution")
    return total * (1.0 / used)


def reconstruction_loss(
    pred: Tensor, target: Tensor, stft_weight: float = 1.0, resolutions=DEFAULT_RESOLUTIONS
) -> tuple[Tensor, dict[str, float]]:
    """L1 waveform distance plus weighted multi-resolution spectral distance."""
    l1 = absolute(pred - target).mean()
    spectral = multi_resolution_stft_loss(pred, target, resolutions)
    loss = l1 + stft_weight * spectral
    return loss, {"l1": l1.item(), "stft": spectral.item(), "total": loss.item()}

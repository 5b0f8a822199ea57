"""Reconstruction metrics and the independent speaker classifier.

The classifier deliberately shares nothing with the synthesis stack: it
works on numpy FFT band energies and nearest-centroid matching, so it can
serve as an oracle for speaker identity of synthesized audio.
"""

from __future__ import annotations

import numpy as np

from deskvoice.errors import DataError
from deskvoice.iocli.wav import AudioBuffer

SNR_CAP_DB = 99.0


def eval_metrics(reference: AudioBuffer, candidate: AudioBuffer) -> dict[str, float]:
    """SNR and SI-SNR in dB, both capped at 99 dB; inputs trimmed to equal length."""
    n = min(len(reference), len(candidate))
    if n == 0:
        raise DataError("cannot evaluate empty audio")
    ref = reference.samples[:n].astype(np.float64)
    cand = candidate.samples[:n].astype(np.float64)
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        raise DataError("reference signal has zero energy; SNR undefined")

    err = ref - cand
    err_energy = float(err @ err)
    snr = SNR_CAP_DB if err_energy == 0.0 else min(SNR_CAP_DB, 10.0 * np.log10(ref_energy / err_energy))

    # Scale-invariant variant: project the candidate onto the reference.
    scale = float(cand @ ref) / ref_energy
    target = scale * ref
    noise = cand - target
    target_energy = float(target @ target)
    noise_energy = float(noise @ noise)
    if noise_energy == 0.0:
        si_snr = SNR_CAP_DB
    elif target_energy == 0.0:
        si_snr = -SNR_CAP_DB
    else:
        si_snr = min(SNR_CAP_DB, 10.0 * np.log10(target_energy / noise_energy))
    return {"snr_db": float(snr), "si_snr_db": float(si_snr)}


def speaker_features(
    audio: AudioBuffer, bands: int = 32, fmin: float = 70.0, fmax: float = 3600.0
) -> np.ndarray:
    """Log band-energy summary of a clip (speaker timbre fingerprint).

    Bands are geometrically spaced so the fundamental-frequency region gets
    fine resolution relative to the formant region.
    """
    x = audio.samples.astype(np.float64)
    if len(x) == 0:
        raise DataError("cannot featurize empty audio")
    spectrum = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), d=1.0 / audio.sample_rate)
    edges = fmin * (fmax / fmin) ** (np.arange(bands + 1) / bands)
    feats = np.empty(bands)
    for b in range(bands):
        mask = (freqs >= edges[b]) & (freqs < edges[b + 1])
        feats[b] = np.log(spectrum[mask].sum() + 1e-10)
    return feats


class NearestCentroidSpeakerClassifier:
    """Nearest-centroid match over normalized band-energy features."""

    def __init__(self):
        self.centroids: dict[int, np.ndarray] = {}

    @staticmethod
    def _normalize(f: np.ndarray) -> np.ndarray:
        return (f - f.mean()) / (f.std() + 1e-9)

    def fit(self, clips: list[AudioBuffer], labels: list[int]) -> "NearestCentroidSpeakerClassifier":
        by_label: dict[int, list[np.ndarray]] = {}
        for clip, label in zip(clips, labels):
            by_label.setdefault(label, []).append(self._normalize(speaker_features(clip)))
        self.centroids = {label: np.mean(feats, axis=0) for label, feats in by_label.items()}
        return self

    def predict(self, clip: AudioBuffer) -> int:
        if not self.centroids:
            raise DataError("classifier has not been fitted")
        f = self._normalize(speaker_features(clip))
        best, best_d = None, np.inf
        for label, centroid in self.centroids.items():
            d = float(np.sum((f - centroid) ** 2))
            if d < best_d:
                best, best_d = label, d
        return int(best)

    def accuracy(self, clips: list[AudioBuffer], labels: list[int]) -> float:
        hits = sum(self.predict(c) == l for c, l in zip(clips, labels))
        return hits / len(labels)

"""Spectral Fréchet distance: a self-contained stand-in for FAD.

Clips are cut into Hann-windowed frames and summarised by log energies in
log-spaced frequency bands. Each clip set is fitted with a Gaussian over
all of its frames. Values are not comparable with VGGish-based FAD.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from ..core import AudioTensor
from ..errors import ConfigurationError


@dataclass(frozen=True)
class FeatureConfig:
    frame: int = 256
    hop: int = 128
    n_bands: int = 16
    f_min: float = 40.0
    log_eps: float = 1e-10
    cov_eps: float = 1e-6

    def as_dict(self) -> dict:
        return asdict(self)


def band_edges(sample_rate: int, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    return np.geomspace(config.f_min, sample_rate / 2, config.n_bands + 1)


def band_features(audio: AudioTensor, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """``(n_frames, n_bands)`` log band energies; channels are averaged first."""
    x = audio.samples.mean(axis=0)
    if x.size < config.frame:
        x = np.pad(x, (0, config.frame - x.size))
    n_frames = 1 + (x.size - config.frame) // config.hop
    idx = np.arange(config.frame)[None, :] + config.hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hanning(config.frame)
    power = np.abs(np.fft.rfft(frames, axis=-1)) ** 2
    freqs = np.fft.rfftfreq(config.frame, 1.0 / audio.sample_rate)
    edges = band_edges(audio.sample_rate, config)
    which = np.digitize(freqs, edges) - 1
    energy = np.zeros((n_frames, config.n_bands))
    for b in range(config.n_bands):
        sel = which == b
        if sel.any():
            energy[:, b] = power[:, sel].sum(axis=-1)
    return np.log(energy + config.log_eps)


def frechet_distance(mu_a: np.ndarray, cov_a: np.ndarray, mu_b: np.ndarray, cov_b: np.ndarray) -> float:
    diff = mu_a - mu_b
    covmean = linalg.sqrtm(cov_a @ cov_b)
    covmean = np.real(covmean)
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(covmean))
    return max(value, 0.0)


def _fit(clips: Sequence[AudioTensor], config: FeatureConfig) -> tuple[np.ndarray, np.ndarray]:
    if len(clips) < 2:
        raise ConfigurationError("each clip set needs at least two clips")
    feats = np.concatenate([band_features(c, config) for c in clips])
    cov = np.cov(feats, rowvar=False) + config.cov_eps * np.eye(feats.shape[1])
    return feats.mean(axis=0), cov


def spectral_frechet(
    set_a: Sequence[AudioTensor],
    set_b: Sequence[AudioTensor],
    config: FeatureConfig = FeatureConfig(),
) -> float:
    mu_a, cov_a = _fit(set_a, config)
    mu_b, cov_b = _fit(set_b, config)
    return frechet_distance(mu_a, cov_a, mu_b, cov_b)

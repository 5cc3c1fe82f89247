"""Toy conditional denoiser trained with denoising score matching.

The network is a small MLP mapping a conditioning embedding to a mean and a
log power spectrum sampled on ``n_bands`` evenly spaced frequencies. The
denoised estimate at noise level ``sigma`` is the spectral shrinkage

    x_hat = mu + irfft(P / (P + sigma^2) * rfft(x - mu))

so the network conditions on both the embedding and ``sigma``. The score
returned to samplers is ``(x_hat - x) / sigma^2``.

Training runs in torch; inference uses a numpy port of the same forward
pass so a loaded checkpoint needs only numpy.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..core import AudioTensor, NoiseSchedule
from ..errors import ConfigurationError, FormatError, TrainingDivergenceError
from .embedding import Embedding, LabelEncoder

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "gmsdi-denoiser"
CHECKPOINT_VERSION = 1
_PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3", "wm", "bm")


@dataclass
class TrainConfig:
    hidden: int = 64
    n_bands: int = 256
    lr: float = 3e-3
    batch_size: int = 16
    cond_dropout: float = 0.1
    init_log_power: float = -6.0
    # the mean only reaches the DC bin, where it trades off against DC power;
    # a slower mean head keeps it from wandering before that power settles
    mean_lr_scale: float = 0.05
    seed: int = 0


@dataclass
class SpectralDenoiser:
    """Callable score field ``(state, embedding, sigma) -> score``."""

    params: dict[str, np.ndarray]
    encoder: LabelEncoder
    config: TrainConfig = field(default_factory=TrainConfig)
    sigma_min: float = 1e-4
    sigma_max: float = 1.0
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        for name in _PARAM_NAMES:
            if name not in self.params:
                raise ConfigurationError(f"missing parameter {name}")
            self.params[name] = np.asarray(self.params[name], dtype=np.float64)
            self.params[name].setflags(write=False)
        self._spectra: dict[tuple, tuple[float, np.ndarray]] = {}

    @classmethod
    def initialize(cls, encoder: LabelEncoder, config: TrainConfig | None = None, **kw) -> "SpectralDenoiser":
        config = config or TrainConfig()
        rng = np.random.default_rng(config.seed)
        d, h, nb = encoder.dim, config.hidden, config.n_bands
        params = {
            "w1": rng.standard_normal((d, h)) * np.sqrt(2.0 / d),
            "b1": np.zeros(h),
            "w2": rng.standard_normal((h, h)) * np.sqrt(1.0 / h),
            "b2": np.zeros(h),
            "w3": rng.standard_normal((h, nb)) * 0.01,
            "b3": np.full(nb, config.init_log_power),
            "wm": np.zeros(h),
            "bm": np.zeros(()),
        }
        return cls(params, encoder, config, **kw)

    # -- forward ------------------------------------------------------------

    def head(self, vector: np.ndarray) -> tuple[float, np.ndarray]:
        """Return ``(mean, log_power_per_band)`` for one embedding vector."""
        p = self.params
        h = np.tanh(vector @ p["w1"] + p["b1"])
        h = np.tanh(h @ p["w2"] + p["b2"])
        return float(h @ p["wm"] + p["bm"]), h @ p["w3"] + p["b3"]

    def band_frequencies(self) -> np.ndarray:
        return np.linspace(0.0, 0.5, self.config.n_bands)

    def power_spectrum(self, embedding: Embedding, length: int) -> tuple[float, np.ndarray]:
        key = (embedding.key, embedding.vector.tobytes(), length)
        if key not in self._spectra:
            mean, logp = self.head(embedding.vector)
            freqs = np.fft.rfftfreq(length)
            power = np.exp(np.interp(freqs, self.band_frequencies(), logp))
            self._spectra[key] = (mean, power)
        return self._spectra[key]

    def denoise(self, state: AudioTensor, embedding: Embedding, sigma: float) -> AudioTensor:
        mean, power = self.power_spectrum(embedding, state.length)
        gain = power / (power + sigma**2)
        spec = np.fft.rfft(state.samples - mean, axis=-1, norm="ortho")
        x_hat = mean + np.fft.irfft(gain * spec, n=state.length, axis=-1, norm="ortho")
        return state.like(x_hat)

    def __call__(self, state: AudioTensor, embedding: Embedding, sigma: float) -> AudioTensor:
        if sigma <= 0:
            raise ConfigurationError("score is undefined at sigma == 0")
        x_hat = self.denoise(state, embedding, sigma)
        return state.like((x_hat.samples - state.samples) / sigma**2)

    # -- checkpoints ----------------------------------------------------------

    def meta(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "encoder": self.encoder.config(),
            "train_config": asdict(self.config),
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "history": list(self.history),
        }

    def save(self, path: str | Path) -> str:
        """Write an ``.npz`` checkpoint and return its sha256."""
        buf = io.BytesIO()
        np.savez(buf, config=np.array(json.dumps(self.meta(), sort_keys=True)), **self.params)
        data = buf.getvalue()
        Path(path).write_bytes(data)
        return hashlib.sha256(data).hexdigest()

    @classmethod
    def load(cls, path: str | Path) -> "SpectralDenoiser":
        path = Path(path)
        try:
            with np.load(path, allow_pickle=False) as z:
                meta = json.loads(str(z["config"]))
                params = {name: z[name] for name in _PARAM_NAMES}
        except FileNotFoundError:
            raise
        except (KeyError, ValueError, OSError) as exc:
            raise FormatError(f"unreadable checkpoint: {exc}", field="npz", path=str(path)) from exc
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise FormatError("not a denoiser checkpoint", field="format", path=str(path))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {meta.get('version')}", field="version", path=str(path))
        return cls(
            params,
            LabelEncoder.from_config(meta["encoder"]),
            TrainConfig(**meta["train_config"]),
            meta["sigma_min"],
            meta["sigma_max"],
            meta.get("history", []),
        )


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _torch_forward(torch, p, z, x, sigma, n_bands):
    # mirror of SpectralDenoiser.denoise, batched over clips
    h = torch.tanh(z @ p["w1"] + p["b1"])
    h = torch.tanh(h @ p["w2"] + p["b2"])
    logp = h @ p["w3"] + p["b3"]
    mean = (h @ p["wm"] + p["bm"])[:, None]
    length = x.shape[-1]
    freqs = torch.fft.rfftfreq(length, dtype=x.dtype)
    # linear interpolation onto rfft bins, same as np.interp on [0, 0.5]
    pos = freqs / 0.5 * (n_bands - 1)
    lo = torch.clamp(pos.floor().long(), max=n_bands - 2)
    frac = pos - lo
    logp_bins = logp[:, lo] * (1 - frac) + logp[:, lo + 1] * frac
    power = torch.exp(logp_bins)
    gain = power / (power + sigma[:, None] ** 2)
    spec = torch.fft.rfft(x - mean, dim=-1, norm="ortho")
    return mean + torch.fft.irfft(gain * spec, n=length, dim=-1, norm="ortho")


def train_denoiser(
    dataset: Iterable[tuple[AudioTensor, Sequence[str]]],
    schedule: NoiseSchedule,
    epochs: int,
    config: TrainConfig | None = None,
    encoder: LabelEncoder | None = None,
) -> SpectralDenoiser:
    """Fit the denoiser on (mixture, labels) pairs with sigma-weighted DSM.

    Noise levels are drawn log-uniformly over the schedule's range. Each
    clip's conditioning is replaced by the unconditional embedding with
    probability ``config.cond_dropout``. The per-epoch mean of
    ``sigma^2 * L_SM / length`` is kept in ``model.history``.
    """
    import torch

    config = config or TrainConfig()
    encoder = encoder or LabelEncoder()
    items = list(dataset)
    if not items:
        raise ConfigurationError("training dataset is empty")
    model = SpectralDenoiser.initialize(encoder, config, sigma_min=schedule.sigma_min, sigma_max=schedule.sigma_max)
    if epochs <= 0:
        return model

    lengths = {a.length for a, _ in items}
    if len(lengths) != 1 or any(a.channels != 1 for a, _ in items):
        raise ConfigurationError("training clips must be mono and share one length")
    data = torch.tensor(np.stack([a.samples[0] for a, _ in items]), dtype=torch.float64)
    cond = torch.tensor(np.stack([encoder.encode(labels).vector for _, labels in items]))
    uncond = torch.tensor(encoder.unconditional().vector)

    gen = torch.Generator().manual_seed(config.seed)
    params = {k: torch.tensor(v, requires_grad=True) for k, v in model.params.items()}
    mean_keys = ("wm", "bm")
    opt = torch.optim.Adam([
        {"params": [v for k, v in params.items() if k not in mean_keys]},
        {"params": [params[k] for k in mean_keys], "lr": config.lr * config.mean_lr_scale},
    ], lr=config.lr)
    log_lo, log_hi = np.log(schedule.sigma_min), np.log(schedule.sigma_max)
    n = data.shape[0]
    history = []
    for epoch in range(epochs):
        order = torch.randperm(n, generator=gen)
        total, count = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            x0 = data[idx]
            z = cond[idx].clone()
            drop = torch.rand(len(idx), generator=gen, dtype=torch.float64) < config.cond_dropout
            z[drop] = uncond
            sigma = torch.exp(log_lo + (log_hi - log_lo) * torch.rand(len(idx), generator=gen, dtype=torch.float64))
            xt = x0 + sigma[:, None] * torch.randn(x0.shape, generator=gen, dtype=torch.float64)
            x_hat = _torch_forward(torch, params, z, xt, sigma, config.n_bands)
            # sigma^2 * |score - target|^2 == |x_hat - x0|^2 / sigma^2
            per_clip = ((x_hat - x0) ** 2).mean(dim=-1) / sigma**2
            loss = per_clip.mean()
            if not torch.isfinite(loss):
                raise TrainingDivergenceError("non-finite training loss", step=epoch)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(per_clip.detach().sum())
            count += len(idx)
        history.append(total / count)
        log.debug("epoch %d loss %.5f", epoch, history[-1])

    trained = {k: v.detach().numpy().copy() for k, v in params.items()}
    return SpectralDenoiser(trained, encoder, config, schedule.sigma_min, schedule.sigma_max, history)

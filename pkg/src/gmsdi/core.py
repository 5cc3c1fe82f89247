"""Domain types, the noise ladder and mixture arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, NonFiniteError, ScheduleError

DEFAULT_SAMPLE_RATE = 8000


@dataclass(frozen=True, eq=False)
class AudioTensor:
    """Immutable multi-channel sample buffer.

    ``samples`` is stored as a read-only float64 array of shape
    ``(channels, length)``. One-dimensional input is treated as mono.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True, order="C")
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"samples must be (channels, length) with both >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("audio samples contain NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise ConfigurationError(f"sample_rate must be positive, got {self.sample_rate}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    @classmethod
    def zeros(cls, channels: int, length: int, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "AudioTensor":
        return cls(np.zeros((channels, length)), sample_rate)

    def like(self, samples: np.ndarray) -> "AudioTensor":
        """New tensor with this tensor's rate; ``samples`` must match its shape."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape != self.shape:
            raise DimensionError(f"shape {samples.shape} does not match {self.shape}")
        return AudioTensor(samples, self.sample_rate)

    def check_compatible(self, other: "AudioTensor") -> None:
        if self.shape != other.shape or self.sample_rate != other.sample_rate:
            raise DimensionError(
                f"incompatible tensors: {self.shape}@{self.sample_rate}Hz vs {other.shape}@{other.sample_rate}Hz"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.samples))

    def __add__(self, other: "AudioTensor") -> "AudioTensor":
        self.check_compatible(other)
        return AudioTensor(self.samples + other.samples, self.sample_rate)

    def __sub__(self, other: "AudioTensor") -> "AudioTensor":
        self.check_compatible(other)
        return AudioTensor(self.samples - other.samples, self.sample_rate)

    def __neg__(self) -> "AudioTensor":
        return AudioTensor(-self.samples, self.sample_rate)

    def __mul__(self, k: float) -> "AudioTensor":
        return AudioTensor(self.samples * float(k), self.sample_rate)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"AudioTensor(channels={self.channels}, length={self.length}, sample_rate={self.sample_rate})"


@dataclass(frozen=True)
class NoiseSchedule:
    sigma_min: float
    sigma_max: float
    rho: float
    n_steps: int
    sigmas: np.ndarray = field(repr=False, compare=False)

    def __iter__(self):
        return iter(self.sigmas)

    def transitions(self) -> list[tuple[float, float]]:
        """Consecutive (sigma_from, sigma_to) pairs, ``n_steps`` of them."""
        s = self.sigmas
        return [(float(s[i]), float(s[i + 1])) for i in range(len(s) - 1)]

    def as_dict(self) -> dict:
        return {"sigma_min": self.sigma_min, "sigma_max": self.sigma_max, "rho": self.rho, "n_steps": self.n_steps}


def build_sigma_schedule(sigma_min: float, sigma_max: float, rho: float = 1.0, n_steps: int = 600) -> NoiseSchedule:
    """Interpolate ``sigma**(1/rho)`` linearly from ``sigma_max`` to ``sigma_min``.

    Returns ``n_steps`` positive sigmas followed by a trailing zero. ``rho=1``
    gives uniform spacing.
    """
    if not (0 < sigma_min < sigma_max) or not np.isfinite(sigma_max):
        raise ScheduleError(f"need 0 < sigma_min < sigma_max, got ({sigma_min}, {sigma_max})")
    if rho <= 0:
        raise ScheduleError(f"rho must be positive, got {rho}")
    if int(n_steps) != n_steps or n_steps < 2:
        raise ScheduleError(f"n_steps must be an integer >= 2, got {n_steps}")
    n_steps = int(n_steps)
    ramp = np.arange(n_steps, dtype=np.float64) / (n_steps - 1)
    if rho == 1:
        body = sigma_max + ramp * (sigma_min - sigma_max)
    else:
        lo, hi = sigma_min ** (1.0 / rho), sigma_max ** (1.0 / rho)
        body = (hi + ramp * (lo - hi)) ** rho
    # pin the endpoints against pow() round-off
    body[0], body[-1] = sigma_max, sigma_min
    sigmas = np.append(body, 0.0)
    sigmas.setflags(write=False)
    return NoiseSchedule(float(sigma_min), float(sigma_max), float(rho), n_steps, sigmas)


@dataclass(frozen=True)
class Partition:
    """Disjoint, covering, non-empty index subsets of ``range(K)``."""

    subsets: tuple[tuple[int, ...], ...]

    def __init__(self, subsets: Iterable[Iterable[int]], k: int | None = None):
        subs = tuple(tuple(sorted(int(i) for i in s)) for s in subsets)
        object.__setattr__(self, "subsets", subs)
        self.validate(k)

    def validate(self, k: int | None = None) -> None:
        if not self.subsets:
            raise ConfigurationError("partition has no subsets")
        seen: set[int] = set()
        for s in self.subsets:
            if not s:
                raise ConfigurationError("partition contains an empty subset")
            if seen.intersection(s):
                raise ConfigurationError(f"partition subsets overlap at {sorted(seen.intersection(s))}")
            seen.update(s)
        k = len(seen) if k is None else k
        if seen != set(range(k)):
            raise ConfigurationError(f"partition does not cover range({k}): got {sorted(seen)}")

    @property
    def k(self) -> int:
        return sum(len(s) for s in self.subsets)

    @classmethod
    def singletons(cls, k: int) -> "Partition":
        return cls([[i] for i in range(k)])

    def __len__(self) -> int:
        return len(self.subsets)


def mix(sources: Sequence[AudioTensor]) -> AudioTensor:
    """Element-wise sum of sources sharing shape and sample rate."""
    if not sources:
        raise DimensionError("cannot mix an empty source list")
    first = sources[0]
    total = np.array(first.samples)
    for s in sources[1:]:
        first.check_compatible(s)
        total += s.samples
    return AudioTensor(total, first.sample_rate)

"""Ancestral Euler (with churn) and ancestral DPM2 integrators.

Every integrator works on a :class:`CoupledState`: a list of trajectories
advanced in lock-step down the sigma ladder. The score callback sees the
whole coupled state, which is how likelihood terms tie trajectories
together. Noise for trajectory ``stream`` at transition ``i`` comes from
``step_rng(seed, stream, i + 1)`` (key ``0`` is the initial draw), so
results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import AudioTensor, NoiseSchedule
from .errors import ConfigurationError, DivergenceError, ScheduleError

EULER_ANCESTRAL = "euler_ancestral"
ADPM2 = "adpm2"
KINDS = (EULER_ANCESTRAL, ADPM2)
MAX_CHURN = math.sqrt(2.0) - 1.0

ScoreCallback = Callable[[AudioTensor, float], AudioTensor]
SystemCallback = Callable[["CoupledState", float], Sequence[AudioTensor]]


@dataclass(frozen=True)
class IntegratorConfig:
    """Sampler settings. ``s_churn`` only affects ``euler_ancestral``.

    ``n_steps=None`` means "take it from the schedule"; the churn rule
    ``min(s_churn / n_steps, sqrt(2) - 1)`` needs it resolved.
    """

    kind: str = ADPM2
    n_steps: int | None = None
    s_churn: float = 0.0
    s_noise: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"sampler kind must be one of {KINDS}, got {self.kind!r}")
        if self.s_churn < 0:
            raise ConfigurationError("s_churn must be non-negative")
        if self.s_noise <= 0:
            raise ConfigurationError("s_noise must be positive")
        if self.n_steps is not None and self.n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")
        if self.rng_seed < 0:
            raise ConfigurationError("rng_seed must be non-negative")

    def churn(self) -> float:
        if self.kind != EULER_ANCESTRAL or self.s_churn == 0:
            return 0.0
        if self.n_steps is None:
            raise ConfigurationError("churn needs n_steps; resolve the config against a schedule first")
        return min(self.s_churn / self.n_steps, MAX_CHURN)

    def resolved(self, schedule: NoiseSchedule) -> "IntegratorConfig":
        if self.n_steps is None:
            return replace(self, n_steps=schedule.n_steps)
        if self.n_steps != schedule.n_steps:
            raise ScheduleError(f"config n_steps={self.n_steps} but schedule has {schedule.n_steps}")
        return self

    def as_dict(self) -> dict:
        return {"kind": self.kind, "n_steps": self.n_steps, "s_churn": self.s_churn,
                "s_noise": self.s_noise, "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class CoupledState:
    states: tuple[AudioTensor, ...]
    step_index: int = 0
    streams: tuple[int, ...] = field(default=())

    def __post_init__(self):
        states = tuple(self.states)
        if not states:
            raise ConfigurationError("coupled state needs at least one trajectory")
        for s in states[1:]:
            states[0].check_compatible(s)
        streams = tuple(self.streams) or tuple(range(len(states)))
        if len(streams) != len(states) or len(set(streams)) != len(streams):
            raise ConfigurationError("streams must be unique, one per trajectory")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "streams", streams)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> AudioTensor:
        return self.states[i]


def step_rng(seed: int, stream: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(key)]))


def initial_noise(like: AudioTensor, sigma_max: float, seed: int, stream: int) -> AudioTensor:
    """i.i.d. ``N(0, sigma_max^2)`` starting point drawn from key ``0``."""
    return like.like(sigma_max * step_rng(seed, stream, 0).standard_normal(like.shape))


def ancestral_variances(sigma_from: float, sigma_to: float) -> tuple[float, float]:
    """Split a transition into ``(sigma_down, sigma_up)``."""
    if not (sigma_from > sigma_to >= 0):
        raise ScheduleError(f"need sigma_from > sigma_to >= 0, got {sigma_from} -> {sigma_to}")
    if sigma_to == 0:
        return 0.0, 0.0
    sigma_up = min(sigma_to, math.sqrt(sigma_to**2 * (sigma_from**2 - sigma_to**2) / sigma_from**2))
    sigma_down = math.sqrt(max(sigma_to**2 - sigma_up**2, 0.0))
    return sigma_down, sigma_up


def _as_arrays(scores: Sequence[AudioTensor], n: int) -> list[np.ndarray]:
    if len(scores) != n:
        raise ConfigurationError(f"score callback returned {len(scores)} tensors for {n} trajectories")
    return [s.samples for s in scores]


def _wrap(xs: list[np.ndarray], template: CoupledState, step: int, index: int | None = None) -> CoupledState:
    """Check finiteness; errors name the transition ``step`` being taken."""
    for j, x in enumerate(xs):
        if not np.all(np.isfinite(x)):
            raise DivergenceError("non-finite state", step=step, trajectory=template.streams[j])
    rate = template.states[0].sample_rate
    return CoupledState(tuple(AudioTensor(x, rate) for x in xs), step if index is None else index, template.streams)


@np.errstate(over="ignore", invalid="ignore")  # divergence is reported by _wrap
def _system_step(
    cs: CoupledState,
    cb: SystemCallback,
    sigma_from: float,
    sigma_to: float,
    config: IntegratorConfig,
    rngs: Sequence[np.random.Generator],
    step: int,
) -> CoupledState:
    if not sigma_from > sigma_to:
        raise ScheduleError(f"sigma must decrease, got {sigma_from} -> {sigma_to}")
    n = len(cs)
    xs = [np.array(s.samples) for s in cs.states]

    if config.kind == EULER_ANCESTRAL:
        gamma = config.churn()
        sigma_hat = sigma_from * (1.0 + gamma)
        if gamma > 0:
            inflate = math.sqrt(sigma_hat**2 - sigma_from**2) * config.s_noise
            for j in range(n):
                xs[j] += inflate * rngs[j].standard_normal(xs[j].shape)
            churned = _wrap(xs, cs, step)
        else:
            churned = cs
        scores = _as_arrays(cb(churned, sigma_hat), n)
        down, up = ancestral_variances(sigma_hat, sigma_to)
        for j in range(n):
            d = -sigma_hat * scores[j]
            xs[j] += d * (down - sigma_hat)
    else:
        scores = _as_arrays(cb(cs, sigma_from), n)
        down, up = ancestral_variances(sigma_from, sigma_to)
        ds = [-sigma_from * s for s in scores]
        if down == 0:
            for j in range(n):
                xs[j] += ds[j] * (down - sigma_from)
        else:
            sigma_mid = math.exp(0.5 * (math.log(sigma_from) + math.log(down)))
            half = _wrap([xs[j] + ds[j] * (sigma_mid - sigma_from) for j in range(n)], cs, step)
            scores2 = _as_arrays(cb(half, sigma_mid), n)
            for j in range(n):
                xs[j] += -sigma_mid * scores2[j] * (down - sigma_from)

    if up > 0:
        for j in range(n):
            xs[j] += up * config.s_noise * rngs[j].standard_normal(xs[j].shape)
    return _wrap(xs, cs, step, step + 1)


def _single(cb: ScoreCallback) -> SystemCallback:
    return lambda cs, sigma: [cb(cs.states[0], sigma)]


def step_euler_ancestral(
    state: AudioTensor,
    score_cb: ScoreCallback,
    sigma_from: float,
    sigma_to: float,
    config: IntegratorConfig,
    rng: np.random.Generator,
    step_index: int = 0,
) -> AudioTensor:
    config = replace(config, kind=EULER_ANCESTRAL)
    out = _system_step(CoupledState((state,)), _single(score_cb), sigma_from, sigma_to, config, [rng], step_index)
    return out.states[0]


def step_adpm2(
    state: AudioTensor,
    score_cb: ScoreCallback,
    sigma_from: float,
    sigma_to: float,
    config: IntegratorConfig,
    rng: np.random.Generator,
    step_index: int = 0,
) -> AudioTensor:
    config = replace(config, kind=ADPM2)
    out = _system_step(CoupledState((state,)), _single(score_cb), sigma_from, sigma_to, config, [rng], step_index)
    return out.states[0]


def integrate(
    initial: CoupledState,
    score_system_cb: SystemCallback,
    schedule: NoiseSchedule,
    config: IntegratorConfig,
) -> CoupledState:
    """Advance every trajectory through the whole ladder."""
    config = config.resolved(schedule)
    cs = initial
    for i, (sigma_from, sigma_to) in enumerate(schedule.transitions()):
        rngs = [step_rng(config.rng_seed, stream, i + 1) for stream in cs.streams]
        cs = _system_step(cs, score_system_cb, sigma_from, sigma_to, config, rngs, i)
    return cs


def sample(
    score_cb: ScoreCallback,
    like: AudioTensor,
    schedule: NoiseSchedule,
    config: IntegratorConfig,
    stream: int = 0,
) -> AudioTensor:
    """Plain single-trajectory sampling from ``N(0, sigma_max^2)`` noise."""
    x0 = initial_noise(like, schedule.sigma_max, config.rng_seed, stream)
    out = integrate(CoupledState((x0,), streams=(stream,)), _single(score_cb), schedule, config)
    return out.states[0]

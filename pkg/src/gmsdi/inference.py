"""Compositional inference with a mixture-trained conditional score model.

Total and partial generation integrate source trajectories jointly with a
mixture trajectory; a Gaussian likelihood term ``(y - sum x) / gamma^2``
couples them. Separation and extraction instead constrain one signal to be
the observed mixture minus the others.

Trajectory streams: the mixture trajectory always uses noise stream ``0``;
source (or subset) ``k`` uses stream ``k + 1`` during generation and stream
``k`` during separation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .core import AudioTensor, NoiseSchedule, Partition, mix
from .errors import ConfigurationError, DimensionError
from .samplers import CoupledState, IntegratorConfig, initial_noise, integrate, sample, step_rng
from .score_model.embedding import Embedding, LabelEncoder, SourceSpec, combine
from .score_model.guidance import CfgConfig, cfg_score
from .score_model.kernel import perturb

INFINITE = math.inf
GIVEN_STREAM_BASE = 10_000

# Negative prompts used for the four-stem toy vocabulary.
TOY_NEGATIVES: dict[str, tuple[str, ...]] = {
    "bass": ("drums", "guitar", "piano"),
    "drums": ("bass",),
    "guitar": ("bass", "drums"),
    "piano": ("bass", "drums"),
}


class GmsdiWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SigmaScaled:
    """Likelihood variance that tracks the noise level: ``gamma^2 = c * sigma^2``."""

    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigurationError("sigma-scaled gamma needs c > 0")


@dataclass(frozen=True)
class MatchedCoupling:
    """``gamma^2 = n * sigma^2``, ``n`` = how many trajectories the coupling pulls.

    With this choice one denoising step moves the pulled trajectories just
    far enough to cancel the residual, so the coupling never overshoots,
    even on the coarse tail of a linear ladder. Wanted sources in partial
    generation count with weight ``|beta|``.
    """


GammaSpec = Union[float, SigmaScaled, MatchedCoupling]


def gamma2_at(spec: GammaSpec, sigma: float, residual_weight: float = 1.0) -> float:
    if isinstance(spec, SigmaScaled):
        return spec.c * sigma**2
    if isinstance(spec, MatchedCoupling):
        return residual_weight * sigma**2
    return float(spec)


def _scaled(spec: GammaSpec) -> bool:
    return isinstance(spec, (SigmaScaled, MatchedCoupling))


def _finite(spec: GammaSpec) -> bool:
    return _scaled(spec) or math.isfinite(spec)


def _pull_count(x_specs: Sequence[GammaSpec], y_spec: GammaSpec, x_weight: float = 1.0) -> float:
    n = x_weight * sum(_finite(sp) for sp in x_specs) + _finite(y_spec)
    return max(n, 1.0)


def _check_gamma(spec: GammaSpec) -> None:
    if not _scaled(spec) and not float(spec) > 0:
        raise ConfigurationError(f"gamma^2 must be positive or INFINITE, got {spec}")


@dataclass(frozen=True)
class GammaConfig:
    """Likelihood variances for source (or subset) and mixture updates.

    ``gamma_x`` is one spec shared by every source or a per-source tuple.
    ``math.inf`` disables a coupling term.
    """

    gamma_x: GammaSpec | tuple[GammaSpec, ...] = SigmaScaled(1.0)
    gamma_y: GammaSpec = SigmaScaled(1.0)

    def __post_init__(self):
        specs = self.gamma_x if isinstance(self.gamma_x, tuple) else (self.gamma_x,)
        for s in (*specs, self.gamma_y):
            _check_gamma(s)

    def x_spec(self, k: int) -> GammaSpec:
        if isinstance(self.gamma_x, tuple):
            if k >= len(self.gamma_x):
                raise ConfigurationError(f"no gamma_x given for source {k}")
            return self.gamma_x[k]
        return self.gamma_x

    @property
    def y_infinite(self) -> bool:
        return not _scaled(self.gamma_y) and math.isinf(self.gamma_y)

    def as_dict(self) -> dict:
        def enc(s):
            if isinstance(s, SigmaScaled):
                return {"sigma_scaled": s.c}
            if isinstance(s, MatchedCoupling):
                return "matched"
            return "infinite" if math.isinf(s) else float(s)

        gx = [enc(s) for s in self.gamma_x] if isinstance(self.gamma_x, tuple) else enc(self.gamma_x)
        return {"gamma_x": gx, "gamma_y": enc(self.gamma_y)}


@dataclass(frozen=True)
class PartialGenConfig:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ConfigurationError("alpha and beta must be finite")


@dataclass(frozen=True)
class SeparationTask:
    mixture: AudioTensor
    sources: tuple[SourceSpec, ...]
    constrained_index: int = -1

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        k = len(self.sources)
        if k < 2:
            raise ConfigurationError("separation needs at least two sources")
        idx = self.constrained_index
        if not -k <= idx < k:
            raise ConfigurationError(f"constrained_index {idx} out of range for {k} sources")
        object.__setattr__(self, "constrained_index", idx % k)


def likelihood_coupling(y_state: AudioTensor, x_states: Sequence[AudioTensor], gamma2: float) -> AudioTensor:
    """``(y - sum x) / gamma^2``: the source-side term. Negate for the mixture."""
    if not x_states:
        raise DimensionError("need at least one source state")
    for x in x_states:
        y_state.check_compatible(x)
    if math.isinf(gamma2):
        return y_state.like(np.zeros(y_state.shape))
    if not gamma2 > 0:
        raise ConfigurationError("gamma^2 must be positive")
    return y_state.like((y_state.samples - mix(x_states).samples) / gamma2)


def _coupling_array(residual: np.ndarray, gamma2: float) -> np.ndarray | None:
    if math.isinf(gamma2):
        return None
    return residual / gamma2


def _warn_if_stiff(gamma: GammaConfig, n_sources: int) -> None:
    specs = [gamma.x_spec(m) for m in range(n_sources)] + [gamma.gamma_y]
    pulled = sum(_finite(sp) for sp in specs)
    low = [sp.c for sp in specs if isinstance(sp, SigmaScaled) and sp.c < pulled]
    if low:
        warnings.warn(
            f"sigma-scaled gamma with c={min(low):g} below the {pulled} coupled trajectories: "
            "the residual can overshoot on coarse ladders (rho < 3); consider MatchedCoupling",
            GmsdiWarning,
            stacklevel=3,
        )


# -- total generation ----------------------------------------------------------


def generation_drifts(
    states: Sequence[AudioTensor],
    sigma: float,
    conds: Sequence[Embedding],
    mix_cond: Embedding,
    gamma: GammaConfig,
    model,
    cfg: CfgConfig | None,
) -> list[AudioTensor]:
    """Modified scores for ``[u_1..u_M, y]``: model score plus coupling."""
    *parts, y = states
    residual = y.samples - mix(parts).samples
    weight = _pull_count([gamma.x_spec(m) for m in range(len(parts))], gamma.gamma_y)
    out = []
    for m, (u, z) in enumerate(zip(parts, conds)):
        score = cfg_score(model, u, z, cfg, sigma)
        c = _coupling_array(residual, gamma2_at(gamma.x_spec(m), sigma, weight))
        out.append(score if c is None else score.like(score.samples + c))
    score = cfg_score(model, y, mix_cond, cfg, sigma)
    c = _coupling_array(residual, gamma2_at(gamma.gamma_y, sigma, weight))
    out.append(score if c is None else score.like(score.samples - c))
    return out


def _template(length: int, channels: int, sample_rate: int) -> AudioTensor:
    return AudioTensor.zeros(channels, length, sample_rate)


def total_generate_partition(
    partition: Partition,
    specs: Sequence[SourceSpec],
    gamma: GammaConfig,
    model,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    cfg: CfgConfig | None = None,
    *,
    length: int,
    channels: int = 1,
    sample_rate: int = 8000,
    encoder: LabelEncoder | None = None,
) -> tuple[list[AudioTensor], AudioTensor]:
    """Generate one signal per partition subset plus the mixture."""
    if not specs:
        raise ConfigurationError("need at least one source")
    partition.validate(len(specs))
    _warn_if_stiff(gamma, len(partition))
    conds = [combine([specs[j] for j in subset], encoder) for subset in partition.subsets]
    mix_cond = combine(specs, encoder)
    like = _template(length, channels, sample_rate)
    seed = sampler_config.rng_seed
    n = len(partition)
    init = [initial_noise(like, schedule.sigma_max, seed, m + 1) for m in range(n)]
    init.append(initial_noise(like, schedule.sigma_max, seed, 0))
    streams = tuple(range(1, n + 1)) + (0,)

    def system(cs: CoupledState, sigma: float):
        return generation_drifts(cs.states, sigma, conds, mix_cond, gamma, model, cfg)

    out = integrate(CoupledState(tuple(init), streams=streams), system, schedule, sampler_config)
    return list(out.states[:-1]), out.states[-1]


def total_generate(
    sources: Sequence[SourceSpec],
    gamma: GammaConfig,
    model,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    cfg: CfgConfig | None = None,
    **shape,
) -> tuple[list[AudioTensor], AudioTensor]:
    """Generate ``K`` coherent sources and their mixture."""
    return total_generate_partition(
        Partition.singletons(len(sources)), sources, gamma, model, schedule, sampler_config, cfg, **shape
    )


def conditional_sample(
    model,
    embedding: Embedding,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    cfg: CfgConfig | None = None,
    *,
    length: int,
    channels: int = 1,
    sample_rate: int = 8000,
    stream: int = 0,
) -> AudioTensor:
    """Plain guided sampling of one signal, no coupling."""
    like = _template(length, channels, sample_rate)
    return sample(lambda x, s: cfg_score(model, x, embedding, cfg, s), like, schedule, sampler_config, stream)


# -- partial generation ---------------------------------------------------------


def partial_generate(
    given: Sequence[tuple[AudioTensor, SourceSpec]],
    wanted: Sequence[SourceSpec],
    config: PartialGenConfig,
    gamma: GammaConfig,
    model,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    cfg: CfgConfig | None = None,
    *,
    encoder: LabelEncoder | None = None,
) -> list[AudioTensor]:
    """Generate ``wanted`` sources that accompany the clean ``given`` ones.

    Each given source enters every score evaluation as a fresh draw from
    the perturbation kernel at the current noise level.
    """
    if not wanted:
        raise ConfigurationError("partial generation needs at least one wanted source")
    if not given:
        raise ConfigurationError("partial generation needs at least one given source")
    if gamma.y_infinite:
        warnings.warn("gamma_y is infinite: the mixture cannot carry the given sources", GmsdiWarning, stacklevel=2)
    _warn_if_stiff(gamma, len(wanted))
    like = given[0][0]
    for x, _ in given:
        like.check_compatible(x)
    given_x = [x for x, _ in given]
    wanted_conds = [s.embedding for s in wanted]
    mix_cond = combine([s for _, s in given] + list(wanted), encoder)
    seed = sampler_config.rng_seed
    n = len(wanted)
    init = [initial_noise(like, schedule.sigma_max, seed, j + 1) for j in range(n)]
    init.append(initial_noise(like, schedule.sigma_max, seed, 0))
    streams = tuple(range(1, n + 1)) + (0,)
    calls = [0]
    weight = _pull_count([gamma.x_spec(j) for j in range(n)], gamma.gamma_y, abs(config.beta))

    def system(cs: CoupledState, sigma: float):
        calls[0] += 1
        noisy = [perturb(x, sigma, step_rng(seed, GIVEN_STREAM_BASE + i, calls[0])) for i, x in enumerate(given_x)]
        *xs, y = cs.states
        residual = y.samples - (config.alpha * mix(noisy).samples + config.beta * mix(xs).samples)
        out = []
        for j, (x, z) in enumerate(zip(xs, wanted_conds)):
            score = cfg_score(model, x, z, cfg, sigma)
            c = _coupling_array(residual, gamma2_at(gamma.x_spec(j), sigma, weight))
            out.append(score if c is None else score.like(score.samples + c))
        score = cfg_score(model, y, mix_cond, cfg, sigma)
        c = _coupling_array(residual, gamma2_at(gamma.gamma_y, sigma, weight))
        out.append(score if c is None else score.like(score.samples - c))
        return out

    out = integrate(CoupledState(tuple(init), streams=streams), system, schedule, sampler_config)
    return list(out.states[:-1])


# -- separation ----------------------------------------------------------------


def separator_drifts(
    states: Sequence[AudioTensor],
    sigma: float,
    task: SeparationTask,
    model,
    cfg: CfgConfig | None,
) -> list[AudioTensor]:
    """Drifts for the unconstrained sources, in source order."""
    free = [k for k in range(len(task.sources)) if k != task.constrained_index]
    residual = task.mixture - mix(states)
    constrained = cfg_score(model, residual, task.sources[task.constrained_index].embedding, cfg, sigma)
    return [cfg_score(model, x, task.sources[k].embedding, cfg, sigma) - constrained for x, k in zip(states, free)]


def separate(
    task: SeparationTask,
    model,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    cfg: CfgConfig | None = None,
) -> list[AudioTensor]:
    """Estimate every source; the constrained one is the mixture residual."""
    y0 = task.mixture
    c = task.constrained_index
    free = [k for k in range(len(task.sources)) if k != c]
    seed = sampler_config.rng_seed
    init = tuple(initial_noise(y0, schedule.sigma_max, seed, k) for k in free)
    out = integrate(
        CoupledState(init, streams=tuple(free)),
        lambda cs, sigma: separator_drifts(cs.states, sigma, task, model, cfg),
        schedule,
        sampler_config,
    )
    estimates: list[AudioTensor | None] = [None] * len(task.sources)
    for k, x in zip(free, out.states):
        estimates[k] = x
    estimates[c] = y0 - mix(list(out.states))
    return estimates


def extractor_drift(
    state: AudioTensor,
    sigma: float,
    mixture: AudioTensor,
    target: Embedding,
    complement: Embedding,
    model,
    cfg: CfgConfig | None,
) -> AudioTensor:
    return cfg_score(model, state, target, cfg, sigma) - cfg_score(model, mixture - state, complement, cfg, sigma)


def extract(
    mixture: AudioTensor,
    target: SourceSpec,
    complement_labels: Sequence[str],
    model,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    cfg: CfgConfig | None = None,
    *,
    encoder: LabelEncoder | None = None,
    stream: int = 0,
) -> AudioTensor:
    """Extract one source by constraining its complement to ``mixture - x``."""
    if not complement_labels:
        raise ConfigurationError("extract needs at least one complement label")
    complement = SourceSpec.from_labels(list(complement_labels), encoder).embedding
    x0 = initial_noise(mixture, schedule.sigma_max, sampler_config.rng_seed, stream)
    out = integrate(
        CoupledState((x0,), streams=(stream,)),
        lambda cs, sigma: [extractor_drift(cs.states[0], sigma, mixture, target.embedding, complement, model, cfg)],
        schedule,
        sampler_config,
    )
    return out.states[0]


# -- selection -----------------------------------------------------------------


def rejection_by_norm(candidates: Sequence[AudioTensor]) -> tuple[int, AudioTensor]:
    """Pick the candidate with the largest L2 norm (first on ties)."""
    if not candidates:
        raise ConfigurationError("no candidates to select from")
    norms = [c.norm() for c in candidates]
    idx = int(np.argmax(norms))
    return idx, candidates[idx]


def negative_prompts(
    encoder: LabelEncoder,
    labels: Sequence[str] | None = None,
    mapping: Mapping[str, Sequence[str]] = TOY_NEGATIVES,
) -> dict[str, Embedding]:
    """Negative reference embeddings keyed by the conditioning label."""
    chosen = mapping.keys() if labels is None else [l.lower() for l in labels]
    return {label: encoder.negative(list(mapping[label])) for label in chosen if label in mapping}

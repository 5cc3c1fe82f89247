"""Gaussian perturbation kernel, closed-form score oracles and the DSM loss."""

from __future__ import annotations

from typing import Callable, Mapping, Protocol, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from ..core import AudioTensor
from ..errors import ConfigurationError, DegenerateDensityError
from .embedding import Embedding

Mean = Union[float, AudioTensor]


class ScoreField(Protocol):
    """``(state, embedding, sigma) -> score`` with the state's shape."""

    def __call__(self, state: AudioTensor, embedding: Embedding, sigma: float) -> AudioTensor: ...


def _mean_array(mu: Mean, like: AudioTensor) -> np.ndarray:
    if isinstance(mu, AudioTensor):
        like.check_compatible(mu)
        return mu.samples
    return np.full(like.shape, float(mu))


def perturb(x0: AudioTensor, sigma: float, rng: np.random.Generator) -> AudioTensor:
    """Draw ``x0 + sigma * eps`` with i.i.d. standard normal ``eps``."""
    if sigma < 0:
        raise ConfigurationError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return x0
    return x0.like(x0.samples + sigma * rng.standard_normal(x0.shape))


def analytic_gaussian_score(x: AudioTensor, mu: Mean, s2: float, sigma: float) -> AudioTensor:
    var = s2 + sigma**2
    if var <= 0:
        raise DegenerateDensityError("s2 + sigma^2 must be positive")
    return x.like((_mean_array(mu, x) - x.samples) / var)


def analytic_gmm_score(
    x: AudioTensor, components: Sequence[tuple[float, Mean, float]], sigma: float
) -> AudioTensor:
    """Score of ``sum_i w_i N(mu_i, (s2_i + sigma^2) I)`` over the whole tensor."""
    if not components:
        raise ConfigurationError("GMM needs at least one component")
    weights = np.array([c[0] for c in components], dtype=np.float64)
    if np.any(weights <= 0) or not np.isclose(weights.sum(), 1.0, rtol=0, atol=1e-9):
        raise ConfigurationError("GMM weights must be positive and sum to 1")
    n = x.samples.size
    logp, scores = [], []
    for w, mu, s2 in components:
        var = s2 + sigma**2
        if var <= 0:
            raise DegenerateDensityError("component variance must be positive")
        diff = _mean_array(mu, x) - x.samples
        logp.append(np.log(w) - 0.5 * np.sum(diff**2) / var - 0.5 * n * np.log(2 * np.pi * var))
        scores.append(diff / var)
    logp = np.array(logp)
    resp = np.exp(logp - logsumexp(logp))
    return x.like(np.tensordot(resp, np.stack(scores), axes=1))


def gaussian_log_density(x: AudioTensor, mu: Mean, var: float) -> float:
    diff = x.samples - _mean_array(mu, x)
    return float(-0.5 * np.sum(diff**2) / var - 0.5 * diff.size * np.log(2 * np.pi * var))


def gmm_log_density(x: AudioTensor, components: Sequence[tuple[float, Mean, float]], sigma: float) -> float:
    terms = [np.log(w) + gaussian_log_density(x, mu, s2 + sigma**2) for w, mu, s2 in components]
    return float(logsumexp(terms))


class GaussianPriorField:
    """Exact score field for embedding-keyed Gaussian (or GMM) clean-data laws.

    ``priors`` maps an embedding key to ``(mu, s2)`` or to a GMM component
    list. Keys missing from the table fall back to ``default`` if given.
    Scores are element-wise for Gaussian entries, so one tensor can hold
    many independent one-dimensional runs.
    """

    def __init__(self, priors: Mapping[str, object], default: object | None = None):
        self.priors = dict(priors)
        self.default = default

    def _lookup(self, key: str):
        if key in self.priors:
            return self.priors[key]
        if self.default is None:
            raise ConfigurationError(f"no prior registered for embedding {key!r}")
        return self.default

    def __call__(self, state: AudioTensor, embedding: Embedding, sigma: float) -> AudioTensor:
        prior = self._lookup(embedding.key)
        if isinstance(prior, tuple) and len(prior) == 2:
            return analytic_gaussian_score(state, prior[0], prior[1], sigma)
        return analytic_gmm_score(state, prior, sigma)


def dsm_loss(
    model: Callable[[AudioTensor, Embedding, float], AudioTensor],
    x0: AudioTensor,
    z: Embedding,
    sigma: float,
    rng: np.random.Generator,
) -> float:
    """Squared error between the model score and ``(x0 - x_t) / sigma^2``."""
    if sigma <= 0:
        raise ConfigurationError("dsm_loss needs sigma > 0")
    xt = perturb(x0, sigma, rng)
    target = (x0.samples - xt.samples) / sigma**2
    return float(np.sum((model(xt, z, sigma).samples - target) ** 2))

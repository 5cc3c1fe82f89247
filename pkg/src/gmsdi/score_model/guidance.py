"""Classifier-free guidance with optional per-source negative references."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..core import AudioTensor
from ..errors import ConfigurationError
from .embedding import NEGATIVE, UNCONDITIONAL, Embedding

# Table 1 embedding-scale grid
W_GRID = (3.0, 7.5, 15.0, 24.0)


@dataclass(frozen=True)
class CfgConfig:
    """Guidance scale ``w`` and reference embedding.

    ``negatives`` optionally overrides the reference for specific
    conditioning keys (canonical label strings), e.g. ``{"bass":
    encoder.negative(["drums", "guitar", "piano"])}``.
    """

    w: float
    reference: Embedding
    negatives: Mapping[str, Embedding] = field(default_factory=dict)

    def __post_init__(self):
        refs = [self.reference, *self.negatives.values()]
        for ref in refs:
            if ref.kind not in (UNCONDITIONAL, NEGATIVE):
                raise ConfigurationError(f"guidance reference must be unconditional or negative, got {ref.kind}")

    def reference_for(self, z: Embedding) -> Embedding:
        return self.negatives.get(z.key, self.reference)

    def with_w(self, w: float) -> "CfgConfig":
        return CfgConfig(w, self.reference, self.negatives)


def cfg_score(model, state: AudioTensor, z: Embedding, cfg: CfgConfig | None, sigma: float) -> AudioTensor:
    """``S(x, z) + w * (S(x, z) - S(x, ref))``; ``w == 0`` skips the reference call."""
    cond = model(state, z, sigma)
    if cfg is None or cfg.w == 0:
        return cond
    ref = model(state, cfg.reference_for(z), sigma)
    return cond.like(cond.samples + cfg.w * (cond.samples - ref.samples))

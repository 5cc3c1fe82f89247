"""Compositional inference (generation, accompaniment, separation) with a
mixture-trained, label-conditioned score model."""

__version__ = "0.1.0"

from .core import AudioTensor, NoiseSchedule, Partition, build_sigma_schedule, mix
from .errors import GmsdiError
from .inference import (
    INFINITE,
    GammaConfig,
    MatchedCoupling,
    PartialGenConfig,
    SeparationTask,
    SigmaScaled,
    extract,
    partial_generate,
    separate,
    total_generate,
    total_generate_partition,
)
from .samplers import ADPM2, EULER_ANCESTRAL, IntegratorConfig

__all__ = [
    "ADPM2",
    "EULER_ANCESTRAL",
    "INFINITE",
    "AudioTensor",
    "GammaConfig",
    "GmsdiError",
    "IntegratorConfig",
    "MatchedCoupling",
    "NoiseSchedule",
    "PartialGenConfig",
    "Partition",
    "SeparationTask",
    "SigmaScaled",
    "build_sigma_schedule",
    "extract",
    "mix",
    "partial_generate",
    "separate",
    "total_generate",
    "total_generate_partition",
]

"""Scale-invariant SDR and per-source separation reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..core import AudioTensor
from ..errors import UndefinedMetricError

SI_SDR_CAP = 100.0
_SILENCE = 1e-20


def si_sdr(estimate: AudioTensor, reference: AudioTensor) -> float:
    """SI-SDR in dB, clamped to ``[-100, 100]``."""
    estimate.check_compatible(reference)
    e = estimate.samples.ravel()
    r = reference.samples.ravel()
    ref_energy = float(np.dot(r, r))
    if ref_energy <= _SILENCE:
        raise UndefinedMetricError("reference is silent")
    alpha = float(np.dot(e, r)) / ref_energy
    target = alpha * r
    signal = float(np.dot(target, target))
    err = target - e
    noise = float(np.dot(err, err))
    if noise == 0.0 or signal >= noise * 10 ** (SI_SDR_CAP / 10):
        return SI_SDR_CAP
    if signal <= noise * 10 ** (-SI_SDR_CAP / 10):
        return -SI_SDR_CAP
    return 10.0 * np.log10(signal / noise)


def si_sdr_improvement(estimate: AudioTensor, reference: AudioTensor, mixture: AudioTensor) -> float:
    return si_sdr(estimate, reference) - si_sdr(mixture, reference)


@dataclass
class SeparationReport:
    per_source: dict[str, float]
    manifest: str | None = None
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.per_source.values()))) if self.per_source else float("nan")

    def as_dict(self) -> dict:
        return {"per_source_si_sdr_i": dict(self.per_source), "mean_si_sdr_i": self.mean,
                "counts": dict(self.counts), "run_manifest": self.manifest}


def separation_report(
    results: Sequence[Mapping[str, float]],
    manifest: str | None = None,
) -> SeparationReport:
    """Average per-label SI-SDRi over clips; ``results`` holds one dict per clip."""
    acc: dict[str, list[float]] = {}
    for row in results:
        for label, value in row.items():
            acc.setdefault(label, []).append(value)
    return SeparationReport(
        {k: float(np.mean(v)) for k, v in sorted(acc.items())},
        manifest,
        {k: len(v) for k, v in sorted(acc.items())},
    )

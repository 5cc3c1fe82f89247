"""Grid search over the guidance scale for separator and extractor variants.

A variant is ``"extractor"`` or ``"separator:<label>"`` (the constrained
source). Every cell holds per-source mean SI-SDRi and their mean ("all").
Task failures are recorded in the cell; a cell is invalid when fewer than
half of its applicable tasks completed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..core import AudioTensor, NoiseSchedule
from ..data_io.synth import DatasetManifest, evaluation_clips
from ..errors import ConfigurationError, GmsdiError
from ..inference import SeparationTask, extract, separate
from ..samplers import IntegratorConfig
from ..score_model.embedding import Embedding, LabelEncoder, SourceSpec
from ..score_model.guidance import W_GRID, CfgConfig
from .metrics import si_sdr_improvement

log = logging.getLogger(__name__)

EXTRACTOR = "extractor"
SEPARATOR = "separator"
GRID_FORMAT = "gmsdi-gridsearch"
GRID_VERSION = 1
MIN_COMPLETED = 0.5


@dataclass(frozen=True)
class EvalTask:
    id: str
    mixture: AudioTensor
    labels: tuple[str, ...]
    stems: Mapping[str, AudioTensor]


def tasks_from_manifest(manifest: DatasetManifest, limit: int | None = None) -> list[EvalTask]:
    tasks = []
    for clip, y, stems in evaluation_clips(manifest):
        tasks.append(EvalTask(clip.id, y, tuple(clip.labels), stems))
        if limit is not None and len(tasks) >= limit:
            break
    return tasks


def parse_variant(variant: str) -> tuple[str, str | None]:
    if variant == EXTRACTOR:
        return EXTRACTOR, None
    kind, _, label = variant.partition(":")
    if kind != SEPARATOR or not label:
        raise ConfigurationError(f"unknown variant {variant!r}; use 'extractor' or 'separator:<label>'")
    return SEPARATOR, label.strip().lower()


def default_variants(labels: Sequence[str]) -> list[str]:
    return [f"{SEPARATOR}:{label}" for label in labels] + [EXTRACTOR]


@dataclass
class GridCell:
    variant: str
    w: float
    per_source: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    attempted: int = 0
    completed: int = 0
    failures: list[dict] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.attempted > 0 and self.completed >= MIN_COMPLETED * self.attempted

    @property
    def all(self) -> float:
        if not self.valid or not self.per_source:
            return math.nan
        return float(np.mean(list(self.per_source.values())))

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "w": self.w,
            "per_source": dict(self.per_source),
            "counts": dict(self.counts),
            "all": None if math.isnan(self.all) else self.all,
            "attempted": self.attempted,
            "completed": self.completed,
            "valid": self.valid,
            "failures": list(self.failures),
        }


@dataclass
class GridReport:
    w_grid: tuple[float, ...]
    variants: tuple[str, ...]
    cells: list[GridCell]
    settings: dict = field(default_factory=dict)

    def cell(self, variant: str, w: float) -> GridCell:
        for c in self.cells:
            if c.variant == variant and c.w == w:
                return c
        raise KeyError((variant, w))

    @property
    def labels(self) -> list[str]:
        return sorted({label for c in self.cells for label in c.per_source})

    def best(self, kind: str) -> GridCell | None:
        pool = [c for c in self.cells if parse_variant(c.variant)[0] == kind and c.valid and c.per_source]
        return max(pool, key=lambda c: c.all, default=None)

    def ensemble(self) -> dict[str, float] | None:
        """Per-source maximum of the best separator cell and the best extractor cell."""
        sep, ext = self.best(SEPARATOR), self.best(EXTRACTOR)
        if sep is None or ext is None:
            return None
        labels = sorted(set(sep.per_source) | set(ext.per_source))
        out = {l: max(sep.per_source.get(l, -math.inf), ext.per_source.get(l, -math.inf)) for l in labels}
        out["all"] = float(np.mean([out[l] for l in labels]))
        return out

    def as_dict(self) -> dict:
        sep, ext = self.best(SEPARATOR), self.best(EXTRACTOR)
        return {
            "format": GRID_FORMAT,
            "version": GRID_VERSION,
            "w_grid": list(self.w_grid),
            "variants": list(self.variants),
            "settings": dict(self.settings),
            "cells": [c.as_dict() for c in self.cells],
            "best_separator": None if sep is None else {"variant": sep.variant, "w": sep.w},
            "best_extractor": None if ext is None else {"variant": ext.variant, "w": ext.w},
            "ensemble": self.ensemble(),
        }


def _fmt(v: float | None) -> str:
    return "   n/a" if v is None or math.isnan(v) else f"{v:6.2f}"


def format_grid_table(report: GridReport) -> str:
    """Variants as rows, w as columns (the "all" mean), then per-source best rows."""
    head = f"{'variant':<22}" + "".join(f"  w={w:<5g}" for w in report.w_grid)
    lines = [head, "-" * len(head)]
    for v in report.variants:
        cells = []
        for w in report.w_grid:
            c = report.cell(v, w)
            cells.append(f"  {_fmt(c.all)}" + ("*" if not c.valid else " "))
        lines.append(f"{v:<22}" + "".join(cells))
    lines.append("")
    labels = report.labels
    lines.append(f"{'method':<22}" + "".join(f"{l:>9}" for l in labels) + f"{'all':>9}")
    for name, cell in (("best separator", report.best(SEPARATOR)), ("best extractor", report.best(EXTRACTOR))):
        if cell is not None:
            row = "".join(f"{_fmt(cell.per_source.get(l)):>9}" for l in labels)
            lines.append(f"{name:<22}{row}{_fmt(cell.all):>9}")
    ens = report.ensemble()
    if ens is not None:
        row = "".join(f"{_fmt(ens.get(l)):>9}" for l in labels)
        lines.append(f"{'ensemble':<22}{row}{_fmt(ens['all']):>9}")
    lines.append("(* invalid: fewer than half of the tasks completed)")
    return "\n".join(lines) + "\n"


def run_variant(
    task: EvalTask,
    variant: str,
    cfg: CfgConfig | None,
    model,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    encoder: LabelEncoder,
) -> dict[str, float] | None:
    """SI-SDRi per source of ``task``; ``None`` when the variant does not apply."""
    kind, constrained = parse_variant(variant)
    specs = [SourceSpec.from_labels([l], encoder) for l in task.labels]
    if kind == SEPARATOR:
        if constrained not in task.labels:
            return None
        st = SeparationTask(task.mixture, specs, task.labels.index(constrained))
        estimates = separate(st, model, schedule, sampler_config, cfg)
    else:
        estimates = [
            extract(task.mixture, spec, [l for l in task.labels if l != spec.labels[0]], model, schedule,
                    sampler_config, cfg, encoder=encoder, stream=k)
            for k, spec in enumerate(specs)
        ]
    return {l: si_sdr_improvement(e, task.stems[l], task.mixture) for l, e in zip(task.labels, estimates)}


def grid_search_w(
    tasks: Sequence[EvalTask],
    w_grid: Sequence[float] = W_GRID,
    variants: Sequence[str] | None = None,
    *,
    model,
    schedule: NoiseSchedule,
    sampler_config: IntegratorConfig,
    encoder: LabelEncoder | None = None,
    reference: Embedding | None = None,
    negatives: Mapping[str, Embedding] | None = None,
    extractor_negatives: Mapping[str, Embedding] | None = None,
    progress: Callable[[str], None] | None = None,
) -> GridReport:
    """Mean SI-SDRi for every (variant, w) pair.

    ``negatives`` are reference overrides for separator variants and
    ``extractor_negatives`` for the extractor.
    """
    if not tasks or not w_grid:
        raise ConfigurationError("grid search needs at least one task and one w")
    encoder = encoder or model.encoder
    if variants is None:
        variants = default_variants(sorted({l for t in tasks for l in t.labels}))
    for v in variants:
        parse_variant(v)
    reference = reference or encoder.unconditional()
    cells = []
    for variant in variants:
        for w in w_grid:
            negs = extractor_negatives if parse_variant(variant)[0] == EXTRACTOR else negatives
            cfg = CfgConfig(float(w), reference, dict(negs or {}))
            cell = GridCell(variant, float(w))
            acc: dict[str, list[float]] = {}
            for task in tasks:
                try:
                    scores = run_variant(task, variant, cfg, model, schedule, sampler_config, encoder)
                except GmsdiError as exc:
                    cell.attempted += 1
                    cell.failures.append({"task": task.id, "category": exc.category, "message": str(exc)})
                    log.warning("%s w=%g task %s failed: %s", variant, w, task.id, exc)
                    continue
                if scores is None:
                    continue
                cell.attempted += 1
                cell.completed += 1
                for label, value in scores.items():
                    acc.setdefault(label, []).append(value)
            cell.per_source = {l: float(np.mean(v)) for l, v in sorted(acc.items())}
            cell.counts = {l: len(v) for l, v in sorted(acc.items())}
            cells.append(cell)
            if progress:
                progress(f"{variant} w={w:g}: all={_fmt(cell.all).strip()} ({cell.completed}/{cell.attempted})")
    return GridReport(tuple(float(w) for w in w_grid), tuple(variants), cells)

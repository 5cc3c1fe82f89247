"""Report rendering: versioned JSON, aligned text tables, PNG figures."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from ..data_io.synth import DatasetManifest, evaluation_clips
from ..data_io.wav import wav_read
from ..errors import FormatError
from .baselines import bandpass_separate
from .gridsearch import GridReport
from .metrics import SeparationReport, separation_report, si_sdr_improvement

EVAL_FORMAT = "gmsdi-eval"
EVAL_VERSION = 1


def write_json(path: str | Path, data: Mapping) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def evaluate_estimates(
    estimates_dir: str | Path,
    manifest: DatasetManifest,
    run_manifest: str | None = None,
) -> tuple[SeparationReport, SeparationReport, list[dict]]:
    """Score ``<estimates_dir>/<clip id>/<label>.wav`` against the manifest stems.

    Returns the estimate report, the band-pass oracle report on the same
    clips, and one row per (clip, label).
    """
    root = Path(estimates_dir)
    ours, oracle, rows = [], [], []
    for clip, y, stems in evaluation_clips(manifest):
        est_row, bp_row = {}, {}
        bp = dict(zip(clip.labels, bandpass_separate(y, clip.labels)))
        for label in clip.labels:
            path = root / clip.id / f"{label}.wav"
            if not path.is_file():
                raise FormatError(f"missing estimate for {clip.id}/{label}", field="path", path=str(path))
            est = wav_read(path)
            est_row[label] = si_sdr_improvement(est, stems[label], y)
            bp_row[label] = si_sdr_improvement(bp[label], stems[label], y)
            rows.append({"clip": clip.id, "label": label, "si_sdr_i": est_row[label], "bandpass_si_sdr_i": bp_row[label]})
        ours.append(est_row)
        oracle.append(bp_row)
    return separation_report(ours, run_manifest), separation_report(oracle, run_manifest), rows


def eval_document(ours: SeparationReport, oracle: SeparationReport, rows: list[dict]) -> dict:
    return {
        "format": EVAL_FORMAT,
        "version": EVAL_VERSION,
        "estimates": ours.as_dict(),
        "bandpass_oracle": oracle.as_dict(),
        "rows": rows,
    }


def format_separation_table(reports: Mapping[str, SeparationReport]) -> str:
    labels = sorted({l for r in reports.values() for l in r.per_source})
    head = f"{'method':<18}" + "".join(f"{l:>9}" for l in labels) + f"{'mean':>9}"
    lines = [head, "-" * len(head)]
    for name, rep in reports.items():
        cells = "".join(f"{rep.per_source[l]:9.2f}" if l in rep.per_source else f"{'n/a':>9}" for l in labels)
        lines.append(f"{name:<18}{cells}{rep.mean:9.2f}")
    return "\n".join(lines) + "\n"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_separation(reports: Mapping[str, SeparationReport], path: str | Path) -> Path:
    """Grouped bars of per-source SI-SDRi, one group per label."""
    plt = _pyplot()
    labels = sorted({l for r in reports.values() for l in r.per_source})
    x = np.arange(len(labels))
    width = 0.8 / max(len(reports), 1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for i, (name, rep) in enumerate(reports.items()):
        vals = [rep.per_source.get(l, np.nan) for l in labels]
        ax.bar(x + i * width - 0.4 + width / 2, vals, width, label=name)
    ax.set_xticks(x, labels)
    ax.set_ylabel("SI-SDRi (dB)")
    ax.axhline(0, color="black", lw=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_grid(report: GridReport, path: str | Path) -> Path:
    """Heat map of the mean SI-SDRi per (variant, w); invalid cells left blank."""
    plt = _pyplot()
    data = np.array([[report.cell(v, w).all for w in report.w_grid] for v in report.variants], dtype=float)
    fig, ax = plt.subplots(figsize=(1.4 * len(report.w_grid) + 2.5, 0.5 * len(report.variants) + 1.5))
    im = ax.imshow(np.ma.masked_invalid(data), cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(report.w_grid)), [f"{w:g}" for w in report.w_grid])
    ax.set_yticks(range(len(report.variants)), list(report.variants))
    ax.set_xlabel("w")
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            if not math.isnan(data[i, j]):
                ax.text(j, i, f"{data[i, j]:.1f}", ha="center", va="center", color="white", fontsize=8)
    fig.colorbar(im, ax=ax, label="mean SI-SDRi (dB)")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)

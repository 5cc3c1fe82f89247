from .baselines import bandpass, bandpass_separate
from .frechet import FeatureConfig, band_features, frechet_distance, spectral_frechet
from .gridsearch import (
    EXTRACTOR,
    SEPARATOR,
    EvalTask,
    GridCell,
    GridReport,
    default_variants,
    format_grid_table,
    grid_search_w,
    parse_variant,
    run_variant,
    tasks_from_manifest,
)
from .metrics import SI_SDR_CAP, SeparationReport, separation_report, si_sdr, si_sdr_improvement
from .report import (
    eval_document,
    evaluate_estimates,
    format_separation_table,
    plot_grid,
    plot_separation,
    write_json,
)

__all__ = [
    "EXTRACTOR",
    "SEPARATOR",
    "SI_SDR_CAP",
    "EvalTask",
    "FeatureConfig",
    "GridCell",
    "GridReport",
    "SeparationReport",
    "band_features",
    "bandpass",
    "bandpass_separate",
    "default_variants",
    "eval_document",
    "evaluate_estimates",
    "format_grid_table",
    "format_separation_table",
    "frechet_distance",
    "grid_search_w",
    "parse_variant",
    "plot_grid",
    "plot_separation",
    "run_variant",
    "separation_report",
    "si_sdr",
    "si_sdr_improvement",
    "spectral_frechet",
    "write_json",
]

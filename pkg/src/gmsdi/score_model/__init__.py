from .denoiser import SpectralDenoiser, TrainConfig, train_denoiser
from .embedding import (
    CONDITIONAL,
    NEGATIVE,
    TOY_VOCABULARY,
    UNCONDITIONAL,
    Embedding,
    LabelEncoder,
    SourceSpec,
    canonical_labels,
    combine,
    encode_labels,
    load_vocabulary,
    save_vocabulary,
)
from .guidance import W_GRID, CfgConfig, cfg_score
from .kernel import (
    GaussianPriorField,
    ScoreField,
    analytic_gaussian_score,
    analytic_gmm_score,
    dsm_loss,
    perturb,
)

__all__ = [
    "CONDITIONAL",
    "NEGATIVE",
    "TOY_VOCABULARY",
    "UNCONDITIONAL",
    "W_GRID",
    "CfgConfig",
    "Embedding",
    "GaussianPriorField",
    "LabelEncoder",
    "ScoreField",
    "SourceSpec",
    "SpectralDenoiser",
    "TrainConfig",
    "analytic_gaussian_score",
    "analytic_gmm_score",
    "canonical_labels",
    "cfg_score",
    "combine",
    "dsm_loss",
    "encode_labels",
    "load_vocabulary",
    "perturb",
    "save_vocabulary",
    "train_denoiser",
]

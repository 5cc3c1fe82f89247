from .synth import (
    DEFAULT_CLIP_LENGTH,
    TOY_BANDS,
    ClipEntry,
    DatasetManifest,
    evaluation_clips,
    load_manifest,
    synth_clip,
    synth_dataset,
    synth_stem,
    training_pairs,
)
from .wav import wav_read, wav_write

__all__ = [
    "DEFAULT_CLIP_LENGTH",
    "TOY_BANDS",
    "ClipEntry",
    "DatasetManifest",
    "evaluation_clips",
    "load_manifest",
    "synth_clip",
    "synth_dataset",
    "synth_stem",
    "training_pairs",
    "wav_read",
    "wav_write",
]

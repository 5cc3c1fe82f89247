"""Synthetic band-disjoint multi-stem dataset and its manifest.

Each toy label owns a frequency band and a generator family:

* bass: sustained low tones with a second harmonic
* piano: decaying two-partial notes
* guitar: short plucked partials in the mid band
* drums: band-limited noise bursts with fast decay

Envelopes use raised-cosine ramps so spectral leakage outside a band stays
small but non-zero. Training code must go through :func:`training_pairs`,
which never exposes stems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from ..core import AudioTensor, mix
from ..errors import ConfigurationError, FormatError, VocabularyError
from .wav import wav_read, wav_write

MANIFEST_FORMAT = "gmsdi-dataset"
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
DEFAULT_CLIP_LENGTH = 2**14

# (low Hz, high Hz) occupied by each label's generator
TOY_BANDS: dict[str, tuple[float, float]] = {
    "bass": (40.0, 260.0),
    "piano": (400.0, 1000.0),
    "guitar": (1300.0, 2200.0),
    "drums": (2800.0, 3800.0),
}


def _ramp_envelope(n: int, attack: int, release: int) -> np.ndarray:
    env = np.ones(n)
    a, r = min(attack, n // 2), min(release, n // 2)
    if a:
        env[:a] = 0.5 - 0.5 * np.cos(np.pi * np.arange(a) / a)
    if r:
        env[n - r:] = 0.5 + 0.5 * np.cos(np.pi * np.arange(r) / r)
    return env


def _notes(rng: np.random.Generator, length: int, min_len: int, max_len: int) -> Iterator[tuple[int, int]]:
    start = int(rng.integers(0, min_len // 2 + 1))
    while start < length:
        dur = int(rng.integers(min_len, max_len + 1))
        yield start, min(dur, length - start)
        start += dur


def _bass(rng, length, sr):
    out = np.zeros(length)
    for start, n in _notes(rng, length, sr // 4, sr // 2):
        f0 = rng.uniform(45.0, 120.0)
        t = np.arange(n) / sr
        phase = rng.uniform(0, 2 * np.pi)
        tone = np.sin(2 * np.pi * f0 * t + phase) + 0.4 * np.sin(4 * np.pi * f0 * t + phase)
        out[start:start + n] += tone * _ramp_envelope(n, int(0.02 * sr), int(0.02 * sr))
    return out


def _piano(rng, length, sr):
    out = np.zeros(length)
    for start, n in _notes(rng, length, sr // 5, sr // 2):
        f0 = rng.uniform(420.0, 490.0)
        t = np.arange(n) / sr
        tone = np.sin(2 * np.pi * f0 * t) + 0.5 * np.sin(4 * np.pi * f0 * t)
        env = np.exp(-t / rng.uniform(0.15, 0.35)) * _ramp_envelope(n, int(0.008 * sr), int(0.02 * sr))
        out[start:start + n] += tone * env
    return out


def _guitar(rng, length, sr):
    out = np.zeros(length)
    for start, n in _notes(rng, length, sr // 8, sr // 3):
        f0 = rng.uniform(1350.0, 1450.0)
        t = np.arange(n) / sr
        tone = np.sin(2 * np.pi * f0 * t) + 0.6 * np.sin(2 * np.pi * 1.5 * f0 * t)
        env = np.exp(-t / rng.uniform(0.06, 0.15)) * _ramp_envelope(n, int(0.006 * sr), int(0.015 * sr))
        out[start:start + n] += tone * env
    return out


def _drums(rng, length, sr):
    lo, hi = TOY_BANDS["drums"]
    white = rng.standard_normal(length)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(length, 1.0 / sr)
    # smooth band edges so the burst envelope does not splatter further
    spec *= np.clip(np.minimum(freqs - lo - 50, hi - 50 - freqs) / 100.0, 0, 1)
    noise = np.fft.irfft(spec, n=length)
    noise /= np.std(noise) + 1e-12
    env = np.zeros(length)
    for start, n in _notes(rng, length, sr // 8, sr // 4):
        t = np.arange(n) / sr
        env[start:start + n] += np.exp(-t / rng.uniform(0.03, 0.06)) * _ramp_envelope(n, int(0.004 * sr), int(0.01 * sr))
    return noise * env


GENERATORS: dict[str, Callable[[np.random.Generator, int, int], np.ndarray]] = {
    "bass": _bass,
    "piano": _piano,
    "guitar": _guitar,
    "drums": _drums,
}
STEM_RMS = 0.1


def synth_stem(label: str, rng: np.random.Generator, length: int, sample_rate: int) -> np.ndarray:
    if label not in GENERATORS:
        raise VocabularyError(label, list(GENERATORS))
    if TOY_BANDS[label][1] >= sample_rate / 2:
        raise ConfigurationError(f"sample rate {sample_rate} too low for {label}")
    x = GENERATORS[label](rng, length, sample_rate)
    rms = np.sqrt(np.mean(x**2)) + 1e-12
    return x * (STEM_RMS * rng.uniform(0.6, 1.4) / rms)


@dataclass(frozen=True)
class ClipEntry:
    id: str
    mixture: str
    labels: tuple[str, ...]
    stems: dict[str, str] | None = None

    def to_json(self) -> dict:
        d = {"id": self.id, "mixture": self.mixture, "labels": list(self.labels)}
        if self.stems is not None:
            d["stems"] = dict(self.stems)
        return d


@dataclass
class DatasetManifest:
    root: Path
    sample_rate: int
    clip_length: int
    seed: int
    clips: list[ClipEntry] = field(default_factory=list)
    vocabulary: tuple[str, ...] = tuple(TOY_BANDS)

    def path(self, rel: str) -> Path:
        return self.root / rel

    def header(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "sample_rate": self.sample_rate,
            "clip_length": self.clip_length,
            "seed": self.seed,
            "vocabulary": list(self.vocabulary),
        }

    def write(self, path: str | Path | None = None) -> Path:
        path = Path(path) if path else self.root / MANIFEST_NAME
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [json.dumps(c.to_json(), sort_keys=True) for c in self.clips]
        path.write_text("\n".join(lines) + "\n")
        return path

    def validate(self, check_sums: bool = True) -> None:
        """Every file exists and parses; stems reconstruct the mixture."""
        for clip in self.clips:
            for label in clip.labels:
                if label not in self.vocabulary:
                    raise VocabularyError(label, list(self.vocabulary))
            y = wav_read(self.path(clip.mixture))
            if clip.stems is None or not check_sums:
                continue
            total = mix([wav_read(self.path(p)) for p in clip.stems.values()])
            err = np.linalg.norm(total.samples - y.samples)
            if err > 1e-6 * max(np.linalg.norm(y.samples), 1e-12):
                raise FormatError(f"stems of {clip.id} do not sum to the mixture", field="stems", path=str(self.root))


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty manifest", field="header", path=str(path))
    try:
        head = json.loads(lines[0])
        rows = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}", field="line", path=str(path)) from exc
    if head.get("format") != MANIFEST_FORMAT:
        raise FormatError("not a dataset manifest", field="format", path=str(path))
    if head.get("version") != MANIFEST_VERSION:
        raise FormatError(f"unsupported manifest version {head.get('version')}", field="version", path=str(path))
    clips = [ClipEntry(r["id"], r["mixture"], tuple(r["labels"]), r.get("stems")) for r in rows]
    manifest = DatasetManifest(path.parent, head["sample_rate"], head["clip_length"], head["seed"], clips,
                               tuple(head.get("vocabulary", TOY_BANDS)))
    for clip in clips:
        for rel in [clip.mixture, *(clip.stems or {}).values()]:
            if not manifest.path(rel).is_file():
                raise FormatError(f"referenced file missing: {rel}", field="path", path=str(path))
    return manifest


def synth_clip(
    rng: np.random.Generator,
    vocabulary: Sequence[str],
    clip_length: int,
    sample_rate: int,
    n_sources: int | None = None,
) -> tuple[tuple[str, ...], dict[str, np.ndarray]]:
    vocab = list(vocabulary)
    k = int(rng.integers(1, len(vocab) + 1)) if n_sources is None else n_sources
    if not 1 <= k <= len(vocab):
        raise ConfigurationError(f"cannot draw {k} sources from {len(vocab)} labels")
    chosen = sorted(rng.choice(len(vocab), size=k, replace=False))
    labels = tuple(vocab[i] for i in chosen)
    stems = {label: synth_stem(label, rng, clip_length, sample_rate) for label in labels}
    return labels, stems


def synth_dataset(
    vocabulary: Sequence[str],
    n_clips: int,
    clip_length: int = DEFAULT_CLIP_LENGTH,
    sample_rate: int = 8000,
    seed: int = 0,
    out_dir: str | Path = "dataset",
    *,
    n_sources: int | None = None,
    write_stems: bool = True,
) -> DatasetManifest:
    """Synthesize ``n_clips`` mixtures (plus stems for evaluation) to disk.

    Clip ``i`` is drawn from ``default_rng([seed, i])`` so output is
    reproducible and independent of generation order.
    """
    vocab = [v.lower() for v in vocabulary]
    for v in vocab:
        if v not in GENERATORS:
            raise VocabularyError(v, list(GENERATORS))
    if n_clips < 0 or clip_length < 1:
        raise ConfigurationError("n_clips must be >= 0 and clip_length >= 1")
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {root}: {exc}") from exc
    manifest = DatasetManifest(root, sample_rate, clip_length, seed, vocabulary=tuple(vocab))
    for i in range(n_clips):
        rng = np.random.default_rng([seed, i])
        labels, stems = synth_clip(rng, vocab, clip_length, sample_rate, n_sources)
        clip_id = f"clip_{i:05d}"
        stem32 = {label: x.astype(np.float32).astype(np.float64) for label, x in stems.items()}
        mixture = sum(stem32[label] for label in labels)
        wav_write(root / f"{clip_id}.wav", AudioTensor(mixture, sample_rate))
        stem_paths = None
        if write_stems:
            (root / clip_id).mkdir(exist_ok=True)
            stem_paths = {}
            for label in labels:
                rel = f"{clip_id}/{label}.wav"
                wav_write(root / rel, AudioTensor(stem32[label], sample_rate))
                stem_paths[label] = rel
        manifest.clips.append(ClipEntry(clip_id, f"{clip_id}.wav", labels, stem_paths))
    manifest.write()
    return manifest


def training_pairs(manifest: DatasetManifest) -> Iterator[tuple[AudioTensor, tuple[str, ...]]]:
    """Yield ``(mixture, labels)`` only. Stems are never read here."""
    for clip in manifest.clips:
        yield wav_read(manifest.path(clip.mixture)), clip.labels


def evaluation_clips(manifest: DatasetManifest) -> Iterator[tuple[ClipEntry, AudioTensor, dict[str, AudioTensor]]]:
    for clip in manifest.clips:
        if clip.stems is None:
            raise FormatError(f"clip {clip.id} has no stems for evaluation", field="stems", path=str(manifest.root))
        stems = {label: wav_read(manifest.path(p)) for label, p in clip.stems.items()}
        yield clip, wav_read(manifest.path(clip.mixture)), stems

"""Deterministic label encoder standing in for a text encoder.

Label lists are canonicalized (lowercased, sorted, comma-joined) and the
canonical string is hashed together with the encoder seed into a Gaussian
vector. Encoding the concatenation of several sources' labels is the
"combined description" embedding used for mixtures.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigurationError, VocabularyError

CONDITIONAL = "conditional"
UNCONDITIONAL = "unconditional"
NEGATIVE = "negative"
KINDS = (CONDITIONAL, UNCONDITIONAL, NEGATIVE)

UNCONDITIONAL_KEY = "<unconditional>"
TOY_VOCABULARY = ("bass", "drums", "guitar", "piano")


@dataclass(frozen=True, eq=False)
class Embedding:
    vector: np.ndarray
    kind: str = CONDITIONAL
    key: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"embedding kind must be one of {KINDS}, got {self.kind!r}")
        vec = np.array(self.vector, dtype=np.float64)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def as_negative(self) -> "Embedding":
        return Embedding(self.vector, NEGATIVE, self.key)

    def __eq__(self, other):
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.kind == other.kind and self.key == other.key and np.array_equal(self.vector, other.vector)

    def __hash__(self):
        return hash((self.kind, self.key))

    def __repr__(self):
        return f"Embedding(key={self.key!r}, kind={self.kind}, dim={self.dim})"


def canonical_labels(labels: Iterable[str]) -> str:
    """``["Drums", "Bass"] -> "bass,drums"``. Duplicates are kept (multiset)."""
    return ",".join(sorted(label.strip().lower() for label in labels))


class LabelEncoder:
    """Seeded lookup from canonical label strings to fixed vectors."""

    def __init__(self, vocabulary: Sequence[str] = TOY_VOCABULARY, dim: int = 32, seed: int = 0):
        vocab = [v.strip().lower() for v in vocabulary]
        if not vocab or any(not v or "," in v for v in vocab):
            raise ConfigurationError(f"invalid vocabulary {list(vocabulary)!r}")
        if len(set(vocab)) != len(vocab):
            raise ConfigurationError("vocabulary contains duplicate labels")
        if dim < 1:
            raise ConfigurationError(f"embedding dim must be positive, got {dim}")
        self.vocabulary = tuple(vocab)
        self.dim = int(dim)
        self.seed = int(seed)
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, key: str) -> np.ndarray:
        if key not in self._cache:
            digest = hashlib.sha256(f"{self.seed}:{key}".encode()).digest()
            entropy = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 32, 4)]
            rng = np.random.default_rng(np.random.SeedSequence(entropy))
            self._cache[key] = rng.standard_normal(self.dim) / np.sqrt(self.dim)
        return self._cache[key]

    def check(self, labels: Sequence[str]) -> list[str]:
        if isinstance(labels, str):
            labels = [labels]
        if not labels:
            raise ConfigurationError("label list must be non-empty")
        out = []
        for label in labels:
            norm = label.strip().lower()
            if norm not in self.vocabulary:
                raise VocabularyError(label, list(self.vocabulary))
            out.append(norm)
        return out

    def encode(self, labels: Sequence[str], kind: str = CONDITIONAL) -> Embedding:
        key = canonical_labels(self.check(labels))
        return Embedding(self._vector(key), kind, key)

    def unconditional(self) -> Embedding:
        return Embedding(self._vector(UNCONDITIONAL_KEY), UNCONDITIONAL, UNCONDITIONAL_KEY)

    def negative(self, labels: Sequence[str]) -> Embedding:
        return self.encode(labels, kind=NEGATIVE)

    def config(self) -> dict:
        return {"vocabulary": list(self.vocabulary), "dim": self.dim, "seed": self.seed}

    @classmethod
    def from_config(cls, cfg: dict) -> "LabelEncoder":
        return cls(cfg["vocabulary"], cfg["dim"], cfg["seed"])


_default_encoder = LabelEncoder()


def encode_labels(labels: Sequence[str], encoder: LabelEncoder | None = None) -> Embedding:
    return (encoder or _default_encoder).encode(labels)


@dataclass(frozen=True)
class SourceSpec:
    labels: tuple[str, ...]
    embedding: Embedding

    def __post_init__(self):
        if not self.labels:
            raise ConfigurationError("SourceSpec needs at least one label")
        if self.embedding.kind != CONDITIONAL:
            raise ConfigurationError("SourceSpec embedding must be conditional")

    @classmethod
    def from_labels(cls, labels: Sequence[str] | str, encoder: LabelEncoder | None = None) -> "SourceSpec":
        encoder = encoder or _default_encoder
        if isinstance(labels, str):
            labels = [s for s in labels.split(",") if s.strip()]
        checked = encoder.check(labels)
        return cls(tuple(checked), encoder.encode(checked))

    @property
    def key(self) -> str:
        return self.embedding.key


def combine(specs: Sequence[SourceSpec], encoder: LabelEncoder | None = None) -> Embedding:
    """Embedding of the concatenated descriptions of ``specs``."""
    labels = [label for s in specs for label in s.labels]
    return encode_labels(labels, encoder)


def load_vocabulary(path: str | Path) -> list[str]:
    lines = Path(path).read_text().splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


def save_vocabulary(path: str | Path, vocabulary: Sequence[str]) -> None:
    Path(path).write_text("".join(f"{v}\n" for v in vocabulary))

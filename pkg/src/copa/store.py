"""Labeled embedding sets: validation, disk formats and synthetic data.

This is the only module that touches disk for data. Two formats exist:

* binary (extension-agnostic, magic ``CPEB``): little-endian ``u32`` version
  (currently 1), ``u32`` N, ``u32`` d, ``u32`` n_classes, then ``N*d``
  float32 vector entries row-major, then ``N`` u32 labels. Round-trips
  bit-exactly.
* csv: header ``label,v0,...,v{d-1}``, one sample per row. Values are written
  with 9 significant digits, which round-trips float32 exactly and is in any
  case within 1e-6 per entry.

Synthetic sets mimic embeddings from a frozen backbone: each class is an
isotropic gaussian cloud around a unit-norm random center, and a shared
positive offset added to every coordinate gives all embeddings a common
direction, so the per-class means sit measurably apart from the instance
cloud once everything is normalized.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    DimensionMismatchError,
    FormatError,
    LabelRangeError,
    MissingClassError,
    NonFiniteError,
)
from .rng import Rng, mix64

_MAGIC = b"CPEB"
_VERSION = 1


@dataclass(frozen=True)
class EmbeddingSet:
    """Immutable set of N d-dimensional float32 embeddings with class labels."""

    vectors: np.ndarray  # (N, d) float32
    labels: np.ndarray  # (N,) uint32
    n_classes: int

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.uint32)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)
        validate_embedding_set(vectors, labels, self.n_classes)
        vectors.setflags(write=False)
        labels.setflags(write=False)

    def class_indices(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]


def validate_embedding_set(vectors: np.ndarray, labels: np.ndarray, n_classes: int) -> None:
    """Raise a DataError subclass on the first violated invariant."""
    if vectors.ndim != 2 or vectors.shape[0] == 0 or vectors.shape[1] == 0:
        raise DataError(f"vectors must be a non-empty 2-d array, got shape {vectors.shape}")
    if n_classes <= 0:
        raise DataError(f"n_classes must be positive, got {n_classes}")
    if labels.shape != (vectors.shape[0],):
        raise DimensionMismatchError(
            f"{labels.shape[0]} labels for {vectors.shape[0]} vector rows"
        )
    bad = np.nonzero(~np.isfinite(vectors))
    if bad[0].size:
        raise NonFiniteError(f"non-finite value at row {bad[0][0]}, column {bad[1][0]}")
    high = np.nonzero(labels >= n_classes)[0]
    if high.size:
        raise LabelRangeError(
            f"label {labels[high[0]]} at row {high[0]} out of range [0, {n_classes})"
        )
    present = np.unique(labels)
    if present.size != n_classes:
        missing = sorted(set(range(n_classes)) - set(int(v) for v in present))
        raise MissingClassError(f"classes with no samples: {missing}")


@dataclass(frozen=True)
class SynthSpec:
    """Deterministic recipe for a synthetic embedding set."""

    dim: int
    n_classes: int
    samples_per_class: int
    cluster_spread: float = 0.3
    cone_offset: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.dim <= 0 or self.n_classes <= 0 or self.samples_per_class <= 0:
            raise DataError("dim, n_classes and samples_per_class must be positive")
        if self.cluster_spread < 0 or self.cone_offset < 0:
            raise DataError("cluster_spread and cone_offset must be non-negative")


def generate_synthetic(spec: SynthSpec) -> EmbeddingSet:
    """Generate a synthetic EmbeddingSet; a pure function of the spec.

    Class centers are drawn first (normalized gaussian directions), then per
    class the sample noise, all from one SplitMix64 stream, so the output is
    identical for identical specs on every platform.
    """
    rng = Rng(mix64(spec.seed))
    d = spec.dim
    centers = np.empty((spec.n_classes, d), dtype=np.float64)
    for k in range(spec.n_classes):
        v = np.array(rng.normals(d), dtype=np.float64)
        norm = np.linalg.norm(v)
        while norm == 0.0:  # measure-zero, but stay total
            v = np.array(rng.normals(d), dtype=np.float64)
            norm = np.linalg.norm(v)
        centers[k] = v / norm

    n = spec.n_classes * spec.samples_per_class
    vectors = np.empty((n, d), dtype=np.float64)
    labels = np.empty(n, dtype=np.uint32)
    row = 0
    for k in range(spec.n_classes):
        for _ in range(spec.samples_per_class):
            noise = np.array(rng.normals(d), dtype=np.float64)
            vectors[row] = centers[k] + spec.cluster_spread * noise + spec.cone_offset
            labels[row] = k
            row += 1
    return EmbeddingSet(vectors.astype(np.float32), labels, spec.n_classes)


def save(emb: EmbeddingSet, path: str, format: str = "binary") -> None:
    """Write an EmbeddingSet to disk in the given format."""
    if format == "binary":
        _save_binary(emb, path)
    elif format == "csv":
        _save_csv(emb, path)
    else:
        raise DataError(f"unknown format {format!r}, expected 'binary' or 'csv'")


def load(path: str, format: str = "binary") -> EmbeddingSet:
    """Load and validate an EmbeddingSet; never returns a partially valid set."""
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path)
    raise DataError(f"unknown format {format!r}, expected 'binary' or 'csv'")


def _save_binary(emb: EmbeddingSet, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIII", _VERSION, emb.count, emb.dim, emb.n_classes))
        fh.write(emb.vectors.astype("<f4").tobytes(order="C"))
        fh.write(emb.labels.astype("<u4").tobytes(order="C"))


def _load_binary(path: str) -> EmbeddingSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:4] != _MAGIC:
        raise FormatError(f"{path}: missing CPEB magic at byte 0")
    version, n, d, n_classes = struct.unpack("<IIII", data[4:20])
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    expected = 20 + 4 * n * d + 4 * n
    if len(data) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for N={n} d={d}, found {len(data)}"
        )
    vectors = np.frombuffer(data, dtype="<f4", count=n * d, offset=20).reshape(n, d)
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=20 + 4 * n * d)
    return EmbeddingSet(vectors.copy(), labels.copy(), int(n_classes))


def _save_csv(emb: EmbeddingSet, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("label," + ",".join(f"v{i}" for i in range(emb.dim)) + "\n")
        for row in range(emb.count):
            values = ",".join(f"{float(v):.9g}" for v in emb.vectors[row])
            fh.write(f"{int(emb.labels[row])},{values}\n")


def _load_csv(path: str) -> EmbeddingSet:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        cols = header.split(",")
        if len(cols) < 2 or cols[0] != "label" or cols[1] != "v0":
            raise FormatError(f"{path}: malformed header {header!r}")
        d = len(cols) - 1
        if cols != ["label"] + [f"v{i}" for i in range(d)]:
            raise FormatError(f"{path}: malformed header {header!r}")
        vectors, labels = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != d + 1:
                raise DimensionMismatchError(
                    f"{path}:{lineno}: {len(parts) - 1} values, expected {d}"
                )
            try:
                labels.append(int(parts[0]))
                vectors.append([float(p) for p in parts[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not vectors:
        raise FormatError(f"{path}: no data rows")
    arr = np.array(vectors, dtype=np.float32)
    lab = np.array(labels)
    if lab.min() < 0:
        raise LabelRangeError(f"{path}: negative label {lab.min()}")
    n_classes = int(lab.max()) + 1
    return EmbeddingSet(arr, lab.astype(np.uint32), n_classes)

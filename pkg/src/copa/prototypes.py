"""Per-class prototype construction.

Three rules are supported. ``average`` is the arithmetic mean of the class
support rows and is the default everywhere else in the package. ``max`` takes
the elementwise maximum over the class. ``max_sample`` returns the class
member whose summed cosine similarity against all class members (self
included) is largest; ties go to the lowest row index.

Prototypes are always built from raw, un-normalized embeddings; similarity
computations normalize internally where they need to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NonFiniteError

AVERAGE = "average"
MAX = "max"
MAX_SAMPLE = "max_sample"
RULES = (AVERAGE, MAX, MAX_SAMPLE)


@dataclass(frozen=True)
class PrototypeSet:
    prototypes: np.ndarray  # (n_classes, d)
    class_counts: np.ndarray  # (n_classes,)
    rule: str

    @property
    def way_count(self) -> int:
        return self.prototypes.shape[0]


def build_prototypes(support: np.ndarray, labels: np.ndarray, rule: str = AVERAGE) -> PrototypeSet:
    support = np.asarray(support, dtype=np.float64)
    labels = np.asarray(labels)
    if rule not in RULES:
        raise DataError(f"unknown prototype rule {rule!r}")
    if support.ndim != 2 or support.shape[0] != labels.shape[0]:
        raise DataError("support matrix and labels disagree in length")
    if not np.all(np.isfinite(support)):
        raise NonFiniteError("support matrix contains non-finite values")
    n_classes = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=n_classes)
    if n_classes == 0 or np.any(counts == 0) or labels.min() < 0:
        raise DataError("labels must cover every class in [0, n_classes)")

    protos = np.empty((n_classes, support.shape[1]), dtype=np.float64)
    for c in range(n_classes):
        members = support[labels == c]
        if rule == AVERAGE:
            protos[c] = members.mean(axis=0)
        elif rule == MAX:
            protos[c] = members.max(axis=0)
        else:
            protos[c] = members[_max_sample_index(members)]
    return PrototypeSet(protos, counts.astype(np.int64), rule)


def _max_sample_index(members: np.ndarray) -> int:
    norms = np.linalg.norm(members, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("zero-norm row in max_sample prototype computation")
    normed = members / norms
    row_sums = (normed @ normed.T).sum(axis=1)
    return int(np.argmax(row_sums))  # argmax takes the first (lowest) index on ties


def expand_prototypes(protos: PrototypeSet, labels: np.ndarray) -> np.ndarray:
    """Row i of the result is the prototype of labels[i] (one row per label)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("cannot expand prototypes over an empty label list")
    if labels.min() < 0 or labels.max() >= protos.way_count:
        raise DataError(
            f"label out of range [0, {protos.way_count}) in prototype expansion"
        )
    return protos.prototypes[labels]

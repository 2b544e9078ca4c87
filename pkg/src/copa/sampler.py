"""Episodic task sampling under the three few-shot protocols.

``vary_way_vary_shot`` draws a uniform way count in [5, min(max_ways,
n_classes)], assigns each class its query samples first (``query_per_class``,
capped at half the class so at least 50% remains for support), then splits a
support budget of at most ``max_support_total`` across the classes with
random weights, clamped to [1, min(max_support_per_class, remaining)].
``vary_way_5shot`` fixes 5 support samples per class and ``fiveway_1shot``
fixes 5 ways with a single support sample each.

Episodes are pure functions of (set, protocol, episode_index): the randomness
comes from a substream derived from (protocol.seed, episode_index), so any
subset of episodes can be sampled in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .rng import Rng, substream
from .store import EmbeddingSet

VARY_WAY_VARY_SHOT = "vary_way_vary_shot"
VARY_WAY_5SHOT = "vary_way_5shot"
FIVEWAY_1SHOT = "fiveway_1shot"
PROTOCOL_KINDS = (VARY_WAY_VARY_SHOT, VARY_WAY_5SHOT, FIVEWAY_1SHOT)


@dataclass(frozen=True)
class TaskProtocol:
    kind: str = VARY_WAY_VARY_SHOT
    max_ways: int = 50
    query_per_class: int = 10
    max_support_total: int = 500
    max_support_per_class: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise DataError(f"unknown protocol kind {self.kind!r}")
        if self.max_ways < 5:
            raise DataError(f"max_ways must be >= 5, got {self.max_ways}")
        if self.query_per_class < 1:
            raise DataError("query_per_class must be >= 1")
        if self.max_support_total < 1 or self.max_support_per_class < 1:
            raise DataError("support caps must be positive")


@dataclass(frozen=True)
class EpisodeTask:
    """Support/query index split with episode-local class remapping."""

    support_indices: np.ndarray
    query_indices: np.ndarray
    way_count: int
    class_map: dict[int, int] = field(repr=False)


def sample_episode(emb: EmbeddingSet, protocol: TaskProtocol, episode_index: int) -> EpisodeTask:
    """Sample one episode, deterministic in (protocol.seed, episode_index)."""
    if emb.n_classes < 5:
        raise DataError(f"need at least 5 classes to sample a task, got {emb.n_classes}")
    rng = Rng(substream(protocol.seed, episode_index))

    if protocol.kind == FIVEWAY_1SHOT:
        way_count = 5
    else:
        way_count = rng.randrange(5, min(protocol.max_ways, emb.n_classes))
    chosen = sorted(rng.sample_without_replacement(emb.n_classes, way_count))
    class_map = {orig: local for local, orig in enumerate(chosen)}

    class_rows = [emb.class_indices(c) for c in chosen]
    sizes = [rows.size for rows in class_rows]
    for c, size in zip(chosen, sizes):
        if size < 2:
            raise DataError(f"class {c} has {size} sample(s); need at least 2")

    query_counts = [min(protocol.query_per_class, size // 2) for size in sizes]
    remaining = [size - q for size, q in zip(sizes, query_counts)]

    if protocol.kind == FIVEWAY_1SHOT:
        support_counts = [1] * way_count
    elif protocol.kind == VARY_WAY_5SHOT:
        for c, rem in zip(chosen, remaining):
            if rem < 5:
                raise DataError(f"class {c} has {rem} samples left for a 5-shot split")
        support_counts = [5] * way_count
    else:
        support_counts = _vary_shot_counts(rng, remaining, protocol)

    support, query = [], []
    for rows, q, s in zip(class_rows, query_counts, support_counts):
        order = list(range(rows.size))
        rng.shuffle(order)
        picked = rows[order]
        query.extend(int(i) for i in picked[:q])
        support.extend(int(i) for i in picked[q : q + s])
    return EpisodeTask(
        support_indices=np.array(support, dtype=np.int64),
        query_indices=np.array(query, dtype=np.int64),
        way_count=way_count,
        class_map=class_map,
    )


def _vary_shot_counts(rng: Rng, remaining: list[int], protocol: TaskProtocol) -> list[int]:
    """Random imbalanced shot assignment under the total and per-class caps."""
    budget = min(protocol.max_support_total, sum(remaining))
    if budget < len(remaining):
        raise DataError(
            f"support budget {budget} cannot give {len(remaining)} classes one sample each"
        )
    weights = [rng.uniform_open() for _ in remaining]
    total_w = sum(weights)
    caps = [min(protocol.max_support_per_class, rem) for rem in remaining]
    counts = [
        min(max(int(w / total_w * budget), 1), cap) for w, cap in zip(weights, caps)
    ]
    # Up-clamping zero floors can push the sum past the budget; repair
    # deterministically by shaving the largest classes.
    while sum(counts) > budget:
        i = max(range(len(counts)), key=lambda j: (counts[j], -j))
        counts[i] -= 1
    return counts


def episode_views(
    emb: EmbeddingSet, task: EpisodeTask
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gather (support, support_labels, query, query_labels) as float64/int64.

    Labels are remapped through the episode's class_map to [0, way_count).
    """
    for idx in (task.support_indices, task.query_indices):
        if idx.size == 0:
            raise DataError("episode has an empty support or query side")
        if idx.min() < 0 or idx.max() >= emb.count:
            raise DataError("episode index out of range for this embedding set")
    support = emb.vectors[task.support_indices].astype(np.float64)
    query = emb.vectors[task.query_indices].astype(np.float64)
    remap = np.vectorize(task.class_map.__getitem__, otypes=[np.int64])
    support_labels = remap(emb.labels[task.support_indices].astype(int))
    query_labels = remap(emb.labels[task.query_indices].astype(int))
    return support, support_labels, query, query_labels

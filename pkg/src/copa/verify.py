"""Randomized numerical verification of the four analytic bounds.

Each suite draws random admissible instances, evaluates both sides of its
inequality (or all three sides of its sandwich) and flags violations beyond a
1e-9 relative slack. Alongside the random trials every suite also evaluates
one deterministic instance where the bound is tight (holds with equality);
with fault injection enabled the favorable side of that tight instance is
perturbed by -1e-3, which must be detected, proving the harness can fail.

Suites:

* ``theorem1``: lower bound of the NCC loss on unit-norm representations
* ``theorem2``: sandwich on the un-normalized representation gap under a
  shared linear head
* ``theorem3``: lower bound of the SCE loss at temperature 1
* ``lemma1``: sandwich on ||v^T theta||^2 via column cosines
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gap import gap_transform_sandwich, vector_transform_sandwich
from .losses import ncc_lower_bound, normalize_rows, sce_lower_bound
from .rng import Rng, substream

SUITE_NAMES = ("theorem1", "theorem2", "theorem3", "lemma1")
_SLACK = 1e-9
_FAULT = 1e-3


@dataclass
class SuiteOutcome:
    name: str
    passed: int
    total: int
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _holds(lower: float, upper: float) -> bool:
    return lower <= upper + _SLACK * max(1.0, abs(lower), abs(upper))


def _gaussian_matrix(rng: Rng, rows: int, cols: int) -> np.ndarray:
    return np.array(rng.normals(rows * cols), dtype=np.float64).reshape(rows, cols)


def _random_labels(rng: Rng, max_classes: int = 6, max_per_class: int = 6) -> np.ndarray:
    n_classes = rng.randrange(2, max_classes)
    counts = [rng.randrange(1, max_per_class) for _ in range(n_classes)]
    return np.repeat(np.arange(n_classes), counts)


def _trial_rng(seed: int, suite_index: int, trial: int) -> Rng:
    return Rng(substream(substream(seed, suite_index), trial))


def _theorem1_trial(rng: Rng, dims: tuple[int, ...]) -> tuple[bool, dict]:
    d = dims[rng.randint(len(dims))]
    labels = _random_labels(rng)
    z = normalize_rows(_gaussian_matrix(rng, labels.shape[0], d))
    n_classes = int(labels.max()) + 1
    counts = np.bincount(labels)
    alpha = 0.5 / (n_classes * int(counts.max()))
    lhs, rhs = ncc_lower_bound(z, labels, alpha)
    return _holds(rhs, lhs), {"lhs": lhs, "rhs": rhs, "alpha": alpha,
                              "labels": labels.tolist(), "z": z.tolist()}


def _theorem1_sentinel(fault: bool) -> tuple[bool, dict]:
    # One class, two antipodal unit rows: both sides are exactly zero.
    z = np.array([[1.0, 0.0], [-1.0, 0.0]])
    labels = np.array([0, 0])
    lhs, rhs = ncc_lower_bound(z, labels, 0.25)
    if fault:
        lhs -= _FAULT
    return _holds(rhs, lhs), {"lhs": lhs, "rhs": rhs, "sentinel": "antipodal-pair"}


def _theorem3_trial(rng: Rng, dims: tuple[int, ...]) -> tuple[bool, dict]:
    d = dims[rng.randint(len(dims))]
    labels = _random_labels(rng)
    n_classes = int(labels.max()) + 1
    z = normalize_rows(_gaussian_matrix(rng, labels.shape[0], d))
    protos = normalize_rows(_gaussian_matrix(rng, n_classes, d))
    c = protos[labels]
    lhs, rhs = sce_lower_bound(z, c, labels)
    return _holds(rhs, lhs), {"lhs": lhs, "rhs": rhs,
                              "labels": labels.tolist(), "z": z.tolist(), "c": c.tolist()}


def _theorem3_sentinel(fault: bool) -> tuple[bool, dict]:
    # A single positive pair: loss 0, bound 0.
    z = np.array([[1.0, 0.0]])
    lhs, rhs = sce_lower_bound(z, z.copy(), np.array([0]))
    if fault:
        lhs -= _FAULT
    return _holds(rhs, lhs), {"lhs": lhs, "rhs": rhs, "sentinel": "single-pair"}


def _lemma1_trial(rng: Rng, dims: tuple[int, ...]) -> tuple[bool, dict]:
    del dims
    d = rng.randrange(3, 32)
    v = np.array(rng.normals(d), dtype=np.float64)
    theta = _gaussian_matrix(rng, d, d)
    lower, middle, upper = vector_transform_sandwich(v, theta)
    ok = _holds(lower, middle) and _holds(middle, upper)
    return ok, {"lower": lower, "middle": middle, "upper": upper,
                "v": v.tolist(), "theta": theta.tolist()}


def _lemma1_sentinel(fault: bool) -> tuple[bool, dict]:
    # Rank-1 theta (single nonzero column): lower = middle = upper.
    v = np.array([0.6, 0.8, 0.0])
    theta = np.zeros((3, 3))
    theta[:, 1] = [1.0, 2.0, -1.0]
    lower, middle, upper = vector_transform_sandwich(v, theta)
    if fault:
        middle -= _FAULT
    ok = _holds(lower, middle) and _holds(middle, upper)
    return ok, {"lower": lower, "middle": middle, "upper": upper, "sentinel": "rank-1"}


def _theorem2_trial(rng: Rng, dims: tuple[int, ...]) -> tuple[bool, dict]:
    d = dims[rng.randint(len(dims))]
    # balanced class counts make the embedding gap identically zero (mean of
    # rows equals mean of class means), so draw an imbalanced label set
    labels = _random_labels(rng)
    while len(set(np.bincount(labels).tolist())) == 1:
        labels = _random_labels(rng)
    support = _gaussian_matrix(rng, labels.shape[0], d)
    theta = _gaussian_matrix(rng, d, d)
    lower, middle, upper = gap_transform_sandwich(support, labels, theta)
    ok = _holds(lower, middle) and _holds(middle, upper)
    return ok, {"lower": lower, "middle": middle, "upper": upper,
                "labels": labels.tolist(), "support": support.tolist(),
                "theta": theta.tolist()}


def _theorem2_sentinel(fault: bool) -> tuple[bool, dict]:
    support = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    labels = np.array([0, 0, 1])
    theta = np.zeros((2, 2))
    theta[:, 0] = [0.3, -0.7]  # rank-1: the sandwich is an equality
    lower, middle, upper = gap_transform_sandwich(support, labels, theta)
    if fault:
        middle -= _FAULT
    ok = _holds(lower, middle) and _holds(middle, upper)
    return ok, {"lower": lower, "middle": middle, "upper": upper, "sentinel": "rank-1"}


_SUITES = {
    "theorem1": (_theorem1_trial, _theorem1_sentinel),
    "theorem2": (_theorem2_trial, _theorem2_sentinel),
    "theorem3": (_theorem3_trial, _theorem3_sentinel),
    "lemma1": (_lemma1_trial, _lemma1_sentinel),
}


def run_suite(
    name: str,
    trials: int,
    seed: int,
    dims: tuple[int, ...] = (4, 8, 16),
    inject_fault: bool = False,
) -> SuiteOutcome:
    trial_fn, sentinel_fn = _SUITES[name]
    suite_index = SUITE_NAMES.index(name)
    outcome = SuiteOutcome(name=name, passed=0, total=trials)
    for trial in range(trials):
        ok, instance = trial_fn(_trial_rng(seed, suite_index, trial), dims)
        if ok:
            outcome.passed += 1
        else:
            instance.update({"suite": name, "trial": trial, "seed": seed})
            outcome.violations.append(instance)
    ok, instance = sentinel_fn(inject_fault)
    if not ok:
        instance.update({"suite": name, "trial": "sentinel", "seed": seed})
        outcome.violations.append(instance)
    return outcome


def run_all_suites(
    trials: int,
    seed: int,
    dims: tuple[int, ...] = (4, 8, 16),
    inject_fault: bool = False,
) -> list[SuiteOutcome]:
    return [run_suite(name, trials, seed, dims, inject_fault) for name in SUITE_NAMES]

"""Prototype-instance gap measurement, shift experiments and bound checks.

The gap is the difference between the centroid of the normalized instance
representations and the centroid of the normalized prototype representations.
Two related quantities use the *un-normalized* vectors instead: the raw
embedding gap that a shared linear head transports, and the sandwich that
bounds how much of it survives the transport. Both conventions appear here
deliberately, as separate functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .losses import _softmax_ce, normalize_rows
from .prototypes import AVERAGE, build_prototypes


@dataclass(frozen=True)
class GapReport:
    delta: np.ndarray
    norm: float
    m_scalar: float | None = None
    M_scalar: float | None = None
    bound_scale: float | None = None


@dataclass(frozen=True)
class ShiftCurve:
    lambdas: list[float]
    losses: list[float]

    def __post_init__(self):
        if not self.lambdas:
            raise DataError("shift curve needs at least one lambda")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise DataError("lambdas must be strictly increasing")


@dataclass(frozen=True)
class BenchmarkStats:
    n_episodes: int
    mean_accuracy: float
    ci95_halfwidth: float
    mean_gap_before: float
    mean_gap_after: float


def compute_gap(representations: np.ndarray, prototypes: np.ndarray) -> GapReport:
    """Gap vector and norm between normalized instance and prototype centroids."""
    reps = normalize_rows(representations)
    protos = normalize_rows(prototypes)
    delta = reps.mean(axis=0) - protos.mean(axis=0)
    return GapReport(delta=delta, norm=float(np.linalg.norm(delta)))


def raw_gap_vector(support: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Un-normalized embedding gap: mean row minus mean of class means."""
    support = np.asarray(support, dtype=np.float64)
    protos = build_prototypes(support, labels, AVERAGE).prototypes
    return support.mean(axis=0) - protos.mean(axis=0)


def gap_bound_scalars(delta_emb: np.ndarray, theta: np.ndarray) -> tuple[float, float]:
    """(m, M): min and max squared cosine between the gap and theta's columns.

    All-zero columns contribute nothing to either the transformed vector or
    the Frobenius norm, so they are excluded from the cosine set (the
    sandwich stays exact); a theta with no nonzero column at all is an error.
    """
    delta_emb = np.asarray(delta_emb, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    v_norm = np.linalg.norm(delta_emb)
    if v_norm == 0.0:
        raise DataError("gap vector is zero; cosines are undefined")
    col_norms = np.linalg.norm(theta, axis=0)
    nonzero = col_norms > 0.0
    if not np.any(nonzero):
        raise DataError("theta has no nonzero column; cosines are undefined")
    cos_sq = (delta_emb @ theta[:, nonzero]) ** 2 / (v_norm**2 * col_norms[nonzero] ** 2)
    return float(cos_sq.min()), float(cos_sq.max())


def gap_report_with_bounds(
    representations: np.ndarray,
    prototypes: np.ndarray,
    delta_emb: np.ndarray,
    theta: np.ndarray,
) -> GapReport:
    """compute_gap plus the transport scalars of the given embedding gap."""
    base = compute_gap(representations, prototypes)
    m, big_m = gap_bound_scalars(delta_emb, theta)
    scale = float(np.sqrt(big_m) * np.linalg.norm(theta))
    return GapReport(
        delta=base.delta, norm=base.norm, m_scalar=m, M_scalar=big_m, bound_scale=scale
    )


def vector_transform_sandwich(v: np.ndarray, theta: np.ndarray) -> tuple[float, float, float]:
    """(lower, middle, upper) with middle = ||v^T theta||^2.

    The bounds are min/max_i cos^2(v, theta_column_i) * ||v||^2 * ||theta||_F^2;
    lower <= middle <= upper holds for every nonzero v and zero-column-free
    theta (the middle is exactly the cosine-weighted column-norm sum).
    """
    v = np.asarray(v, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    m, big_m = gap_bound_scalars(v, theta)
    v_sq = float(v @ v)
    frob_sq = float(np.sum(theta * theta))
    vt = v @ theta
    return m * v_sq * frob_sq, float(vt @ vt), big_m * v_sq * frob_sq


def gap_transform_sandwich(
    support: np.ndarray, labels: np.ndarray, theta: np.ndarray
) -> tuple[float, float, float]:
    """Sandwich for the un-normalized representation gap under a shared head.

    The middle term is computed from the actual transformed representations
    (mean row minus mean class-mean), not by shortcutting through the
    embedding gap, so the check exercises the full claim.
    """
    support = np.asarray(support, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    delta_emb = raw_gap_vector(support, labels)
    if np.linalg.norm(delta_emb) == 0.0:
        raise DataError("embedding gap is zero; bounds are undefined")
    m, big_m = gap_bound_scalars(delta_emb, theta)
    z = support @ theta
    rep_gap = z.mean(axis=0) - build_prototypes(z, labels, AVERAGE).prototypes.mean(axis=0)
    emb_sq = float(delta_emb @ delta_emb)
    frob_sq = float(np.sum(theta * theta))
    return m * frob_sq * emb_sq, float(rep_gap @ rep_gap), big_m * frob_sq * emb_sq


def shifted_validation_loss(
    query: np.ndarray,
    query_labels: np.ndarray,
    prototypes: np.ndarray,
    lam: float,
) -> float:
    """Query NCC loss after scaling the query-prototype gap by ``lam``.

    Both sets are normalized, then moved apart (or together) along the gap
    direction: queries by +(lam-1)/2 * delta and prototypes by -(lam-1)/2 *
    delta, splitting the displacement symmetrically so the joint centroid
    stays fixed. lam=1 applies no shift at all (bit-identical to the plain
    validation loss), lam=0 makes the centroids coincide, negative lam swaps
    the two sides. Shifted rows are re-normalized before scoring.
    """
    q_hat = normalize_rows(query)
    p_hat = normalize_rows(prototypes)
    if lam != 1.0:
        delta = q_hat.mean(axis=0) - p_hat.mean(axis=0)
        shift = 0.5 * (lam - 1.0) * delta
        q_hat = normalize_rows(q_hat + shift)
        p_hat = normalize_rows(p_hat - shift)
    labels = np.asarray(query_labels)
    if labels.min() < 0 or labels.max() >= p_hat.shape[0]:
        raise DataError("query label out of range for the prototype rows")
    loss, _ = _softmax_ce(q_hat @ p_hat.T, labels)
    return loss


def gap_shift_curve(
    support: np.ndarray,
    support_labels: np.ndarray,
    query: np.ndarray,
    query_labels: np.ndarray,
    lambdas: list[float],
) -> ShiftCurve:
    """Validation-loss landscape over gap scale factors for one episode."""
    protos = build_prototypes(support, support_labels, AVERAGE).prototypes
    losses = [
        shifted_validation_loss(query, query_labels, protos, lam) for lam in lambdas
    ]
    return ShiftCurve(lambdas=list(lambdas), losses=losses)


def aggregate(results: list) -> BenchmarkStats:
    """Mean accuracy with a 1.96*std/sqrt(n) half-width plus mean gaps.

    Standard deviation uses the unbiased n-1 convention. Accepts any objects
    carrying query_accuracy / initial_gap / final_gap.
    """
    if len(results) < 2:
        raise DataError("need at least 2 episode results to aggregate")
    acc = np.array([r.query_accuracy for r in results], dtype=np.float64)
    before = np.array([r.initial_gap for r in results], dtype=np.float64)
    after = np.array([r.final_gap for r in results], dtype=np.float64)
    n = acc.shape[0]
    return BenchmarkStats(
        n_episodes=n,
        mean_accuracy=float(acc.mean()),
        ci95_halfwidth=float(1.96 * acc.std(ddof=1) / np.sqrt(n)),
        mean_gap_before=float(before.mean()),
        mean_gap_after=float(after.mean()),
    )

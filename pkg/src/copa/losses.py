"""Nearest-centroid and symmetric cross-entropy objectives with exact gradients.

Conventions used throughout:

* representations are rows; a linear head ``theta`` acts as ``Z = X @ theta``
* similarities are cosine, i.e. dot products of L2-normalized rows
* the nearest-centroid (NCC) loss recomputes class prototypes from the
  current representations each evaluation and differentiates through both the
  normalization and the prototype average; for a shared linear head this is
  identical to transforming raw-average prototype embeddings
* the symmetric cross-entropy (SCE) loss scores an n x n similarity matrix
  between paired prototype and instance rows against diagonal pseudo-labels,
  in both directions, divided by a temperature; the two terms are summed
* zero-norm rows are an error, never epsilon-guarded: a zero representation
  signals an upstream bug

All gradients are exact analytic derivatives; the test suite checks every one
against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NonFiniteError
from .prototypes import AVERAGE, PrototypeSet, expand_prototypes


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.2
    similarity: str = "cosine"

    def __post_init__(self):
        if self.temperature <= 0:
            raise DataError(f"temperature must be positive, got {self.temperature}")
        if self.similarity != "cosine":
            raise DataError("only cosine similarity is supported")


@dataclass(frozen=True)
class LossResult:
    value: float
    grad_shared: np.ndarray | None = None
    grad_proto_head: np.ndarray | None = None
    grad_image_head: np.ndarray | None = None


@dataclass(frozen=True)
class SceLossResult:
    value: float
    grad_proto_repr: np.ndarray | None = None
    grad_image_repr: np.ndarray | None = None


def normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("zero-norm row cannot be normalized")
    return x / norms


def _normalize_backward(grad_normed: np.ndarray, raw: np.ndarray, normed: np.ndarray) -> np.ndarray:
    # d/dv of v/||v|| applied to an upstream gradient g: (g - (g.v_hat) v_hat)/||v||
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    inner = np.sum(grad_normed * normed, axis=1, keepdims=True)
    return (grad_normed - inner * normed) / norms


def _softmax_ce(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross entropy of row-softmax logits; returns (loss, dloss/dlogits)."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)
    loss = -float(log_probs[np.arange(n), targets].mean())
    grad = exp / denom
    grad[np.arange(n), targets] -= 1.0
    return loss, grad / n


def _class_counts(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("labels are empty")
    n_classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=n_classes)
    if labels.min() < 0 or np.any(counts == 0):
        raise DataError("labels must cover every class in [0, n_classes)")
    return counts


def _class_means(z: np.ndarray, labels: np.ndarray, counts: np.ndarray) -> np.ndarray:
    sums = np.zeros((counts.shape[0], z.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, z)
    return sums / counts[:, None]


def ncc_repr_loss(
    z: np.ndarray, labels: np.ndarray, with_grad: bool = False
) -> tuple[float, np.ndarray | None]:
    """NCC loss of representations z; optionally also dloss/dz.

    Prototypes are the per-class means of z, so the gradient has a direct term
    and a term flowing back through the prototype of the row's own class.
    """
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels)
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("non-finite representation passed to ncc loss")
    counts = _class_counts(labels)
    protos = _class_means(z, labels, counts)
    z_hat = normalize_rows(z)
    p_hat = normalize_rows(protos)
    loss, g_logits = _softmax_ce(z_hat @ p_hat.T, labels)
    if not with_grad:
        return loss, None
    d_zhat = g_logits @ p_hat
    d_phat = g_logits.T @ z_hat
    d_z = _normalize_backward(d_zhat, z, z_hat)
    d_protos = _normalize_backward(d_phat, protos, p_hat)
    d_z += d_protos[labels] / counts[labels][:, None]
    return loss, d_z


def ncc_loss(
    support_emb: np.ndarray,
    labels: np.ndarray,
    theta: np.ndarray,
    config: LossConfig = LossConfig(),
    with_grad: bool = False,
) -> LossResult:
    """NCC loss of support embeddings under a shared linear head.

    The softmax runs over plain cosine similarities; only the SCE loss uses
    the config's temperature, NCC accepts the config for interface parity.
    """
    x = np.asarray(support_emb, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise NonFiniteError("non-finite entries in theta")
    value, d_z = ncc_repr_loss(x @ theta, labels, with_grad=with_grad)
    if not with_grad:
        return LossResult(value=value)
    return LossResult(value=value, grad_shared=x.T @ d_z)


def ncc_two_sided_loss(
    z: np.ndarray, proto_repr: np.ndarray, labels: np.ndarray, with_grad: bool = False
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """NCC loss where prototype representations are an independent input.

    Used by the two-head variants (prototype embeddings through their own
    head) and, without gradients, as the plain validation loss of a query set.
    Returns (value, dloss/dz, dloss/dproto_repr).
    """
    z = np.asarray(z, dtype=np.float64)
    protos = np.asarray(proto_repr, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= protos.shape[0]:
        raise DataError("label out of range for the prototype rows")
    z_hat = normalize_rows(z)
    p_hat = normalize_rows(protos)
    loss, g_logits = _softmax_ce(z_hat @ p_hat.T, labels)
    if not with_grad:
        return loss, None, None
    d_z = _normalize_backward(g_logits @ p_hat, z, z_hat)
    d_p = _normalize_backward(g_logits.T @ z_hat, protos, p_hat)
    return loss, d_z, d_p


def sce_loss(
    proto_repr: np.ndarray,
    image_repr: np.ndarray,
    config: LossConfig = LossConfig(),
    with_grad_inputs: bool = False,
) -> SceLossResult:
    """Symmetric cross entropy between paired prototype and image rows.

    Rows are normalized internally; logits are the scaled similarity matrix
    (1/tau) Z_I Z_P^T with diagonal pseudo-labels, scored row-wise in both
    directions and summed.
    """
    zp = np.asarray(proto_repr, dtype=np.float64)
    zi = np.asarray(image_repr, dtype=np.float64)
    if zp.shape != zi.shape or zp.ndim != 2 or zp.shape[0] < 1:
        raise DataError(f"shape mismatch: prototypes {zp.shape} vs images {zi.shape}")
    n = zp.shape[0]
    tau = config.temperature
    zp_hat = normalize_rows(zp)
    zi_hat = normalize_rows(zi)
    logits = (zi_hat @ zp_hat.T) / tau
    diag = np.arange(n)
    loss_i2p, g1 = _softmax_ce(logits, diag)
    loss_p2i, g2 = _softmax_ce(logits.T, diag)
    value = loss_i2p + loss_p2i
    if not with_grad_inputs:
        return SceLossResult(value=value)
    g_logits = g1 + g2.T
    d_zi = _normalize_backward((g_logits @ zp_hat) / tau, zi, zi_hat)
    d_zp = _normalize_backward((g_logits.T @ zi_hat) / tau, zp, zp_hat)
    return SceLossResult(value=value, grad_proto_repr=d_zp, grad_image_repr=d_zi)


def sce_head_gradients(
    support_emb: np.ndarray,
    labels: np.ndarray,
    theta_p: np.ndarray,
    theta_i: np.ndarray,
    protos: PrototypeSet,
    config: LossConfig = LossConfig(),
) -> LossResult:
    """SCE value and exact gradients for the two linear heads.

    Composes prototype expansion, the linear heads and the SCE loss; input
    gradients are chained back to dloss/dtheta_p and dloss/dtheta_i.
    """
    if protos.rule != AVERAGE:
        raise DataError("sce head gradients expect average-rule prototypes")
    x = np.asarray(support_emb, dtype=np.float64)
    expanded = expand_prototypes(protos, labels)
    result = sce_loss(expanded @ theta_p, x @ theta_i, config, with_grad_inputs=True)
    return LossResult(
        value=result.value,
        grad_proto_head=expanded.T @ result.grad_proto_repr,
        grad_image_head=x.T @ result.grad_image_repr,
    )


def _check_unit_rows(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise DataError(f"{what} rows must be unit-norm")
    return x


def ncc_lower_bound(z: np.ndarray, labels: np.ndarray, alpha: float) -> tuple[float, float]:
    """Both sides of the NCC-loss lower bound on unit-norm representations.

    The left side is the centroid-classifier loss in the exact form the bound
    is derived for: dot-product similarities against the raw (un-renormalized)
    class means of the unit rows. The right side is
    ``-(1/n) sum_i z_i.c_{y_i} + (alpha/n) sum_{i,i'} z_i.z_{i'}`` with
    ``0 <= alpha < min_j 1/(N_C |C_j|)``.
    """
    z = _check_unit_rows(z, "representation")
    labels = np.asarray(labels)
    counts = _class_counts(labels)
    n = z.shape[0]
    n_classes = counts.shape[0]
    alpha_cap = 1.0 / (n_classes * counts.max())
    if alpha < 0 or alpha >= alpha_cap:
        raise DataError(f"alpha {alpha} outside admissible range [0, {alpha_cap})")
    protos = _class_means(z, labels, counts)
    lhs, _ = _softmax_ce(z @ protos.T, labels)
    positive = float(np.sum(z * protos[labels]) / n)
    total = z.sum(axis=0)
    rhs = -positive + alpha / n * float(total @ total)
    return lhs, rhs


def sce_lower_bound(
    z: np.ndarray, c: np.ndarray, labels: np.ndarray
) -> tuple[float, float]:
    """Both sides of the SCE-loss lower bound at temperature 1.

    ``c`` holds unit-norm prototype rows expanded to pair with ``z`` (row i is
    the prototype of sample i's class). The right side is
    ``-(2/n) sum_i z_i.c_i + (2/n) sum_i sum_k (|C_k|/n) z_i.c_k``; because
    class k contributes |C_k| identical expanded rows, the weighted term is
    just the dot product of the two row sums.
    """
    z = _check_unit_rows(z, "image representation")
    c = _check_unit_rows(c, "prototype representation")
    if z.shape != c.shape:
        raise DataError(f"shape mismatch: {z.shape} vs {c.shape}")
    labels = np.asarray(labels)
    counts = _class_counts(labels)
    for k in range(counts.shape[0]):
        rows = c[labels == k]
        if np.any(np.abs(rows - rows[0]) > 1e-9):
            raise DataError(f"expanded prototype rows of class {k} are not identical")
    n = z.shape[0]
    lhs = sce_loss(c, z, LossConfig(temperature=1.0)).value
    positive = float(np.sum(z * c) / n)
    cross = float(z.sum(axis=0) @ c.sum(axis=0))
    rhs = -2.0 * positive + 2.0 / (n * n) * cross
    return lhs, rhs

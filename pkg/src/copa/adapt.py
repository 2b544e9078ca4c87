"""Per-episode adaptation loops and query classification.

Six methods share one skeleton: identity-initialized head(s) on top of frozen
embeddings, Adam with decoupled weight decay, a fixed number of steps, then
nearest-prototype classification of the query set by cosine similarity.

* ``url``: one shared linear head trained with the NCC loss; prototypes are
  recomputed from the current representations every step (for a linear head
  this equals transforming raw-average prototype embeddings).
* ``copa``: average prototypes are computed once from the raw support
  embeddings at episode start; two heads (prototype/image) are trained with
  the SCE loss. Queries go through the image head, prototypes through the
  prototype head.
* ``url_sce``: shared head, SCE loss.
* ``url_2heads`` / ``copa_ncc``: two heads, NCC loss (prototype embeddings
  through the prototype head, instances through the image head). The two
  tags describe the same computation here and share an implementation.
* ``url_mlp``: shared two-layer map Linear-BatchNorm-Linear with the NCC
  loss. The batch norm uses per-episode support-batch statistics (no running
  averages); before the first optimization step it is a passthrough, so a
  0-iteration run is exactly the identity like every other method.

Every trace records the train loss, head Frobenius norms and the gap between
the normalized instance and prototype representations; shared-linear-head
runs additionally record the gap-transfer scale sqrt(M)*||theta||_F and the
sandwich that bounds the un-normalized representation gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DivergenceError
from .gap import compute_gap, gap_bound_scalars, raw_gap_vector
from .losses import (
    LossConfig,
    ncc_repr_loss,
    ncc_two_sided_loss,
    normalize_rows,
    sce_loss,
)
from .prototypes import AVERAGE, build_prototypes, expand_prototypes

URL = "url"
COPA = "copa"
URL_SCE = "url_sce"
URL_2HEADS = "url_2heads"
COPA_NCC = "copa_ncc"
URL_MLP = "url_mlp"
METHODS = (URL, COPA, URL_SCE, URL_2HEADS, COPA_NCC, URL_MLP)

_BN_EPS = 1e-5


@dataclass(frozen=True)
class AdaptConfig:
    method: str = URL
    iterations: int = 50
    learning_rate: float = 1e-3
    weight_decay: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    temperature: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DataError(f"unknown method {self.method!r}")
        if self.iterations < 0:
            raise DataError("iterations must be >= 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise DataError("adam betas must lie in (0, 1)")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise DataError("learning rate and adam_eps must be positive")
        if self.weight_decay < 0:
            raise DataError("weight decay must be non-negative")

    def loss_config(self) -> LossConfig:
        return LossConfig(temperature=self.temperature)


class AdamState:
    """First/second moment state for one parameter, with decoupled decay."""

    def __init__(self, shape: tuple[int, ...], config: AdaptConfig):
        self.m = np.zeros(shape, dtype=np.float64)
        self.v = np.zeros(shape, dtype=np.float64)
        self.step_count = 0
        self.config = config


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update with bias correction; decay shrinks the parameter first."""
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient in adam step")
    cfg = state.config
    state.step_count += 1
    if cfg.weight_decay != 0.0:
        param = param * (1.0 - cfg.learning_rate * cfg.weight_decay)
    state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad
    state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * grad * grad
    m_hat = state.m / (1.0 - cfg.adam_beta1 ** state.step_count)
    v_hat = state.v / (1.0 - cfg.adam_beta2 ** state.step_count)
    return param - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


@dataclass(frozen=True)
class TraceStep:
    step: int
    loss: float
    head_norms: tuple[float, ...]
    gap_norm: float
    bound_scale: float | None = None
    gap_sandwich: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class AdaptTrace:
    steps: list[TraceStep] = field(default_factory=list)


@dataclass(frozen=True)
class EpisodeResult:
    method: str
    query_accuracy: float
    initial_gap: float
    final_gap: float
    final_loss: float
    query_predictions: np.ndarray
    trace: AdaptTrace


def classify_query(query_repr: np.ndarray, proto_repr: np.ndarray) -> np.ndarray:
    """Argmax cosine similarity per query row; ties go to the lowest class."""
    sims = normalize_rows(query_repr) @ normalize_rows(proto_repr).T
    return np.argmax(sims, axis=1)


def _check_finite_loss(value: float, step: int) -> None:
    if not np.isfinite(value):
        raise DivergenceError(f"loss diverged to {value} at step {step}")


def _gap_norm(instance_repr: np.ndarray, proto_repr: np.ndarray) -> float:
    return compute_gap(instance_repr, proto_repr).norm


def adapt_episode(
    support: np.ndarray,
    support_labels: np.ndarray,
    query: np.ndarray,
    query_labels: np.ndarray,
    config: AdaptConfig,
) -> EpisodeResult:
    """Run one adaptation episode under the configured method."""
    if config.method == URL:
        return _adapt_url(support, support_labels, query, query_labels, config)
    if config.method == COPA:
        return _adapt_sce(support, support_labels, query, query_labels, config, shared=False)
    if config.method == URL_SCE:
        return _adapt_sce(support, support_labels, query, query_labels, config, shared=True)
    if config.method in (URL_2HEADS, COPA_NCC):
        return _adapt_two_head_ncc(support, support_labels, query, query_labels, config)
    return _adapt_mlp(support, support_labels, query, query_labels, config)


def adapt_url(support, support_labels, query, query_labels, config: AdaptConfig) -> EpisodeResult:
    return _adapt_url(support, support_labels, query, query_labels, config)


def adapt_copa(support, support_labels, query, query_labels, config: AdaptConfig) -> EpisodeResult:
    return _adapt_sce(support, support_labels, query, query_labels, config, shared=False)


def _episode_accuracy(preds: np.ndarray, query_labels: np.ndarray) -> float:
    return float(np.sum(preds == query_labels)) / preds.shape[0]


def _initial_gap(support: np.ndarray, support_labels: np.ndarray) -> float:
    protos = build_prototypes(support, support_labels, AVERAGE)
    return _gap_norm(support, protos.prototypes)


def _adapt_url(support, support_labels, query, query_labels, config) -> EpisodeResult:
    x = np.asarray(support, dtype=np.float64)
    labels = np.asarray(support_labels)
    d = x.shape[1]
    theta = np.eye(d)
    delta_emb = raw_gap_vector(x, labels)
    emb_gap_sq = float(delta_emb @ delta_emb)
    state = AdamState((d, d), config)
    steps = []
    for step in range(config.iterations):
        z = x @ theta
        loss, d_z = ncc_repr_loss(z, labels, with_grad=True)
        _check_finite_loss(loss, step)
        steps.append(_url_trace_step(step, loss, theta, z, labels, delta_emb, emb_gap_sq))
        theta = adam_step(theta, x.T @ d_z, state)

    z = x @ theta
    final_loss, _ = ncc_repr_loss(z, labels)
    proto_repr = _class_means_of(z, labels)
    preds = classify_query(query @ theta, proto_repr)
    return EpisodeResult(
        method=config.method,
        query_accuracy=_episode_accuracy(preds, query_labels),
        initial_gap=_initial_gap(x, labels),
        final_gap=_gap_norm(z, proto_repr),
        final_loss=final_loss,
        query_predictions=preds,
        trace=AdaptTrace(steps),
    )


def _class_means_of(z: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return build_prototypes(z, labels, AVERAGE).prototypes


def _safe_bound_scalars(delta_emb: np.ndarray, theta: np.ndarray) -> tuple[float, float]:
    # A zero embedding gap (every class 1-shot) transports to a zero
    # representation gap, so the sandwich degenerates to 0 <= 0 <= 0.
    if np.linalg.norm(delta_emb) == 0.0:
        return 0.0, 0.0
    return gap_bound_scalars(delta_emb, theta)


def _url_trace_step(step, loss, theta, z, labels, delta_emb, emb_gap_sq) -> TraceStep:
    proto_repr = _class_means_of(z, labels)
    m_scalar, big_m = _safe_bound_scalars(delta_emb, theta)
    frob_sq = float(np.sum(theta * theta))
    rep_gap = z.mean(axis=0) - proto_repr.mean(axis=0)
    sandwich = (
        m_scalar * frob_sq * emb_gap_sq,
        float(rep_gap @ rep_gap),
        big_m * frob_sq * emb_gap_sq,
    )
    return TraceStep(
        step=step,
        loss=loss,
        head_norms=(float(np.sqrt(frob_sq)),),
        gap_norm=_gap_norm(z, proto_repr),
        bound_scale=float(np.sqrt(big_m * frob_sq)),
        gap_sandwich=sandwich,
    )


def _adapt_sce(support, support_labels, query, query_labels, config, shared: bool) -> EpisodeResult:
    x = np.asarray(support, dtype=np.float64)
    labels = np.asarray(support_labels)
    d = x.shape[1]
    loss_cfg = config.loss_config()
    protos = build_prototypes(x, labels, AVERAGE)  # frozen at episode start
    expanded = expand_prototypes(protos, labels)
    delta_emb = raw_gap_vector(x, labels)
    emb_gap_sq = float(delta_emb @ delta_emb)

    theta_p = np.eye(d)
    theta_i = np.eye(d)
    state_p = None if shared else AdamState((d, d), config)
    state_i = AdamState((d, d), config)
    steps = []
    for step in range(config.iterations):
        result = sce_loss(expanded @ theta_p, x @ theta_i, loss_cfg, with_grad_inputs=True)
        _check_finite_loss(result.value, step)
        grad_p = expanded.T @ result.grad_proto_repr
        grad_i = x.T @ result.grad_image_repr
        proto_repr = protos.prototypes @ theta_p
        gap_norm = _gap_norm(x @ theta_i, proto_repr)
        if shared:
            m_scalar, big_m = _safe_bound_scalars(delta_emb, theta_i)
            frob_sq = float(np.sum(theta_i * theta_i))
            rep_gap = (x @ theta_i).mean(axis=0) - proto_repr.mean(axis=0)
            steps.append(
                TraceStep(
                    step=step,
                    loss=result.value,
                    head_norms=(float(np.sqrt(frob_sq)),),
                    gap_norm=gap_norm,
                    bound_scale=float(np.sqrt(big_m * frob_sq)),
                    gap_sandwich=(
                        m_scalar * frob_sq * emb_gap_sq,
                        float(rep_gap @ rep_gap),
                        big_m * frob_sq * emb_gap_sq,
                    ),
                )
            )
            theta_i = adam_step(theta_i, grad_p + grad_i, state_i)
            theta_p = theta_i
        else:
            steps.append(
                TraceStep(
                    step=step,
                    loss=result.value,
                    head_norms=(
                        float(np.linalg.norm(theta_p)),
                        float(np.linalg.norm(theta_i)),
                    ),
                    gap_norm=gap_norm,
                )
            )
            theta_p = adam_step(theta_p, grad_p, state_p)
            theta_i = adam_step(theta_i, grad_i, state_i)

    proto_repr = protos.prototypes @ theta_p
    final = sce_loss(expanded @ theta_p, x @ theta_i, loss_cfg)
    preds = classify_query(query @ theta_i, proto_repr)
    return EpisodeResult(
        method=config.method,
        query_accuracy=_episode_accuracy(preds, query_labels),
        initial_gap=_initial_gap(x, labels),
        final_gap=_gap_norm(x @ theta_i, proto_repr),
        final_loss=final.value,
        query_predictions=preds,
        trace=AdaptTrace(steps),
    )


def _adapt_two_head_ncc(support, support_labels, query, query_labels, config) -> EpisodeResult:
    x = np.asarray(support, dtype=np.float64)
    labels = np.asarray(support_labels)
    d = x.shape[1]
    protos = build_prototypes(x, labels, AVERAGE)
    theta_p = np.eye(d)
    theta_i = np.eye(d)
    state_p = AdamState((d, d), config)
    state_i = AdamState((d, d), config)
    steps = []
    for step in range(config.iterations):
        proto_repr = protos.prototypes @ theta_p
        loss, d_z, d_p = ncc_two_sided_loss(x @ theta_i, proto_repr, labels, with_grad=True)
        _check_finite_loss(loss, step)
        steps.append(
            TraceStep(
                step=step,
                loss=loss,
                head_norms=(
                    float(np.linalg.norm(theta_p)),
                    float(np.linalg.norm(theta_i)),
                ),
                gap_norm=_gap_norm(x @ theta_i, proto_repr),
            )
        )
        theta_p = adam_step(theta_p, protos.prototypes.T @ d_p, state_p)
        theta_i = adam_step(theta_i, x.T @ d_z, state_i)

    proto_repr = protos.prototypes @ theta_p
    final_loss, _, _ = ncc_two_sided_loss(x @ theta_i, proto_repr, labels)
    preds = classify_query(query @ theta_i, proto_repr)
    return EpisodeResult(
        method=config.method,
        query_accuracy=_episode_accuracy(preds, query_labels),
        initial_gap=_initial_gap(x, labels),
        final_gap=_gap_norm(x @ theta_i, proto_repr),
        final_loss=final_loss,
        query_predictions=preds,
        trace=AdaptTrace(steps),
    )


class _MlpHead:
    """Linear-BatchNorm-Linear shared head with support-batch statistics."""

    def __init__(self, dim: int):
        self.w1 = np.eye(dim)
        self.w2 = np.eye(dim)
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.bn_active = False  # passthrough until the first training step
        self.mu = np.zeros(dim)
        self.var = np.ones(dim)

    def forward_train(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        h = x @ self.w1
        self.mu = h.mean(axis=0)
        self.var = h.var(axis=0)
        self.bn_active = True
        inv_std = 1.0 / np.sqrt(self.var + _BN_EPS)
        h_norm = (h - self.mu) * inv_std
        bn_out = self.gamma * h_norm + self.beta
        out = bn_out @ self.w2
        cache = {"x": x, "h_norm": h_norm, "inv_std": inv_std, "bn_out": bn_out}
        return out, cache

    def backward(self, d_out: np.ndarray, cache: dict) -> dict:
        d_bn_out = d_out @ self.w2.T
        grads = {
            "w2": cache["bn_out"].T @ d_out,
            "gamma": np.sum(d_bn_out * cache["h_norm"], axis=0),
            "beta": np.sum(d_bn_out, axis=0),
        }
        d_hnorm = d_bn_out * self.gamma
        h_norm = cache["h_norm"]
        d_h = (
            d_hnorm
            - d_hnorm.mean(axis=0)
            - h_norm * np.mean(d_hnorm * h_norm, axis=0)
        ) * cache["inv_std"]
        grads["w1"] = cache["x"].T @ d_h
        return grads

    def forward_eval(self, x: np.ndarray) -> np.ndarray:
        """Apply the head with the most recent support-batch statistics."""
        h = x @ self.w1
        if not self.bn_active:
            return h @ self.w2
        h_norm = (h - self.mu) / np.sqrt(self.var + _BN_EPS)
        return (self.gamma * h_norm + self.beta) @ self.w2


def _adapt_mlp(support, support_labels, query, query_labels, config) -> EpisodeResult:
    x = np.asarray(support, dtype=np.float64)
    labels = np.asarray(support_labels)
    d = x.shape[1]
    head = _MlpHead(d)
    states = {
        "w1": AdamState((d, d), config),
        "w2": AdamState((d, d), config),
        "gamma": AdamState((d,), config),
        "beta": AdamState((d,), config),
    }
    steps = []
    for step in range(config.iterations):
        out, cache = head.forward_train(x)
        loss, d_out = ncc_repr_loss(out, labels, with_grad=True)
        _check_finite_loss(loss, step)
        steps.append(
            TraceStep(
                step=step,
                loss=loss,
                head_norms=(
                    float(np.linalg.norm(head.w1)),
                    float(np.linalg.norm(head.w2)),
                ),
                gap_norm=_gap_norm(out, _class_means_of(out, labels)),
            )
        )
        grads = head.backward(d_out, cache)
        head.w1 = adam_step(head.w1, grads["w1"], states["w1"])
        head.w2 = adam_step(head.w2, grads["w2"], states["w2"])
        head.gamma = adam_step(head.gamma, grads["gamma"], states["gamma"])
        head.beta = adam_step(head.beta, grads["beta"], states["beta"])

    if config.iterations > 0:
        out, _ = head.forward_train(x)  # refresh batch stats at final params
    else:
        out = head.forward_eval(x)
    final_loss, _ = ncc_repr_loss(out, labels)
    proto_repr = _class_means_of(out, labels)
    preds = classify_query(head.forward_eval(query), proto_repr)
    return EpisodeResult(
        method=config.method,
        query_accuracy=_episode_accuracy(preds, query_labels),
        initial_gap=_initial_gap(x, labels),
        final_gap=_gap_norm(out, proto_repr),
        final_loss=final_loss,
        query_predictions=preds,
        trace=AdaptTrace(steps),
    )

import numpy as np
import pytest

from copa import (
    AdaptConfig,
    AdamState,
    DataError,
    DivergenceError,
    METHODS,
    Rng,
    SynthSpec,
    TaskProtocol,
    adam_step,
    adapt_episode,
    classify_query,
    episode_views,
    generate_synthetic,
    ncc_repr_loss,
    sample_episode,
)
from copa.adapt import _MlpHead

from conftest import central_difference, gaussian_matrix, relative_error


def episode(emb, seed=3, index=0, kind="vary_way_vary_shot"):
    task = sample_episode(emb, TaskProtocol(kind=kind, seed=seed), index)
    return episode_views(emb, task)


# ---------------------------------------------------------------- adam


def test_adam_first_step_closed_form():
    cfg = AdaptConfig(weight_decay=0.0, learning_rate=0.01)
    state = AdamState((1,), cfg)
    param = adam_step(np.zeros(1), np.ones(1), state)
    # bias-corrected first step moves by lr/(1+eps)
    assert abs(param[0] + 0.01 / (1.0 + cfg.adam_eps)) < 1e-15


def test_adam_zero_gradient_keeps_param():
    cfg = AdaptConfig(weight_decay=0.0)
    state = AdamState((2, 2), cfg)
    param = np.full((2, 2), 3.0)
    out = adam_step(param, np.zeros((2, 2)), state)
    assert np.array_equal(out, param)
    assert np.all(state.m == 0.0) and np.all(state.v == 0.0)
    assert state.step_count == 1


def test_adam_weight_decay_shrinks_before_update():
    cfg = AdaptConfig(weight_decay=0.5, learning_rate=0.1)
    state = AdamState((1,), cfg)
    out = adam_step(np.array([2.0]), np.zeros(1), state)
    assert abs(out[0] - 2.0 * (1.0 - 0.1 * 0.5)) < 1e-15


def test_adam_descends_quadratic():
    # direct simulation oracle: 10 steps on ||param - A||^2 decrease the objective
    rng = Rng(2)
    target = gaussian_matrix(rng, 4, 4)
    param = np.zeros((4, 4))
    cfg = AdaptConfig(weight_decay=0.0, learning_rate=0.05)
    state = AdamState((4, 4), cfg)
    values = []
    for _ in range(10):
        values.append(float(np.sum((param - target) ** 2)))
        param = adam_step(param, 2.0 * (param - target), state)
    values.append(float(np.sum((param - target) ** 2)))
    assert all(b < a for a, b in zip(values, values[1:]))


def test_adam_rejects_non_finite_gradient():
    state = AdamState((1,), AdaptConfig())
    with pytest.raises(DivergenceError):
        adam_step(np.zeros(1), np.array([np.nan]), state)


# ------------------------------------------------------- classification


def test_classify_exact_prototype_match():
    protos = np.eye(3)
    queries = np.array([protos[2] * 4.0])
    assert classify_query(queries, protos)[0] == 2


def test_classify_tie_takes_lowest_class():
    protos = np.array([[1.0, 0.0], [0.0, 1.0]])
    queries = np.array([[1.0, 1.0]])  # equidistant
    assert classify_query(queries, protos)[0] == 0


def test_classify_matches_brute_force():
    rng = Rng(4)
    queries = gaussian_matrix(rng, 10, 6)
    protos = gaussian_matrix(rng, 4, 6)
    preds = classify_query(queries, protos)
    for i in range(10):
        sims = [
            float(queries[i] @ protos[c])
            / (np.linalg.norm(queries[i]) * np.linalg.norm(protos[c]))
            for c in range(4)
        ]
        assert preds[i] == int(np.argmax(sims))


# ------------------------------------------------------------ episodes


@pytest.fixture(scope="module")
def views(small_set):
    return episode(small_set)


def test_zero_iterations_identity_baseline(views):
    support, s_labels, query, q_labels = views
    reference = None
    for method in METHODS:
        cfg = AdaptConfig(method=method, iterations=0)
        result = adapt_episode(support, s_labels, query, q_labels, cfg)
        if reference is None:
            reference = result.query_predictions
        assert np.array_equal(result.query_predictions, reference), method
        # identity transform: representation gap equals embedding gap exactly
        assert result.final_gap == result.initial_gap, method
        assert result.trace.steps == []


def test_positive_rescaling_preserves_iteration0_predictions(views):
    support, s_labels, query, q_labels = views
    cfg = AdaptConfig(method="url", iterations=0)
    a = adapt_episode(support, s_labels, query, q_labels, cfg)
    b = adapt_episode(support * 3.7, s_labels, query * 3.7, q_labels, cfg)
    assert np.array_equal(a.query_predictions, b.query_predictions)


def test_episode_results_are_deterministic(views):
    support, s_labels, query, q_labels = views
    for method in ("url", "copa", "url_mlp"):
        cfg = AdaptConfig(method=method, iterations=7)
        a = adapt_episode(support, s_labels, query, q_labels, cfg)
        b = adapt_episode(support, s_labels, query, q_labels, cfg)
        assert a.query_accuracy == b.query_accuracy
        assert a.final_gap == b.final_gap
        assert a.final_loss == b.final_loss
        assert np.array_equal(a.query_predictions, b.query_predictions)
        assert [s.loss for s in a.trace.steps] == [s.loss for s in b.trace.steps]


def test_separable_clusters_reach_full_accuracy():
    emb = generate_synthetic(
        SynthSpec(dim=16, n_classes=6, samples_per_class=20,
                  cluster_spread=0.0, cone_offset=0.2, seed=5)
    )
    support, s_labels, query, q_labels = episode(emb, seed=1)
    for method in ("url", "copa"):
        cfg = AdaptConfig(method=method, iterations=3)
        result = adapt_episode(support, s_labels, query, q_labels, cfg)
        assert result.query_accuracy == 1.0


def test_trace_records_one_entry_per_step(views):
    support, s_labels, query, q_labels = views
    cfg = AdaptConfig(method="url", iterations=6)
    result = adapt_episode(support, s_labels, query, q_labels, cfg)
    assert [s.step for s in result.trace.steps] == list(range(6))
    assert all(np.isfinite(s.loss) for s in result.trace.steps)
    # step0 is the identity head: gap equals embedding gap, scale sqrt(M*d)
    first = result.trace.steps[0]
    assert first.head_norms[0] == pytest.approx(np.sqrt(support.shape[1]))
    assert first.gap_norm == result.initial_gap


def test_url_trace_sandwich_holds_every_step(views):
    support, s_labels, query, q_labels = views
    cfg = AdaptConfig(method="url", iterations=25)
    result = adapt_episode(support, s_labels, query, q_labels, cfg)
    for step in result.trace.steps:
        lower, middle, upper = step.gap_sandwich
        slack = 1e-9 * max(1.0, abs(lower), abs(middle), abs(upper))
        assert lower <= middle + slack
        assert middle <= upper + slack
        assert step.bound_scale is not None and np.isfinite(step.bound_scale)


def test_two_head_methods_share_semantics(views):
    support, s_labels, query, q_labels = views
    a = adapt_episode(support, s_labels, query, q_labels,
                      AdaptConfig(method="url_2heads", iterations=5))
    b = adapt_episode(support, s_labels, query, q_labels,
                      AdaptConfig(method="copa_ncc", iterations=5))
    assert a.query_accuracy == b.query_accuracy
    assert np.array_equal(a.query_predictions, b.query_predictions)


def test_sce_methods_track_two_heads_in_trace(views):
    support, s_labels, query, q_labels = views
    result = adapt_episode(support, s_labels, query, q_labels,
                           AdaptConfig(method="copa", iterations=4))
    for step in result.trace.steps:
        assert len(step.head_norms) == 2
        assert step.bound_scale is None

    shared = adapt_episode(support, s_labels, query, q_labels,
                           AdaptConfig(method="url_sce", iterations=4))
    for step in shared.trace.steps:
        assert len(step.head_norms) == 1
        assert step.bound_scale is not None


def test_fiveway_1shot_episode_runs(small_set):
    support, s_labels, query, q_labels = episode(small_set, kind="fiveway_1shot")
    assert support.shape[0] == 5
    for method in ("url", "copa"):
        result = adapt_episode(support, s_labels, query, q_labels,
                               AdaptConfig(method=method, iterations=10))
        assert np.isfinite(result.final_loss)
        assert 0.0 <= result.query_accuracy <= 1.0


@pytest.mark.filterwarnings("ignore:invalid value encountered:RuntimeWarning")
@pytest.mark.filterwarnings("ignore:overflow encountered:RuntimeWarning")
def test_divergence_is_an_error_not_a_result():
    # cosine normalization keeps the losses bounded for sane inputs, so real
    # divergence needs an overflow: class sums beyond float range turn the
    # prototype average into inf and the loss into NaN, which must abort
    support = np.full((12, 4), 1.0)
    support[:4] = 1e308  # class 0 sums overflow to inf
    s_labels = np.array([0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2])
    query = np.ones((3, 4))
    q_labels = np.array([0, 1, 2])
    cfg = AdaptConfig(method="url", iterations=5)
    with pytest.raises(DivergenceError, match="step 0"):
        adapt_episode(support, s_labels, query, q_labels, cfg)


def test_config_validation():
    with pytest.raises(DataError):
        AdaptConfig(method="finetune")
    with pytest.raises(DataError):
        AdaptConfig(iterations=-1)
    with pytest.raises(DataError):
        AdaptConfig(adam_beta1=1.0)
    with pytest.raises(DataError):
        AdaptConfig(learning_rate=0.0)
    with pytest.raises(DataError):
        AdaptConfig(weight_decay=-0.1)


# ----------------------------------------------------------------- mlp


def test_mlp_gradients_match_finite_differences():
    rng = Rng(6)
    labels = np.array([0, 0, 1, 1, 2, 2, 2])
    x = gaussian_matrix(rng, 7, 5)
    head = _MlpHead(5)
    # move off the identity so batch-norm statistics matter
    head.w1 = np.eye(5) + 0.1 * gaussian_matrix(rng, 5, 5)
    head.w2 = np.eye(5) + 0.1 * gaussian_matrix(rng, 5, 5)
    head.gamma = 1.0 + 0.1 * np.array(rng.normals(5))
    head.beta = 0.1 * np.array(rng.normals(5))

    out, cache = head.forward_train(x)
    _, d_out = ncc_repr_loss(out, labels, with_grad=True)
    grads = head.backward(d_out, cache)

    def loss_with(param_name, value):
        probe = _MlpHead(5)
        probe.w1, probe.w2 = head.w1.copy(), head.w2.copy()
        probe.gamma, probe.beta = head.gamma.copy(), head.beta.copy()
        setattr(probe, param_name, value)
        out_probe, _ = probe.forward_train(x)
        return ncc_repr_loss(out_probe, labels)[0]

    for name in ("w1", "w2", "gamma", "beta"):
        numeric = central_difference(
            lambda v, name=name: loss_with(name, v), getattr(head, name).copy()
        )
        assert relative_error(grads[name], numeric) <= 1e-4, name


def test_mlp_is_passthrough_before_training():
    head = _MlpHead(4)
    x = np.arange(12, dtype=np.float64).reshape(3, 4)
    assert np.array_equal(head.forward_eval(x), x)
    head.forward_train(x)
    assert head.bn_active
    assert not np.array_equal(head.forward_eval(x * 2.0 + 5.0), x * 2.0 + 5.0)


def test_mlp_adaptation_improves_over_identity(small_set):
    support, s_labels, query, q_labels = episode(small_set, seed=8)
    base = adapt_episode(support, s_labels, query, q_labels,
                         AdaptConfig(method="url_mlp", iterations=0))
    trained = adapt_episode(support, s_labels, query, q_labels,
                            AdaptConfig(method="url_mlp", iterations=30))
    assert np.isfinite(trained.final_loss)
    assert trained.final_loss < base.final_loss

import math

import numpy as np
import pytest

from copa import (
    DataError,
    LossConfig,
    Rng,
    build_prototypes,
    ncc_loss,
    ncc_lower_bound,
    ncc_repr_loss,
    ncc_two_sided_loss,
    normalize_rows,
    sce_head_gradients,
    sce_loss,
    sce_lower_bound,
)

from conftest import central_difference, gaussian_matrix, random_labels, relative_error

ORTHO_LOSS = math.log(1.0 + math.exp(-1.0))  # 0.313261...


def test_ncc_orthonormal_closed_form():
    support = np.eye(2)
    labels = np.array([0, 1])
    result = ncc_loss(support, labels, np.eye(2))
    assert abs(result.value - ORTHO_LOSS) < 1e-12
    assert abs(result.value - 0.313262) < 1e-6


def test_ncc_single_class_is_zero():
    rng = Rng(1)
    z = gaussian_matrix(rng, 4, 3)
    value, _ = ncc_repr_loss(z, np.zeros(4, dtype=int))
    assert value == 0.0


def test_ncc_gradient_matches_finite_differences():
    rng = Rng(2)
    for trial in range(30):
        d = (4, 8, 16)[rng.randint(3)]
        labels = random_labels(rng, 3, max_per_class=3)
        while labels.shape[0] < 3:
            labels = random_labels(rng, 3, max_per_class=3)
        support = gaussian_matrix(rng, labels.shape[0], d)
        theta = gaussian_matrix(rng, d, d)
        analytic = ncc_loss(support, labels, theta, with_grad=True).grad_shared
        numeric = central_difference(
            lambda t: ncc_loss(support, labels, t).value, theta.copy()
        )
        assert relative_error(analytic, numeric) <= 1e-4


def test_ncc_invariant_to_orthogonal_rotation():
    rng = Rng(3)
    labels = random_labels(rng, 4, max_per_class=4)
    z = gaussian_matrix(rng, labels.shape[0], 6)
    rotation, _ = np.linalg.qr(gaussian_matrix(rng, 6, 6))
    a, _ = ncc_repr_loss(z, labels)
    b, _ = ncc_repr_loss(z @ rotation, labels)
    assert abs(a - b) < 1e-10


def test_ncc_invariant_to_row_scaling():
    rng = Rng(4)
    labels = np.array([0, 0, 1, 1, 2])
    z = gaussian_matrix(rng, 5, 4)
    a, _ = ncc_repr_loss(z, labels)
    # NCC recomputes prototypes from z, so scale the whole set uniformly
    b, _ = ncc_repr_loss(z * 7.3, labels)
    assert abs(a - b) < 1e-10
    # the two-sided form allows per-row scaling of either side
    protos = gaussian_matrix(rng, 3, 4)
    scales = np.array([1.0, 2.0, 0.5, 9.0, 3.0])[:, None]
    a2, _, _ = ncc_two_sided_loss(z, protos, labels)
    b2, _, _ = ncc_two_sided_loss(z * scales, protos * 2.0, labels)
    assert abs(a2 - b2) < 1e-10


def test_ncc_zero_norm_row_rejected():
    z = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DataError, match="zero-norm"):
        ncc_repr_loss(z, np.array([0, 1]))


def test_sce_orthonormal_closed_form():
    z = np.eye(2)
    result = sce_loss(z, z, LossConfig(temperature=1.0))
    assert abs(result.value - 2.0 * ORTHO_LOSS) < 1e-12
    assert abs(result.value - 0.626523) < 1e-6


def test_sce_single_pair_is_zero():
    z = np.array([[0.3, 0.4]])
    result = sce_loss(z, z * 2.0, LossConfig(temperature=0.5))
    assert result.value == 0.0


def test_sce_symmetric_in_arguments():
    rng = Rng(5)
    zp = gaussian_matrix(rng, 6, 5)
    zi = gaussian_matrix(rng, 6, 5)
    cfg = LossConfig(temperature=0.37)
    assert abs(sce_loss(zp, zi, cfg).value - sce_loss(zi, zp, cfg).value) < 1e-12


def test_sce_row_scaling_invariance():
    rng = Rng(6)
    zp = gaussian_matrix(rng, 5, 4)
    zi = gaussian_matrix(rng, 5, 4)
    scales = np.abs(gaussian_matrix(rng, 5, 1)) + 0.1
    a = sce_loss(zp, zi).value
    b = sce_loss(zp * scales, zi * (3.0 * scales[::-1])).value
    assert abs(a - b) < 1e-10


def test_sce_input_gradients_match_finite_differences():
    rng = Rng(7)
    for trial in range(20):
        n, d = 6, 8
        zp = gaussian_matrix(rng, n, d)
        zi = gaussian_matrix(rng, n, d)
        cfg = LossConfig(temperature=0.5)
        result = sce_loss(zp, zi, cfg, with_grad_inputs=True)
        num_p = central_difference(lambda m: sce_loss(m, zi, cfg).value, zp.copy())
        num_i = central_difference(lambda m: sce_loss(zp, m, cfg).value, zi.copy())
        assert relative_error(result.grad_proto_repr, num_p) <= 1e-4
        assert relative_error(result.grad_image_repr, num_i) <= 1e-4


def test_sce_shape_mismatch_rejected():
    with pytest.raises(DataError, match="shape"):
        sce_loss(np.ones((2, 3)), np.ones((3, 3)))


def test_sce_head_gradients_match_finite_differences():
    rng = Rng(8)
    cfg = LossConfig(temperature=0.3)
    for trial in range(15):
        d = (4, 8)[rng.randint(2)]
        labels = random_labels(rng, 3, max_per_class=4)
        support = gaussian_matrix(rng, labels.shape[0], d)
        protos = build_prototypes(support, labels)
        theta_p = gaussian_matrix(rng, d, d)
        theta_i = gaussian_matrix(rng, d, d)
        result = sce_head_gradients(support, labels, theta_p, theta_i, protos, cfg)

        def value_at(tp, ti):
            return sce_head_gradients(support, labels, tp, ti, protos, cfg).value

        num_p = central_difference(lambda t: value_at(t, theta_i), theta_p.copy())
        num_i = central_difference(lambda t: value_at(theta_p, t), theta_i.copy())
        assert relative_error(result.grad_proto_head, num_p) <= 1e-4
        assert relative_error(result.grad_image_head, num_i) <= 1e-4


def test_sce_head_identity_equals_raw_sce(small_set):
    from copa import TaskProtocol, episode_views, sample_episode
    from copa.prototypes import expand_prototypes

    task = sample_episode(small_set, TaskProtocol(seed=2), 0)
    support, labels, _, _ = episode_views(small_set, task)
    protos = build_prototypes(support, labels)
    eye = np.eye(small_set.dim)
    cfg = LossConfig()
    via_heads = sce_head_gradients(support, labels, eye, eye, protos, cfg)
    raw = sce_loss(expand_prototypes(protos, labels), support, cfg)
    assert via_heads.value == raw.value


def test_duplicated_rows_shift_sce_by_2ln2_and_leave_ncc_unchanged():
    # Doubling every row doubles each contrastive denominator (the duplicate
    # contributes an identical logit column), so each CE term grows by
    # exactly log 2; the per-row-mean NCC loss is genuinely unchanged.
    rng = Rng(9)
    labels = random_labels(rng, 3, max_per_class=4)
    support = gaussian_matrix(rng, labels.shape[0], 5)
    cfg = LossConfig(temperature=0.7)
    protos = build_prototypes(support, labels)
    theta_p = gaussian_matrix(rng, 5, 5)
    theta_i = gaussian_matrix(rng, 5, 5)
    base = sce_head_gradients(support, labels, theta_p, theta_i, protos, cfg).value

    doubled = np.concatenate([support, support])
    doubled_labels = np.concatenate([labels, labels])
    protos2 = build_prototypes(doubled, doubled_labels)
    dup = sce_head_gradients(doubled, doubled_labels, theta_p, theta_i, protos2, cfg).value
    assert abs(dup - base - 2.0 * math.log(2.0)) < 1e-10

    theta = gaussian_matrix(rng, 5, 5)
    ncc_base = ncc_loss(support, labels, theta).value
    ncc_dup = ncc_loss(doubled, doubled_labels, theta).value
    assert abs(ncc_base - ncc_dup) < 1e-10


def test_ncc_two_sided_gradients_match_finite_differences():
    rng = Rng(10)
    for trial in range(15):
        labels = random_labels(rng, 3, max_per_class=4)
        z = gaussian_matrix(rng, labels.shape[0], 6)
        protos = gaussian_matrix(rng, 3, 6)
        _, d_z, d_p = ncc_two_sided_loss(z, protos, labels, with_grad=True)
        num_z = central_difference(
            lambda m: ncc_two_sided_loss(m, protos, labels)[0], z.copy()
        )
        num_p = central_difference(
            lambda m: ncc_two_sided_loss(z, m, labels)[0], protos.copy()
        )
        assert relative_error(d_z, num_z) <= 1e-4
        assert relative_error(d_p, num_p) <= 1e-4


def test_ncc_lower_bound_orthonormal_case():
    z = np.eye(2)
    labels = np.array([0, 1])
    lhs, rhs = ncc_lower_bound(z, labels, 0.0)
    assert abs(lhs - ORTHO_LOSS) < 1e-12
    assert rhs == -1.0
    assert lhs >= rhs


def test_ncc_lower_bound_alpha_zero_is_negative_mean_positive_similarity():
    rng = Rng(11)
    labels = random_labels(rng, 3, max_per_class=4)
    z = normalize_rows(gaussian_matrix(rng, labels.shape[0], 5))
    protos = build_prototypes(z, labels).prototypes
    _, rhs = ncc_lower_bound(z, labels, 0.0)
    expected = -float(np.mean(np.sum(z * protos[labels], axis=1)))
    assert abs(rhs - expected) < 1e-12


def test_ncc_lower_bound_alpha_range_enforced():
    z = normalize_rows(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    labels = np.array([0, 1, 1])
    cap = 1.0 / (2 * 2)
    with pytest.raises(DataError, match="alpha"):
        ncc_lower_bound(z, labels, cap)
    with pytest.raises(DataError, match="alpha"):
        ncc_lower_bound(z, labels, -0.1)
    ncc_lower_bound(z, labels, 0.99 * cap)  # admissible


def test_ncc_lower_bound_requires_unit_rows():
    with pytest.raises(DataError, match="unit-norm"):
        ncc_lower_bound(np.array([[2.0, 0.0]]), np.array([0]), 0.0)


def test_ncc_lower_bound_holds_on_random_instances():
    rng = Rng(12)
    for trial in range(1000):
        d = (4, 8, 16)[rng.randint(3)]
        labels = random_labels(rng, rng.randrange(2, 5), max_per_class=5)
        z = normalize_rows(gaussian_matrix(rng, labels.shape[0], d))
        n_classes = int(labels.max()) + 1
        alpha = 0.5 / (n_classes * int(np.bincount(labels).max()))
        lhs, rhs = ncc_lower_bound(z, labels, alpha)
        assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs), abs(rhs))


def test_sce_lower_bound_closed_forms():
    # single positive pair: both sides are exactly zero
    z = np.array([[1.0, 0.0]])
    lhs, rhs = sce_lower_bound(z, z.copy(), np.array([0]))
    assert lhs == 0.0 and rhs == 0.0

    # orthonormal two-class case
    z = np.eye(2)
    lhs, rhs = sce_lower_bound(z, z.copy(), np.array([0, 1]))
    assert abs(lhs - 2.0 * ORTHO_LOSS) < 1e-12
    assert abs(rhs - (-1.0)) < 1e-12
    assert lhs >= rhs


def test_sce_lower_bound_holds_on_random_instances():
    rng = Rng(13)
    for trial in range(1000):
        d = (4, 8, 16)[rng.randint(3)]
        labels = random_labels(rng, rng.randrange(2, 5), max_per_class=5)
        n_classes = int(labels.max()) + 1
        z = normalize_rows(gaussian_matrix(rng, labels.shape[0], d))
        protos = normalize_rows(gaussian_matrix(rng, n_classes, d))
        lhs, rhs = sce_lower_bound(z, protos[labels], labels)
        assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs), abs(rhs))


def test_loss_config_validation():
    with pytest.raises(DataError):
        LossConfig(temperature=0.0)
    with pytest.raises(DataError):
        LossConfig(similarity="euclidean")

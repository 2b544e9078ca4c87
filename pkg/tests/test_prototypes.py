import numpy as np
import pytest

from copa import DataError, Rng, build_prototypes, expand_prototypes
from copa.prototypes import AVERAGE, MAX, MAX_SAMPLE

from conftest import gaussian_matrix, random_labels


def test_max_rule_elementwise():
    support = np.array([[1.0, 0.0], [0.0, 1.0]])
    protos = build_prototypes(support, np.array([0, 0]), MAX)
    assert np.array_equal(protos.prototypes[0], [1.0, 1.0])


def test_single_sample_class_all_rules_agree():
    support = np.array([[0.3, -0.7, 2.0], [5.0, 1.0, 1.0]])
    labels = np.array([0, 1])
    for rule in (AVERAGE, MAX, MAX_SAMPLE):
        protos = build_prototypes(support, labels, rule)
        assert np.array_equal(protos.prototypes, support)


def test_max_sample_picks_highest_similarity_row():
    # unit rows; similarity row sums are 1.8, 2.4, 1.6
    support = np.array([[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    labels = np.array([0, 0, 0])
    sims = support @ support.T
    assert np.allclose(sims.sum(axis=1), [1.8, 2.4, 1.6])
    protos = build_prototypes(support, labels, MAX_SAMPLE)
    assert np.array_equal(protos.prototypes[0], [0.8, 0.6])


def test_max_sample_matches_brute_force():
    rng = Rng(17)
    for trial in range(25):
        labels = random_labels(rng, 4, max_per_class=6)
        support = gaussian_matrix(rng, labels.shape[0], 5)
        protos = build_prototypes(support, labels, MAX_SAMPLE)
        for c in range(4):
            members = support[labels == c]
            normed = members / np.linalg.norm(members, axis=1, keepdims=True)
            sums = (normed @ normed.T).sum(axis=1)
            assert np.array_equal(protos.prototypes[c], members[np.argmax(sums)])


def test_max_sample_tie_takes_lowest_index():
    # two identical rows: equal sums, index 0 wins
    support = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    protos = build_prototypes(support, np.array([0, 0, 0]), MAX_SAMPLE)
    assert np.array_equal(protos.prototypes[0], support[0])


def test_max_rule_dominates_members():
    rng = Rng(23)
    labels = random_labels(rng, 5, max_per_class=7)
    support = gaussian_matrix(rng, labels.shape[0], 6)
    protos = build_prototypes(support, labels, MAX)
    for c in range(5):
        assert np.all(protos.prototypes[c] >= support[labels == c])


def test_class_counts_sum_to_support_size():
    rng = Rng(29)
    labels = random_labels(rng, 6)
    support = gaussian_matrix(rng, labels.shape[0], 4)
    protos = build_prototypes(support, labels)
    assert protos.class_counts.sum() == labels.shape[0]
    assert np.array_equal(protos.class_counts, np.bincount(labels))


def test_average_rule_commutes_with_linear_transform():
    # prototype-then-transform equals transform-then-prototype
    rng = Rng(31)
    for trial in range(20):
        labels = random_labels(rng, 4, max_per_class=6)
        support = gaussian_matrix(rng, labels.shape[0], 8)
        theta = gaussian_matrix(rng, 8, 8)
        left = build_prototypes(support @ theta, labels, AVERAGE).prototypes
        right = build_prototypes(support, labels, AVERAGE).prototypes @ theta
        assert np.max(np.abs(left - right)) < 1e-6


def test_expand_gathers_by_label():
    support = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 2.0]])
    labels = np.array([0, 0, 1])
    protos = build_prototypes(support, labels)
    expanded = expand_prototypes(protos, labels)
    assert np.array_equal(expanded, [[2.0, 0.0], [2.0, 0.0], [0.0, 2.0]])


def test_expand_permutation_case():
    support = np.arange(8, dtype=np.float64).reshape(4, 2)
    labels = np.array([2, 0, 3, 1])
    protos = build_prototypes(support, labels)
    expanded = expand_prototypes(protos, labels)
    assert np.array_equal(expanded, support)


def test_expand_weighted_column_means_reproduce_support_mean():
    rng = Rng(37)
    labels = random_labels(rng, 5, max_per_class=8)
    support = gaussian_matrix(rng, labels.shape[0], 6)
    expanded = expand_prototypes(build_prototypes(support, labels), labels)
    # direct summation oracle: sum of expanded rows = sum over classes of
    # |C_k| * mean_k = plain support sum
    assert np.allclose(expanded.sum(axis=0), support.sum(axis=0))
    assert np.allclose(expanded.mean(axis=0), support.mean(axis=0))


def test_errors():
    support = np.ones((3, 2))
    with pytest.raises(DataError):
        build_prototypes(support, np.array([0, 0, 2]))  # class 1 empty
    with pytest.raises(DataError):
        build_prototypes(support, np.array([0, 1, 1]), "median")
    bad = support.copy()
    bad[0, 0] = np.inf
    with pytest.raises(DataError):
        build_prototypes(bad, np.array([0, 1, 1]))
    protos = build_prototypes(support, np.array([0, 0, 1]))
    with pytest.raises(DataError):
        expand_prototypes(protos, np.array([0, 2]))

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial.distance import cdist

from pfkernel.core.kernels import GramMatrix, PFParams
from pfkernel.modules.learn import (
    KfdrConfig,
    LabeledGram,
    kfdr_argmax,
    kfdr_scan,
    kfdr_score,
    smo_binary,
    svm_decision,
    svm_predict,
    svm_train,
)
from pfkernel.utils.errors import DimensionMismatchError, IndefiniteGramError, TrainingError

PARAMS = PFParams(t=1.0, sigma=1.0)

TRAIN_X = np.array([[-2.0, 0.0], [-1.5, 0.5], [-1.0, -0.5], [1.0, 0.0], [1.5, 0.5], [2.0, -0.5]])
TRAIN_Y = np.array([0, 0, 0, 1, 1, 1])


def labeled(values, labels):
    ids = [str(k) for k in range(len(labels))]
    return LabeledGram(GramMatrix(np.asarray(values, dtype=float), PARAMS, ids), np.asarray(labels))


def block_gram(sizes, within=1.0, across=0.1):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    K = np.where(labels[:, None] == labels[None, :], within, across)
    return K, labels


def rbf(a, b, gamma=0.5):
    return np.exp(-gamma * cdist(a, b, "sqeuclidean"))


def test_separable_two_class():
    K = TRAIN_X @ TRAIN_X.T
    model = svm_train(labeled(K, TRAIN_Y), C=10.0)
    assert len(model.machines) == 1
    assert model.machines[0].converged
    np.testing.assert_array_equal(svm_predict(model, K), TRAIN_Y)


def test_dual_objective_is_non_decreasing():
    K = rbf(TRAIN_X, TRAIN_X)
    y = np.where(TRAIN_Y == 0, 1.0, -1.0)
    alpha, bias, n_iter, converged, trace = smo_binary(K, y, C=1.0, tol=1e-3, max_iter=10_000)
    assert converged and n_iter == len(trace)
    assert np.all(np.diff(trace) >= -1e-12)
    assert np.all((alpha >= 0) & (alpha <= 1.0))
    assert abs(alpha @ y) <= 1e-12


def test_iteration_cap_is_reported():
    K = rbf(TRAIN_X, TRAIN_X)
    y = np.where(TRAIN_Y == 0, 1.0, -1.0)
    _, _, n_iter, converged, _ = smo_binary(K, y, C=1.0, tol=1e-3, max_iter=1)
    assert n_iter == 1 and not converged


def test_three_class_block_structure():
    K, labels = block_gram([2, 2, 2])
    model = svm_train(labeled(K, labels), C=10.0)
    assert len(model.machines) == 3
    np.testing.assert_array_equal(svm_predict(model, K), labels)

    held_out = np.where(np.arange(3)[:, None] == labels[None, :], 1.0, 0.1)
    np.testing.assert_array_equal(svm_predict(model, held_out), [0, 1, 2])


def test_zero_cross_gram_is_deterministic():
    K, labels = block_gram([2, 2, 2])
    model = svm_train(labeled(K, labels), C=10.0)
    first = svm_predict(model, np.zeros((4, 6)))
    assert len(set(first.tolist())) == 1
    np.testing.assert_array_equal(first, svm_predict(model, np.zeros((4, 6))))


def test_prediction_is_invariant_to_training_order(rng):
    test_x = np.array([[-1.8, 0.2], [1.7, -0.1], [-0.9, 0.0], [0.9, 0.3]])
    base = svm_predict(svm_train(labeled(rbf(TRAIN_X, TRAIN_X), TRAIN_Y), C=1.0), rbf(test_x, TRAIN_X))
    perm = rng.permutation(6)
    x = TRAIN_X[perm]
    shuffled = svm_predict(svm_train(labeled(rbf(x, x), TRAIN_Y[perm]), C=1.0), rbf(test_x, x))
    np.testing.assert_array_equal(base, shuffled)
    np.testing.assert_array_equal(base, [0, 1, 0, 1])


def test_training_errors():
    K = np.eye(4)
    with pytest.raises(TrainingError):
        svm_train(labeled(K, [1, 1, 1, 1]), C=1.0)
    with pytest.raises(TrainingError):
        svm_train(labeled(K, [0, 0, 1, 1]), C=0.0)
    bad = K.copy()
    bad[0, 1] = bad[1, 0] = np.nan
    with pytest.raises(TrainingError):
        svm_train(labeled(bad, [0, 0, 1, 1]), C=1.0)
    with pytest.raises(IndefiniteGramError):
        svm_train(labeled([[1.0, 2.0], [2.0, 1.0]], [0, 1]), C=1.0)
    with pytest.raises(DimensionMismatchError):
        LabeledGram(GramMatrix(K, PARAMS, list("abcd")), np.array([0, 1]))


def test_decision_dimension_mismatch():
    K, labels = block_gram([2, 2])
    model = svm_train(labeled(K, labels), C=1.0)
    assert svm_decision(model, K).shape == (4, 1)
    with pytest.raises(DimensionMismatchError):
        svm_predict(model, np.zeros((2, 3)))


def feature_space_kfdr(K, tau, gamma):
    """KFDR from an explicit feature map of K."""
    eig, vec = np.linalg.eigh(K)
    phi = vec * np.sqrt(np.clip(eig, 0.0, None))
    n = K.shape[0]
    first, second = phi[:tau], phi[tau:]
    delta = second.mean(axis=0) - first.mean(axis=0)
    within = (np.cov(first.T, bias=True) * tau + np.cov(second.T, bias=True) * (n - tau)) / n
    return tau * (n - tau) / n * delta @ np.linalg.solve(within + gamma * np.eye(phi.shape[1]), delta)


def test_kfdr_matches_feature_space_oracle(rng):
    for n in (6, 12, 20):
        x = rng.normal(size=(n, 3))
        K = rbf(x, x)
        for tau in range(2, n - 1):
            assert kfdr_score(K, tau, 1e-3) == pytest.approx(feature_space_kfdr(K, tau, 1e-3), rel=1e-6)


def test_kfdr_identical_diagrams_score_zero():
    scores = kfdr_scan(GramMatrix(np.ones((10, 10)), PARAMS, [str(k) for k in range(10)]), KfdrConfig())
    assert [tau for tau, _ in scores] == list(range(2, 9))
    assert all(abs(s) <= 1e-9 for _, s in scores)


def test_kfdr_two_blocks_peak_at_boundary():
    K, _ = block_gram([7, 5], within=1.0, across=0.3)
    scores = kfdr_scan(GramMatrix(K, PARAMS, [str(k) for k in range(12)]), KfdrConfig(gamma=1e-3))
    assert kfdr_argmax(scores) == 7


def test_kfdr_segment_swap_symmetry(rng):
    x = rng.normal(size=(10, 2))
    K = rbf(x, x)
    reversed_K = K[::-1, ::-1]
    for tau in range(2, 9):
        assert kfdr_score(K, tau, 1e-3) == pytest.approx(kfdr_score(reversed_K, 10 - tau, 1e-3), rel=1e-9)


def test_kfdr_invariant_under_double_centering_preserving_shift(rng):
    x = rng.normal(size=(10, 2))
    K = rbf(x, x)
    a = rng.normal(size=10)
    shifted = K + a[:, None] + a[None, :]
    for tau in range(2, 9):
        assert kfdr_score(shifted, tau, 1e-3) == pytest.approx(kfdr_score(K, tau, 1e-3), rel=1e-7)


def test_kfdr_candidate_range_and_skips():
    K, _ = block_gram([6, 6])
    gram = GramMatrix(K, PARAMS, [str(k) for k in range(12)])
    scores = kfdr_scan(gram, KfdrConfig(candidate_range=(1, 10)))
    assert [tau for tau, _ in scores] == list(range(2, 11))


def test_kfdr_config_validation():
    with pytest.raises(ValidationError):
        KfdrConfig(gamma=0.0)
    with pytest.raises(ValidationError):
        KfdrConfig(candidate_range=(5, 3))
    with pytest.raises(ValueError):
        kfdr_argmax([])
    assert kfdr_argmax([(2, 1.0), (3, 4.0), (4, 4.0)]) == 3


def test_kfdr_is_flat_for_mutually_orthogonal_samples():
    # no within-segment spread: the mean difference is unregularized and every split scores 1 / gamma
    scores = kfdr_scan(GramMatrix(np.eye(12), PARAMS, [str(k) for k in range(12)]), KfdrConfig(gamma=1e-3))
    np.testing.assert_allclose([s for _, s in scores], 1e3, rtol=1e-9)


def test_kfdr_with_tiny_t_is_a_weighted_mean_embedding_distance(rng):
    x = rng.normal(size=(14, 2))
    K = np.exp(-1e-7 * cdist(x, x))
    for tau in range(2, 13):
        n1, n2 = tau, 14 - tau
        v = np.concatenate([np.full(n1, -1.0 / n1), np.full(n2, 1.0 / n2)])
        expected = n1 * n2 / 14 * (v @ K @ v) / 1e-3
        assert kfdr_score(K, tau, 1e-3) == pytest.approx(expected, rel=1e-3)

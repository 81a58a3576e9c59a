"""End-to-end checks at experiment scale; run with `pytest -m slow`."""
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from test_homology import all_threshold_pairs, check_h1_against_oracle
from test_kernels import min_eig_ratio

from pfkernel.core.fgt import GaussTransformProblem, gauss_transform_exact, gauss_transform_fast, plan_gauss_transform
from pfkernel.core.homology import enclosing_radius, rips_persistence
from pfkernel.core.kernels import PFParams, gram, off_diagonal, quantile_t
from pfkernel.core.measure import SmoothingParams
from pfkernel.core.metric import fim_matrix
from pfkernel.modules.datagen import OrbitSpec, changepoint_sequence, orbit, orbit_dataset
from pfkernel.modules.experiments import CvConfig, KernelSearch, cross_validate, random_diagram
from pfkernel.modules.learn import KfdrConfig, kfdr_argmax, kfdr_scan

pytestmark = pytest.mark.slow

# at sigma = 1 the per-pair supports leave the PF Gram slightly indefinite
WIDE_SMOOTHING = pytest.mark.xfail(
    strict=False,
    reason="sigma=1 Grams reach a min eigenvalue ratio of -3.13e-4; see DESIGN.md, positive definiteness",
)


@lru_cache(maxsize=None)
def pf_grams(sigma):
    """20 sets of 10 random diagrams (1 to 50 points each), PF Gram with t = 1."""
    rng = np.random.default_rng(int(round(1e4 * sigma)))
    grams = []
    for _ in range(20):
        diagrams = [random_diagram(int(rng.integers(1, 51)), rng) for _ in range(10)]
        grams.append(gram(diagrams, PFParams(t=1.0, sigma=sigma), n_jobs=1))
    return tuple(grams)


@pytest.mark.parametrize("sigma", [0.01, 0.1, pytest.param(1.0, marks=WIDE_SMOOTHING)])
def test_pf_grams_are_psd(sigma):
    for matrix in pf_grams(sigma):
        assert min_eig_ratio(matrix.values) >= -1e-8


@pytest.mark.parametrize("sigma", [0.01, 0.1, 1.0])
def test_fim_is_conditionally_negative_definite(sigma):
    rng = np.random.default_rng(5)
    for matrix in pf_grams(sigma):
        shifted = matrix.distances - math.pi / 2
        c = rng.normal(size=(200, 10))
        c -= c.mean(axis=1, keepdims=True)
        assert np.all(np.einsum("ki,ij,kj->k", c, shifted, c) <= 1e-10)


@pytest.mark.parametrize("sigma", [0.01, 0.1, 1.0])
def test_induced_distance_is_bounded_by_fim(sigma):
    for matrix in pf_grams(sigma):
        K, D = matrix.values, matrix.distances
        induced = np.diag(K)[:, None] + np.diag(K)[None, :] - 2 * K
        assert np.all(induced <= 2 * matrix.kernel.t * D + 1e-15)


@pytest.mark.parametrize("sigma", [0.01, 0.1, pytest.param(1.0, marks=WIDE_SMOOTHING)])
def test_pf_gram_roots_are_psd(sigma):
    for matrix in pf_grams(sigma):
        for m in (2, 3, 5):
            assert min_eig_ratio(matrix.values ** (1.0 / m)) >= -1e-8


@pytest.mark.parametrize("bandwidth", [0.01, 0.1, 1.0, 10.0])
def test_fgt_certificate_at_scale(rng, bandwidth):
    for _ in range(25):
        p = GaussTransformProblem(
            sources=rng.uniform(0, 1, size=(1000, 2)),
            charges=rng.uniform(-1, 1, 1000),
            targets=rng.uniform(0, 1, size=(1000, 2)),
            bandwidth=bandwidth,
            epsilon=1e-6,
        )
        error = np.max(np.abs(gauss_transform_fast(p) - gauss_transform_exact(p)))
        assert error <= p.epsilon * np.sum(np.abs(p.charges))


def best_time(problem, repeats=3):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        gauss_transform_fast(problem)
        times.append(time.perf_counter() - start)
    return min(times)


def test_fgt_time_grows_linearly(rng):
    def problem(n):
        return GaussTransformProblem(sources=rng.uniform(0, 1, size=(n, 2)), charges=rng.uniform(0, 1, n),
                                     targets=rng.uniform(0, 1, size=(n, 2)), bandwidth=1.0, epsilon=1e-6)

    small, large = problem(2000), problem(20000)
    assert plan_gauss_transform(small).method == plan_gauss_transform(large).method == "ifgt"
    assert best_time(large) < 10 * best_time(small)


def test_h1_matches_rank_oracle_up_to_eight_points(rng):
    for _ in range(50):
        points = rng.uniform(0, 1, size=(int(rng.integers(7, 9)), 2))
        pairs = all_threshold_pairs(points)
        picked = rng.choice(len(pairs), size=min(150, len(pairs)), replace=False)
        check_h1_against_oracle(points, [pairs[k] for k in picked])


def test_h1_of_orbit_scale_cloud():
    cloud = orbit(OrbitSpec(r=4.3, n_points=300, seed=0))
    start = time.perf_counter()
    h0, h1 = rips_persistence(cloud, 1)
    assert time.perf_counter() - start < 10.0
    assert np.isinf(h0.points[:, 1]).sum() == 1 and len(h1) > 0
    assert np.all(np.isfinite(h1.points[:, 1]))
    assert h1.points[:, 1].max() <= enclosing_radius(cloud)


def test_distance_matrices_are_reproducible(make_diagrams):
    diagrams = make_diagrams(24, max_points=40)
    params = SmoothingParams(sigma=0.05)
    serial = fim_matrix(diagrams, params, n_jobs=1)
    np.testing.assert_array_equal(serial, fim_matrix(diagrams, params, n_jobs=1))
    np.testing.assert_array_equal(serial, fim_matrix(diagrams, params, n_jobs=4))


@lru_cache(maxsize=None)
def regime_change_diagrams(seed):
    """H1 diagrams of 10 orbits at r = 2.5 followed by 10 at r = 4.3."""
    clouds = changepoint_sequence(2.5, 4.3, 10, 10, n_points=300, seed=seed)
    return tuple(rips_persistence(cloud, 1)[1] for cloud in clouds)


@pytest.mark.parametrize("t_scale", [
    # with t from the median, Sigma_W has many eigenvalues above gamma and the argmax drifts to the ends
    pytest.param(1.0, marks=pytest.mark.xfail(strict=False, reason="median t hit 9 to 12 of 20 on 80-point orbits")),
    # far below the median, Sigma_W sits under gamma and the ratio tracks the mean embedding distance
    1e-3,
])
def test_kfdr_locates_regime_change(t_scale):
    hits = 0
    for seed in range(20):
        base = gram(list(regime_change_diagrams(1000 * seed)), PFParams(t=1.0, sigma=0.05), n_jobs=1)
        matrix = base.with_t(t_scale * quantile_t(off_diagonal(base.distances), 50))
        hits += abs(kfdr_argmax(kfdr_scan(matrix, KfdrConfig(gamma=1e-3))) - 10) <= 2
    assert hits >= 18


def test_orbit_classification_beats_chance_and_prob_baseline():
    data = orbit_dataset([2.5, 3.5, 4.0, 4.1, 4.3], per_class=50, n_points=300, seed=0)
    diagrams = [rips_persistence(cloud, 1)[1] for cloud, _ in data]
    labels = [label for _, label in data]
    config = CvConfig(repeats=10, seed=0)
    C_values = [0.01, 0.1, 1.0, 10.0, 100.0]

    pf = cross_validate(diagrams, labels, KernelSearch(
        kernel="pf", sigmas=[0.001, 0.01, 0.1], t_quantiles=[1.0, 10.0, 50.0], C_values=C_values), config)
    prob = cross_validate(diagrams, labels, KernelSearch(
        kernel="prob", sigmas=[0.001, 0.01, 0.1], bandwidths=[0.01, 0.1, 1.0], C_values=C_values), config)
    assert pf.mean >= 0.6
    assert pf.mean >= prob.mean

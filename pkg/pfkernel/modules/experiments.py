"""
Evaluation protocols
Repeated stratified splits, paired hold-out runs, inner cross-validation for
hyperparameter selection, and the exact-vs-FGT timing benchmark.
"""
import math
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from pfkernel.core.diagram import PersistenceDiagram, diagonal_projection
from pfkernel.core.fgt import GaussTransformProblem, plan_gauss_transform
from pfkernel.core.kernels import (
    GramMatrix,
    PFParams,
    ProbGaussParams,
    PSSParams,
    PWGParams,
    SWParams,
    gram,
    off_diagonal,
    pf_gram_from_distances,
    quantile_t,
)
from pfkernel.core.measure import SmoothingParams, build_support
from pfkernel.core.metric import fim, fim_matrix
from pfkernel.modules.learn import LabeledGram, svm_predict, svm_train
from pfkernel.utils.errors import DegenerateDistancesError, IndefiniteGramError, TrainingError
from pfkernel.utils.logger import setup_logger
from pfkernel.utils.parallel import parallel_map

logger = setup_logger(__name__)

Split = Tuple[np.ndarray, np.ndarray]


def stratified_splits(labels: Sequence[int], test_fraction: float = 0.3, repeats: int = 10,
                      seed: int = 0) -> List[Split]:
    """
    Random stratified train/test splits.

    Every class contributes round(test_fraction * n_c) test samples, at least one and
    leaving at least one for training. Repeat r draws from default_rng(seed + r).

    Returns:
        list of (train indices, test indices), both sorted
    """
    labels = np.asarray(labels, dtype=int)
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    classes = np.unique(labels)
    splits: List[Split] = []
    for r in range(repeats):
        rng = np.random.default_rng(seed + r)
        test: List[int] = []
        for c in classes:
            members = np.flatnonzero(labels == c)
            if members.size < 2:
                raise TrainingError(f"class {c} has {members.size} sample(s); splits need at least 2")
            n_test = max(1, min(members.size - 1, int(math.floor(test_fraction * members.size + 0.5))))
            test.extend(rng.permutation(members)[:n_test].tolist())
        test_idx = np.sort(np.array(test, dtype=int))
        train_idx = np.setdiff1d(np.arange(labels.size), test_idx)
        splits.append((train_idx, test_idx))
    return splits


def paired_holdout_splits(labels: Sequence[int]) -> List[Split]:
    """
    Hold out one sample of every class, for every combination.

    Two classes of nine give 9 x 9 = 81 runs.
    """
    labels = np.asarray(labels, dtype=int)
    groups = [np.flatnonzero(labels == c).tolist() for c in np.unique(labels)]
    splits: List[Split] = []
    for held in product(*groups):
        test_idx = np.sort(np.array(held, dtype=int))
        splits.append((np.setdiff1d(np.arange(labels.size), test_idx), test_idx))
    return splits


def stratified_folds(labels: Sequence[int], folds: int, seed: int) -> List[Split]:
    """
    k-fold partition dealing each shuffled class round-robin over the folds.

    Indices refer to positions in labels. Empty folds are dropped.
    """
    labels = np.asarray(labels, dtype=int)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(labels.size, dtype=int)
    offset = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        assignment[members] = (offset + np.arange(members.size)) % folds
        offset += members.size
    out: List[Split] = []
    for k in range(folds):
        test_idx = np.flatnonzero(assignment == k)
        if test_idx.size:
            out.append((np.flatnonzero(assignment != k), test_idx))
    return out


class KernelSearch(BaseModel):
    """Hyperparameter grid for one kernel family."""
    kernel: Literal["pf", "pss", "pwg", "sw", "prob"] = "pf"
    sigmas: List[float] = Field(..., min_length=1)
    t_values: List[float] = Field(default_factory=list, description="explicit PF t grid")
    t_quantiles: List[float] = Field(default_factory=list, description="PF: t = 1 / (s% quantile of training d_FIM)")
    C_values: List[float] = Field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0, 100.0], min_length=1)
    accel: Literal["exact", "fgt"] = "exact"
    epsilon: float = Field(1e-6, gt=0, lt=1)
    pwg_C: List[float] = Field(default_factory=lambda: [1.0])
    pwg_q: List[float] = Field(default_factory=lambda: [1.0])
    taus: List[float] = Field(default_factory=lambda: [1.0])
    sw_M: List[int] = Field(default_factory=lambda: [10])
    bandwidths: List[float] = Field(default_factory=lambda: [1.0])
    grid_size: int = Field(20, ge=2)

    def base_params(self) -> List[BaseModel]:
        """Kernel parameter models that need their own Gram computation (t excluded)."""
        if self.kernel == "pf":
            # t is a placeholder; PF Grams come from the cached distances
            return [PFParams(t=1.0, sigma=s, accel=self.accel, epsilon=self.epsilon) for s in self.sigmas]
        if self.kernel == "pss":
            return [PSSParams(sigma=s, accel=self.accel, epsilon=self.epsilon) for s in self.sigmas]
        if self.kernel == "pwg":
            return [PWGParams(C=c, q=q, sigma=s, tau=tau)
                    for s, c, q, tau in product(self.sigmas, self.pwg_C, self.pwg_q, self.taus)]
        if self.kernel == "sw":
            return [SWParams(M=m, sigma=s) for s, m in product(self.sigmas, self.sw_M)]
        return [ProbGaussParams(sigma=s, bandwidth=b, grid_size=self.grid_size)
                for s, b in product(self.sigmas, self.bandwidths)]


class CvConfig(BaseModel):
    protocol: Literal["split", "paired"] = "split"
    test_fraction: float = Field(0.3, gt=0, lt=1)
    repeats: int = Field(10, ge=1)
    folds: int = Field(3, ge=2, description="inner folds for hyperparameter selection")
    seed: int = 0
    n_jobs: Optional[int] = None


@dataclass
class CvReport:
    kernel: str
    accuracies: List[float]
    selected: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def summary(self) -> str:
        """Accuracy in percent as 'mean ± std'."""
        return f"{100 * self.mean:.2f} ± {100 * self.std:.2f}"

    def to_frame(self) -> pd.DataFrame:
        rows = [{"split": k, "accuracy": acc, **self.selected[k]} for k, acc in enumerate(self.accuracies)]
        return pd.DataFrame(rows)


@dataclass(frozen=True)
class _Candidate:
    gram: GramMatrix
    C: float

    @property
    def kernel(self) -> BaseModel:
        return self.gram.kernel

    def describe(self) -> Dict[str, Any]:
        params = self.kernel.model_dump(exclude={"grid_lo", "grid_hi"})
        return {**params, "C": self.C}


def _pf_distances(diagrams: Sequence[PersistenceDiagram], base: List[BaseModel],
                  n_jobs: Optional[int]) -> List[Tuple[BaseModel, np.ndarray]]:
    return [(p, fim_matrix(diagrams, p.smoothing, n_jobs)) for p in base]


def _split_ts(search: KernelSearch, matrix: np.ndarray, train_idx: np.ndarray) -> List[float]:
    """Explicit t values plus the quantile ones; quantiles that come out 0 are skipped."""
    ts = list(search.t_values)
    if search.t_quantiles:
        train_d = off_diagonal(matrix[np.ix_(train_idx, train_idx)])
        for s in search.t_quantiles:
            try:
                ts.append(quantile_t(train_d, s))
            except DegenerateDistancesError as e:
                logger.warning(f"t quantile {s}% skipped for this split: {e}")
    return ts


def _candidates(search: KernelSearch, cached: List[Tuple[BaseModel, np.ndarray]],
                train_idx: np.ndarray) -> List[_Candidate]:
    """
    Expand the grid for one split. PF quantile t values use training distances only.
    """
    out: List[_Candidate] = []
    for params, matrix in cached:
        ids = [str(i) for i in range(matrix.shape[0])]
        if isinstance(params, PFParams):
            for t in _split_ts(search, matrix, train_idx):
                g = GramMatrix(pf_gram_from_distances(matrix, t), params.model_copy(update={"t": t}),
                               ids, distances=matrix)
                out.extend(_Candidate(g, C) for C in search.C_values)
        else:
            g = GramMatrix(matrix, params, ids)
            out.extend(_Candidate(g, C) for C in search.C_values)
    return out


def _holdout_accuracy(candidate: _Candidate, labels: np.ndarray, train_idx: np.ndarray,
                      test_idx: np.ndarray) -> float:
    g = candidate.gram
    train = GramMatrix(g.subset(train_idx), g.kernel, [g.diagram_ids[i] for i in train_idx])
    model = svm_train(LabeledGram(train, labels[train_idx]), candidate.C, n_jobs=1)
    predicted = svm_predict(model, g.subset(test_idx, train_idx))
    return float(np.mean(predicted == labels[test_idx]))


def _inner_score(candidate: _Candidate, labels: np.ndarray, train_idx: np.ndarray,
                 folds: List[Split]) -> float:
    scores = []
    for inner_train, inner_test in folds:
        tr, te = train_idx[inner_train], train_idx[inner_test]
        if np.unique(labels[tr]).size < 2:
            continue
        try:
            scores.append(_holdout_accuracy(candidate, labels, tr, te))
        except IndefiniteGramError as e:
            logger.warning(f"candidate {candidate.describe()} rejected: {e}")
            return -math.inf
    return float(np.mean(scores)) if scores else -math.inf


def _run_split(task) -> Tuple[float, Dict[str, Any]]:
    split_id, search, cached, labels, train_idx, test_idx, config = task
    candidates = _candidates(search, cached, train_idx)
    if not candidates:
        raise TrainingError(f"split {split_id}: no usable t; every requested quantile of its training d_FIM values is 0")
    if len(candidates) == 1:
        best = candidates[0]
    else:
        folds = stratified_folds(labels[train_idx], config.folds, config.seed + split_id)
        scores = [_inner_score(c, labels, train_idx, folds) for c in candidates]
        # first grid entry wins ties
        best = candidates[int(np.argmax(scores))]
    accuracy = _holdout_accuracy(best, labels, train_idx, test_idx)
    logger.info(f"split {split_id}: accuracy {accuracy:.4f} with {best.describe()}")
    return accuracy, best.describe()


def cross_validate(diagrams: Sequence[PersistenceDiagram], labels: Sequence[int],
                   search: KernelSearch, config: CvConfig) -> CvReport:
    """
    Outer evaluation with inner cross-validation for hyperparameters.

    Gram (or, for PF, d_FIM) matrices are computed once over all diagrams per base
    parameter setting; each split then selects its hyperparameters with inner folds on
    its own training part and reports test accuracy.

    Args:
        diagrams: finite diagrams
        labels: class ids aligned with diagrams
        search: kernel family and grids
        config: split protocol, folds, seed

    Returns:
        CvReport with per-split accuracy and the selected hyperparameters
    """
    labels = np.asarray(labels, dtype=int)
    if labels.size != len(diagrams):
        raise TrainingError(f"{labels.size} labels for {len(diagrams)} diagrams")
    if search.kernel == "pf" and not (search.t_values or search.t_quantiles):
        raise ValueError("PF search needs t_values or t_quantiles")

    base = search.base_params()
    if search.kernel == "pf":
        cached = _pf_distances(diagrams, base, config.n_jobs)
    else:
        cached = []
        for p in base:
            g = gram(diagrams, p, n_jobs=config.n_jobs)
            cached.append((g.kernel, g.values))

    if config.protocol == "paired":
        splits = paired_holdout_splits(labels)
    else:
        splits = stratified_splits(labels, config.test_fraction, config.repeats, config.seed)
    logger.info(f"Cross-validating {search.kernel}: {len(splits)} splits, {len(base)} base settings")

    tasks = [(k, search, cached, labels, tr, te, config) for k, (tr, te) in enumerate(splits)]
    results = parallel_map(_run_split, tasks, config.n_jobs)
    report = CvReport(search.kernel, [acc for acc, _ in results], [sel for _, sel in results])
    logger.info(f"{search.kernel} accuracy {report.summary}")
    return report


def random_diagram(n_points: int, rng: np.random.Generator, scale: float = 1.0) -> PersistenceDiagram:
    """n points with births uniform on [0, scale) and persistence uniform on (0, scale]."""
    births = rng.uniform(0.0, scale, n_points)
    deaths = births + scale - rng.uniform(0.0, scale, n_points)
    return PersistenceDiagram(np.column_stack([births, deaths]))


def benchmark_fim(sizes: Sequence[int], sigma: float, epsilon: float = 1e-6, seed: int = 0) -> pd.DataFrame:
    """
    Time d_FIM with exact sums against the FGT path on random diagram pairs.

    Returns:
        one row per (size, method): n_points, method, seconds, value, abs_error and the
        FGT plan chosen for the first smoothing problem
    """
    rows: List[Dict[str, Any]] = []
    for k, n in enumerate(sizes):
        rng = np.random.default_rng(seed + k)
        dg_i, dg_j = random_diagram(n, rng), random_diagram(n, rng)
        theta = build_support(dg_i, dg_j)
        problem = GaussTransformProblem(
            sources=np.vstack([dg_i.points, diagonal_projection(dg_j.points)]),
            charges=np.ones(2 * n),
            targets=theta,
            bandwidth=sigma,
            epsilon=epsilon,
        )
        plan = plan_gauss_transform(problem)
        logger.info(f"bench n={n}: plan {plan}")

        exact_value = None
        for method in ("exact", "fgt"):
            params = SmoothingParams(sigma=sigma, accel=method, epsilon=epsilon)
            start = time.perf_counter()
            value = fim(dg_i, dg_j, params).value
            seconds = time.perf_counter() - start
            if exact_value is None:
                exact_value = value
            rows.append({
                "n_points": n,
                "method": method,
                "seconds": seconds,
                "value": value,
                "abs_error": abs(value - exact_value),
                "plan": plan.method,
                "clusters": plan.n_clusters,
                "order": plan.order,
            })
    return pd.DataFrame(rows)

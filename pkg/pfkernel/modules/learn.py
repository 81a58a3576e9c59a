"""
Kernel learners on precomputed Gram matrices
One-vs-one soft-margin SVM trained with SMO, and kernel Fisher discriminant ratio
(KFDR) change-point scans.
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.linalg import solve

from pfkernel.core.kernels import GramMatrix
from pfkernel.utils.errors import DimensionMismatchError, IndefiniteGramError, TrainingError
from pfkernel.utils.logger import setup_logger
from pfkernel.utils.parallel import parallel_map
from pfkernel.utils.settings import get_settings

logger = setup_logger(__name__)

INDEFINITE_TOLERANCE = 1e-6
# curvature floor for a non-positive pair (K_ii + K_jj - 2 K_ij <= 0)
TAU = 1e-12


@dataclass(frozen=True)
class LabeledGram:
    gram: GramMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int).ravel()
        if labels.shape[0] != len(self.gram):
            raise DimensionMismatchError(f"{labels.shape[0]} labels for a Gram matrix of order {len(self.gram)}")
        object.__setattr__(self, "labels", labels)


@dataclass
class BinaryMachine:
    """Decision f(x) = sum_l coef[l] K(x, x_l) + bias; f > 0 votes for positive_class."""
    positive_class: int
    negative_class: int
    coef: np.ndarray
    bias: float
    n_iter: int
    converged: bool
    objective_trace: List[float] = field(default_factory=list, repr=False)


@dataclass
class SvmModel:
    classes: np.ndarray
    machines: List[BinaryMachine]
    C: float

    @property
    def n_train(self) -> int:
        return self.machines[0].coef.shape[0] if self.machines else 0


def check_gram(values: np.ndarray) -> None:
    """
    Reject non-finite or clearly indefinite Gram matrices.

    Eigenvalues down to -1e-6 * lambda_max are tolerated (warning only).
    """
    if not np.all(np.isfinite(values)):
        raise TrainingError("Gram matrix has non-finite entries")
    eig = np.linalg.eigvalsh((values + values.T) / 2.0)
    top = max(float(eig[-1]), 0.0)
    if eig[0] < -INDEFINITE_TOLERANCE * top:
        raise IndefiniteGramError(f"Gram matrix min eigenvalue {eig[0]:.3e} below -1e-6 * {top:.3e}")
    if eig[0] < 0:
        logger.warning(f"Gram matrix slightly indefinite (min eigenvalue {eig[0]:.3e}); training anyway")


def smo_binary(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int
               ) -> Tuple[np.ndarray, float, int, bool, List[float]]:
    """
    SMO with maximal-violating-pair selection on the dual
        max sum(alpha) - 1/2 sum_kl alpha_k alpha_l y_k y_l K_kl,  0 <= alpha <= C, y.alpha = 0.

    Args:
        K: (n, n) Gram
        y: labels in {+1, -1}
        C: box constraint
        tol: stop when the maximal KKT violation is below tol
        max_iter: iteration cap

    Returns:
        (alpha, bias, iterations, converged, dual objective after each step)
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    # g_k = 1 - y_k sum_l alpha_l y_l K_kl
    g = np.ones(n)
    lower = np.where(y > 0, 0.0, -C)
    upper = np.where(y > 0, C, 0.0)
    trace: List[float] = []
    converged = False
    it = 0
    while it < max_iter:
        ya = y * alpha
        yg = y * g
        up = ya < upper
        low = ya > lower
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        gap = yg[i] - yg[j]
        if gap < tol:
            converged = True
            break
        curvature = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if curvature <= 0:
            curvature = TAU
        step = min(upper[i] - ya[i], ya[j] - lower[j], gap / curvature)
        g -= step * y * (K[i] - K[j])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        it += 1
        trace.append(0.5 * float(np.sum(alpha * (1.0 + g))))

    ya, yg = y * alpha, y * g
    free = (alpha > 1e-12) & (alpha < C - 1e-12)
    if free.any():
        bias = float(np.mean(yg[free]))
    else:
        up, low = ya < upper, ya > lower
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, it, converged, trace


def _train_pair(task) -> BinaryMachine:
    K, labels, pos, neg, C, tol, max_iter = task
    idx = np.flatnonzero((labels == pos) | (labels == neg))
    y = np.where(labels[idx] == pos, 1.0, -1.0)
    alpha, bias, n_iter, converged, trace = smo_binary(K[np.ix_(idx, idx)], y, C, tol, max_iter)
    if not converged:
        logger.warning(f"SMO for classes ({pos}, {neg}) stopped at the iteration cap {max_iter}")
    coef = np.zeros(labels.shape[0])
    coef[idx] = alpha * y
    return BinaryMachine(int(pos), int(neg), coef, bias, n_iter, converged, trace)


def svm_train(data: LabeledGram, C: float, tol: Optional[float] = None,
              max_iter: Optional[int] = None, n_jobs: Optional[int] = None) -> SvmModel:
    """
    Train a one-vs-one SVM on a precomputed Gram matrix.

    Args:
        data: Gram matrix with integer labels
        C: regularization parameter
        tol: KKT tolerance (default PF_SVM_TOLERANCE)
        max_iter: iteration cap per machine (default PF_SVM_MAX_ITER)
        n_jobs: class pairs trained in parallel

    Returns:
        SvmModel
    """
    settings = get_settings()
    tol = settings.svm_tolerance if tol is None else tol
    max_iter = settings.svm_max_iter if max_iter is None else max_iter
    if not C > 0:
        raise TrainingError(f"C must be positive, got {C}")
    classes = np.unique(data.labels)
    if classes.size < 2:
        raise TrainingError(f"need at least two classes, got {classes.tolist()}")
    K = np.asarray(data.gram.values, dtype=float)
    check_gram(K)

    tasks = [(K, data.labels, a, b, C, tol, max_iter) for a, b in combinations(classes.tolist(), 2)]
    machines = parallel_map(_train_pair, tasks, n_jobs)
    logger.info(f"Trained {len(machines)} one-vs-one machines on {K.shape[0]} samples (C={C})")
    return SvmModel(classes, machines, C)


def svm_decision(model: SvmModel, cross_gram: np.ndarray) -> np.ndarray:
    """
    Decision values, one column per class pair.

    Args:
        cross_gram: (n_test, n_train) kernel values

    Returns:
        (n_test, n_pairs) array
    """
    cross_gram = np.atleast_2d(np.asarray(cross_gram, dtype=float))
    if cross_gram.shape[1] != model.n_train:
        raise DimensionMismatchError(f"cross Gram has {cross_gram.shape[1]} columns, model was trained on {model.n_train}")
    coefs = np.column_stack([m.coef for m in model.machines])
    biases = np.array([m.bias for m in model.machines])
    return cross_gram @ coefs + biases


def svm_predict(model: SvmModel, cross_gram: np.ndarray) -> np.ndarray:
    """
    One-vs-one majority vote.

    A decision value of exactly 0 votes for the lower class id, and ties in the vote
    count go to the lowest class id.
    """
    decisions = svm_decision(model, cross_gram)
    position = {int(c): k for k, c in enumerate(model.classes)}
    votes = np.zeros((decisions.shape[0], model.classes.size), dtype=int)
    for col, machine in enumerate(model.machines):
        lower = min(machine.positive_class, machine.negative_class)
        d = decisions[:, col]
        winner = np.where(d > 0, machine.positive_class,
                          np.where(d < 0, machine.negative_class, lower))
        for cls in (machine.positive_class, machine.negative_class):
            votes[winner == cls, position[cls]] += 1
    return model.classes[np.argmax(votes, axis=1)]


class KfdrConfig(BaseModel):
    gamma: float = Field(1e-3, gt=0, description="regularization added to the within-segment covariance")
    candidate_range: Optional[Tuple[int, int]] = Field(
        None, description="inclusive range of first-segment sizes (default [2, n-2])")

    @model_validator(mode="after")
    def _check_range(self):
        if self.candidate_range is not None and self.candidate_range[0] > self.candidate_range[1]:
            raise ValueError(f"empty candidate range {self.candidate_range}")
        return self


def _centering_projector(n: int, tau: int) -> np.ndarray:
    """Block-diagonal projector that centers [0, tau) and [tau, n) separately."""
    P = np.zeros((n, n))
    for lo, hi in ((0, tau), (tau, n)):
        m = hi - lo
        P[lo:hi, lo:hi] = np.eye(m) - 1.0 / m
    return P


def kfdr_score(K: np.ndarray, tau: int, gamma: float) -> float:
    """
    Regularized kernel Fisher discriminant ratio for the split [0, tau) | [tau, n).

        (n1 n2 / n) delta^T (Sigma_W + gamma I)^-1 delta

    evaluated through K: with v = e_2/n2 - e_1/n1 and P the within-segment centering,
        delta^T (...)^-1 delta = (v^T K v - v^T K P (n gamma I + P K P)^-1 P K v) / gamma
    """
    n = K.shape[0]
    n1, n2 = tau, n - tau
    v = np.concatenate([np.full(n1, -1.0 / n1), np.full(n2, 1.0 / n2)])
    P = _centering_projector(n, tau)
    Kv = K @ v
    PKv = P @ Kv
    system = n * gamma * np.eye(n) + P @ K @ P
    correction = float(PKv @ solve(system, PKv, assume_a="sym"))
    quad = (float(v @ Kv) - correction) / gamma
    return (n1 * n2 / n) * max(quad, 0.0)


def kfdr_scan(gram: GramMatrix, config: KfdrConfig) -> List[Tuple[int, float]]:
    """
    KFDR score for every admissible split of an ordered sequence.

    Args:
        gram: Gram matrix in acquisition order
        config: regularization and candidate range

    Returns:
        list of (tau, score), tau = size of the first segment; candidates leaving a
        segment with fewer than 2 samples are skipped
    """
    K = np.asarray(gram.values, dtype=float)
    K = (K + K.T) / 2.0
    n = K.shape[0]
    lo, hi = config.candidate_range or (2, n - 2)
    results: List[Tuple[int, float]] = []
    for tau in range(lo, hi + 1):
        if tau < 2 or n - tau < 2:
            logger.warning(f"KFDR candidate {tau} skipped: each segment needs at least 2 samples (n={n})")
            continue
        results.append((tau, kfdr_score(K, tau, config.gamma)))
    logger.info(f"KFDR scanned {len(results)} candidates over {n} samples")
    return results


def kfdr_argmax(scores: Sequence[Tuple[int, float]]) -> int:
    """Split index with the largest score (earliest on ties)."""
    if not scores:
        raise ValueError("no KFDR candidates were scored")
    best = max(range(len(scores)), key=lambda k: (scores[k][1], -k))
    return int(scores[best][0])

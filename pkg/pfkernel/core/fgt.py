"""
Fast Gauss Transform in the plane
Evaluates G[k] = sum_j q_j exp(-|y_k - u_j|^2 / (2 bandwidth^2)) for every target.

The fast path is the improved FGT: sources are grouped by farthest-point clustering,
each cluster is summarized by a truncated Taylor expansion around its center, and a
target only visits clusters within the cutoff radius. With h = sqrt(2) * bandwidth,
a = |u - c| <= r_x (the largest cluster radius) and b = |y - c| <= r_y =
min(r_x + h sqrt(ln(1/eps)), diameter), every (source, target) pair contributes an
error of at most |q| * eps:

    skipped pairs:     exp(-|y - u|^2 / h^2) < eps
    truncated pairs:   (2^p / p!) (a b / h^2)^p exp(-(a - b)^2 / h^2) <= eps

so each output deviates from the exact sum by at most eps * sum_j |q_j|.
"""
import math
from dataclasses import dataclass
from typing import Iterator, Literal, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from pfkernel.utils.logger import setup_logger

logger = setup_logger(__name__)

# problems with at most this many source-target products are always summed directly
DIRECT_CROSSOVER = 64
MAX_ORDER = 30
TARGET_BLOCK = 2048


@dataclass(frozen=True)
class GaussTransformProblem:
    """Sources with charges, targets, bandwidth and allowed error."""
    sources: np.ndarray
    charges: np.ndarray
    targets: np.ndarray
    bandwidth: float
    epsilon: float = 1e-6

    def __post_init__(self):
        sources = np.asarray(self.sources, dtype=float).reshape(-1, 2)
        targets = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        charges = np.asarray(self.charges, dtype=float).ravel()
        if charges.shape[0] != sources.shape[0]:
            raise ValueError(f"{charges.shape[0]} charges for {sources.shape[0]} sources")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "charges", charges)

    @property
    def n_sources(self) -> int:
        return self.sources.shape[0]

    @property
    def n_targets(self) -> int:
        return self.targets.shape[0]


@dataclass(frozen=True)
class FgtPlan:
    method: Literal["exact", "ifgt"]
    n_clusters: int = 0
    order: int = 0
    cutoff: float = 0.0
    radius: float = 0.0


@dataclass(frozen=True)
class Clustering:
    center_indices: np.ndarray
    assignment: np.ndarray
    radii: np.ndarray
    covering_radii: np.ndarray


def gauss_transform_exact(problem: GaussTransformProblem) -> np.ndarray:
    """
    Direct O(N M) evaluation; reference for the fast path.
    """
    out = np.zeros(problem.n_targets)
    if problem.n_sources == 0 or problem.n_targets == 0:
        return out
    scale = 2.0 * problem.bandwidth ** 2
    for start in range(0, problem.n_targets, TARGET_BLOCK):
        block = problem.targets[start:start + TARGET_BLOCK]
        sq = cdist(block, problem.sources, "sqeuclidean")
        out[start:start + TARGET_BLOCK] = np.exp(-sq / scale) @ problem.charges
    return out


def farthest_point_clustering(points: np.ndarray, k: int) -> Clustering:
    """
    Gonzalez farthest-point clustering, deterministic (first center is point 0).

    Args:
        points: (n, 2) array
        k: number of centers (clipped to n)

    Returns:
        Clustering; covering_radii[i] is the covering radius with i + 1 centers
    """
    n = points.shape[0]
    k = max(1, min(k, n))
    centers = np.zeros(k, dtype=int)
    covering = np.zeros(k)
    nearest = np.linalg.norm(points - points[0], axis=1)
    assignment = np.zeros(n, dtype=int)
    for i in range(1, k):
        covering[i - 1] = nearest.max()
        centers[i] = int(np.argmax(nearest))
        dist = np.linalg.norm(points - points[centers[i]], axis=1)
        closer = dist < nearest
        assignment[closer] = i
        nearest = np.where(closer, dist, nearest)
    covering[k - 1] = nearest.max()
    radii = np.zeros(k)
    np.maximum.at(radii, assignment, nearest)
    return Clustering(centers, assignment, radii, covering)


def _covering_radii(points: np.ndarray, k_max: int) -> Iterator[float]:
    """Covering radius of farthest_point_clustering with 1, 2, ..., k_max centers, lazily."""
    nearest = np.linalg.norm(points - points[0], axis=1)
    yield float(nearest.max())
    for _ in range(1, min(k_max, points.shape[0])):
        far = int(np.argmax(nearest))
        nearest = np.minimum(nearest, np.linalg.norm(points - points[far], axis=1))
        yield float(nearest.max())


def _multi_indices(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """2-D multi-indices (a, b) with a + b < order, graded."""
    a, b = [], []
    for total in range(order):
        for i in range(total, -1, -1):
            a.append(i)
            b.append(total - i)
    return np.array(a, dtype=int), np.array(b, dtype=int)


def _monomials(delta: np.ndarray, ia: np.ndarray, ib: np.ndarray, order: int) -> np.ndarray:
    """Rows of x^a y^b for each multi-index."""
    px = np.ones((delta.shape[0], order))
    py = np.ones((delta.shape[0], order))
    for e in range(1, order):
        px[:, e] = px[:, e - 1] * delta[:, 0]
        py[:, e] = py[:, e - 1] * delta[:, 1]
    return px[:, ia] * py[:, ib]


def _log_truncation_error(p: int, rx: float, ry: float, h: float) -> float:
    """
    log of the largest (2^p/p!) (a b / h^2)^p exp(-(a - b)^2 / h^2) over a <= rx, b <= ry.

    For b >= rx the maximizer in b is (rx + sqrt(rx^2 + 2 p h^2)) / 2, clipped to [rx, ry];
    b <= rx never does better than b = rx.
    """
    b = min(max(0.5 * (rx + math.sqrt(rx * rx + 2.0 * p * h * h)), rx), ry)
    gap = max(b - rx, 0.0)
    return p * math.log(2.0 * rx * b / (h * h)) - math.lgamma(p + 1) - gap * gap / (h * h)


def _truncation_order(rx: float, ry: float, h: float, epsilon: float) -> int:
    """Smallest p whose truncation error factor is <= epsilon, or 0 when none <= MAX_ORDER."""
    if rx == 0.0 or ry == 0.0:
        return 1
    log_eps = math.log(epsilon)
    for p in range(1, MAX_ORDER + 1):
        if _log_truncation_error(p, rx, ry, h) <= log_eps:
            return p
    return 0


def plan_gauss_transform(problem: GaussTransformProblem) -> FgtPlan:
    """
    Choose cluster count and truncation order by a simple cost model.

    Cluster counts 1, 2, 4, ... are tried until two feasible counts in a row fail to beat
    the best plan, or until (N + M) K operations alone would cost more than it.

    Returns:
        FgtPlan; method 'exact' when direct summation is predicted cheaper
    """
    n, m = problem.n_sources, problem.n_targets
    direct_cost = float(n) * m
    if direct_cost <= DIRECT_CROSSOVER:
        return FgtPlan("exact")

    h = math.sqrt(2.0) * problem.bandwidth
    reach = h * math.sqrt(math.log(1.0 / problem.epsilon))
    k_max = max(1, min(n, int(4 * math.sqrt(n)) + 1, 1024))

    both = np.vstack([problem.sources, problem.targets])
    extent = np.ptp(both, axis=0)
    diameter = float(math.hypot(extent[0], extent[1]))
    area = max(float(extent[0] * extent[1]), float(max(extent.max(), h) ** 2) * 1e-6, 1e-300)

    best, best_cost = FgtPlan("exact"), direct_cost
    worse = 0
    for k, rx in enumerate(_covering_radii(problem.sources, k_max), start=1):
        if float(n + m) * k >= best_cost:
            break
        if k & (k - 1):
            continue
        # targets beyond rx + reach are skipped; none lies beyond the diameter
        order = _truncation_order(rx, min(rx + reach, diameter), h, problem.epsilon)
        if order:
            terms = order * (order + 1) // 2
            near = k * min(1.0, math.pi * (2 * rx + reach) ** 2 / area)
            cost = n * k + n * terms + m * k + m * max(near, 1.0) * terms
            if cost < best_cost:
                best, best_cost, worse = FgtPlan("ifgt", k, order, reach, rx), cost, 0
            else:
                worse += 1
                if worse == 2:
                    break
    return best


def _ifgt(problem: GaussTransformProblem, plan: FgtPlan) -> np.ndarray:
    h = math.sqrt(2.0) * problem.bandwidth
    clustering = farthest_point_clustering(problem.sources, plan.n_clusters)
    centers = problem.sources[clustering.center_indices]
    ia, ib = _multi_indices(plan.order)
    degree = ia + ib
    # 2^|alpha| / alpha!
    factor = np.exp(degree * math.log(2.0) - np.array([math.lgamma(a + 1) + math.lgamma(b + 1) for a, b in zip(ia, ib)]))

    out = np.zeros(problem.n_targets)
    for c in range(centers.shape[0]):
        members = np.nonzero(clustering.assignment == c)[0]
        if members.size == 0:
            continue
        coeffs = np.zeros(ia.size)
        for start in range(0, members.size, TARGET_BLOCK):
            block = members[start:start + TARGET_BLOCK]
            dx = (problem.sources[block] - centers[c]) / h
            weights = problem.charges[block] * np.exp(-np.sum(dx * dx, axis=1))
            coeffs += weights @ _monomials(dx, ia, ib, plan.order)
        coeffs *= factor

        dy = (problem.targets - centers[c]) / h
        dist = np.sqrt(np.sum(dy * dy, axis=1)) * h
        near = np.nonzero(dist <= clustering.radii[c] + plan.cutoff)[0]
        for start in range(0, near.size, TARGET_BLOCK):
            block = near[start:start + TARGET_BLOCK]
            dyn = dy[block]
            out[block] += np.exp(-np.sum(dyn * dyn, axis=1)) * (_monomials(dyn, ia, ib, plan.order) @ coeffs)
    return out


def gauss_transform_fast(problem: GaussTransformProblem) -> np.ndarray:
    """
    Gauss transform within epsilon * sum|q| of the exact value, element-wise.

    Falls back to gauss_transform_exact for small or unfavourable problems; the
    result is deterministic for a given problem.
    """
    plan = plan_gauss_transform(problem)
    if plan.method == "exact":
        return gauss_transform_exact(problem)
    logger.debug(f"IFGT: N={problem.n_sources} M={problem.n_targets} K={plan.n_clusters} p={plan.order}")
    return _ifgt(problem, plan)


def gauss_transform(problem: GaussTransformProblem, accelerate: bool) -> Tuple[np.ndarray, bool]:
    """
    Dispatch helper.

    Returns:
        (values, whether the expansion path ran)
    """
    if not accelerate:
        return gauss_transform_exact(problem), False
    plan = plan_gauss_transform(problem)
    if plan.method == "exact":
        return gauss_transform_exact(problem), False
    return _ifgt(problem, plan), True

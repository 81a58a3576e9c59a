"""
Kernels for persistence diagrams
Persistence Fisher kernel plus the PSS, PWG, SW and Prob+k_G baselines, Gram
matrix assembly and the quantile heuristic for t.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Annotated, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter
from scipy.spatial.distance import cdist

from pfkernel.core.diagram import PersistenceDiagram, diagonal_projection
from pfkernel.core.fgt import GaussTransformProblem, gauss_transform
from pfkernel.core.measure import SmoothingParams, smooth
from pfkernel.core.metric import fim, fim_matrix
from pfkernel.utils.errors import DegenerateDistancesError
from pfkernel.utils.logger import setup_logger
from pfkernel.utils.parallel import parallel_map

logger = setup_logger(__name__)


class PFParams(BaseModel):
    kernel: Literal["pf"] = "pf"
    t: float = Field(..., gt=0, description="k_PF = exp(-t d_FIM)")
    sigma: float = Field(..., gt=0, description="smoothing bandwidth")
    accel: Literal["exact", "fgt"] = "exact"
    epsilon: float = Field(1e-6, gt=0, lt=1)

    model_config = {"frozen": True}

    @property
    def smoothing(self) -> SmoothingParams:
        return SmoothingParams(sigma=self.sigma, accel=self.accel, epsilon=self.epsilon)


class PSSParams(BaseModel):
    kernel: Literal["pss"] = "pss"
    sigma: float = Field(..., gt=0, description="scale parameter")
    accel: Literal["exact", "fgt"] = "exact"
    epsilon: float = Field(1e-6, gt=0, lt=1)

    model_config = {"frozen": True}


class PWGParams(BaseModel):
    kernel: Literal["pwg"] = "pwg"
    C: float = Field(..., gt=0, description="weight scale in arctan(C pers^q)")
    q: float = Field(..., gt=0, description="weight exponent")
    sigma: float = Field(..., gt=0, description="Gaussian embedding bandwidth")
    tau: float = Field(..., gt=0, description="outer Gaussian bandwidth")

    model_config = {"frozen": True}


class SWParams(BaseModel):
    kernel: Literal["sw"] = "sw"
    M: int = Field(..., ge=1, description="number of directions")
    sigma: float = Field(..., gt=0)

    model_config = {"frozen": True}


class ProbGaussParams(BaseModel):
    """Smoothed measure on a fixed grid, compared with a Gaussian kernel."""
    kernel: Literal["prob"] = "prob"
    sigma: float = Field(..., gt=0, description="smoothing bandwidth")
    bandwidth: float = Field(..., gt=0, description="Gaussian kernel bandwidth on the simplex")
    grid_size: int = Field(20, ge=2, description="grid points per axis")
    grid_lo: Optional[Tuple[float, float]] = Field(None, description="lower-left grid corner")
    grid_hi: Optional[Tuple[float, float]] = Field(None, description="upper-right grid corner")

    model_config = {"frozen": True}


KernelParams = Annotated[
    Union[PFParams, PSSParams, PWGParams, SWParams, ProbGaussParams],
    Field(discriminator="kernel"),
]
kernel_params_adapter = TypeAdapter(KernelParams)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric kernel matrix with its provenance."""
    values: np.ndarray
    kernel: BaseModel
    diagram_ids: List[str]
    distances: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        n = self.values.shape[0]
        if self.values.shape != (n, n):
            raise ValueError(f"Gram matrix must be square, got {self.values.shape}")
        if len(self.diagram_ids) != n:
            raise ValueError(f"{len(self.diagram_ids)} ids for a {n}x{n} matrix")

    def __len__(self) -> int:
        return self.values.shape[0]

    def with_t(self, t: float) -> "GramMatrix":
        """
        PF Gram for another t from the cached d_FIM matrix.
        """
        if not isinstance(self.kernel, PFParams) or self.distances is None:
            raise ValueError("with_t needs a PF Gram matrix with cached distances")
        params = self.kernel.model_copy(update={"t": t})
        return replace(self, values=pf_gram_from_distances(self.distances, t), kernel=params)

    def subset(self, rows: Sequence[int], cols: Optional[Sequence[int]] = None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.values[np.ix_(rows, cols)]


def _points(diagram: PersistenceDiagram) -> np.ndarray:
    return diagram.finite_points()


def pf_kernel(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram, params: PFParams) -> float:
    """
    Persistence Fisher kernel exp(-t d_FIM).
    """
    return float(np.exp(-params.t * fim(dg_i, dg_j, params.smoothing).value))


def pss_kernel(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram, params: PSSParams) -> float:
    """
    Persistence scale-space kernel.

    (1 / (8 pi sigma)) sum_{p, p'} exp(-|p - p'|^2 / (8 sigma)) - exp(-|p - mirror(p')|^2 / (8 sigma))
    with mirror(a, b) = (b, a).
    """
    p_i, p_j = _points(dg_i), _points(dg_j)
    if not len(p_i) or not len(p_j):
        return 0.0
    mirrored = p_j[:, ::-1]
    scale = 8.0 * params.sigma
    if params.accel == "fgt":
        # exp(-d^2 / (8 sigma)) is a Gaussian of bandwidth 2 sqrt(sigma)
        problem = GaussTransformProblem(
            sources=np.vstack([p_j, mirrored]),
            charges=np.concatenate([np.ones(len(p_j)), -np.ones(len(p_j))]),
            targets=p_i,
            bandwidth=2.0 * math.sqrt(params.sigma),
            epsilon=params.epsilon,
        )
        sums, _ = gauss_transform(problem, True)
        total = float(sums.sum())
    else:
        total = float(np.sum(np.exp(-cdist(p_i, p_j, "sqeuclidean") / scale))
                      - np.sum(np.exp(-cdist(p_i, mirrored, "sqeuclidean") / scale)))
    return total / (8.0 * math.pi * params.sigma)


def _pwg_weights(points: np.ndarray, params: PWGParams) -> np.ndarray:
    pers = points[:, 1] - points[:, 0]
    return np.arctan(params.C * np.power(pers, params.q))


def _pwg_inner(p_a: np.ndarray, w_a: np.ndarray, p_b: np.ndarray, w_b: np.ndarray, sigma: float) -> float:
    if not len(p_a) or not len(p_b):
        return 0.0
    return float(w_a @ np.exp(-cdist(p_a, p_b, "sqeuclidean") / (2.0 * sigma ** 2)) @ w_b)


def pwg_kernel(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram, params: PWGParams) -> float:
    """
    Persistence weighted Gaussian kernel exp(-|mu_i - mu_j|^2_H / (2 tau^2)).
    """
    p_i, p_j = _points(dg_i), _points(dg_j)
    w_i, w_j = _pwg_weights(p_i, params), _pwg_weights(p_j, params)
    sq = (_pwg_inner(p_i, w_i, p_i, w_i, params.sigma)
          - 2.0 * _pwg_inner(p_i, w_i, p_j, w_j, params.sigma)
          + _pwg_inner(p_j, w_j, p_j, w_j, params.sigma))
    return float(np.exp(-max(sq, 0.0) / (2.0 * params.tau ** 2)))


def sw_directions(n_directions: int) -> np.ndarray:
    """theta_k = -pi/2 + k pi / M, k = 0..M-1."""
    return -math.pi / 2 + np.arange(n_directions) * math.pi / n_directions


def sw_distance(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram,
                n_directions: Optional[int] = None, thetas: Optional[Sequence[float]] = None) -> float:
    """
    Sliced Wasserstein distance, averaged over directions.

    Each diagram is augmented with the other's diagonal projections so both sides
    have the same cardinality; d_SW = (1/M) sum_k |sort(A theta_k) - sort(B theta_k)|_1.

    Args:
        dg_i, dg_j: finite diagrams
        n_directions: M evenly spaced directions over [-pi/2, pi/2)
        thetas: explicit angles instead of n_directions
    """
    if thetas is None:
        if n_directions is None:
            raise ValueError("give n_directions or thetas")
        thetas = sw_directions(n_directions)
    thetas = np.asarray(thetas, dtype=float)
    p_i, p_j = _points(dg_i), _points(dg_j)
    a = np.vstack([p_i, diagonal_projection(p_j)])
    b = np.vstack([p_j, diagonal_projection(p_i)])
    if not len(a):
        return 0.0
    directions = np.vstack([np.cos(thetas), np.sin(thetas)])
    proj_a = np.sort(a @ directions, axis=0)
    proj_b = np.sort(b @ directions, axis=0)
    return float(np.mean(np.sum(np.abs(proj_a - proj_b), axis=0)))


def sw_kernel(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram, params: SWParams) -> float:
    """
    Sliced Wasserstein kernel exp(-d_SW / (2 sigma^2)).
    """
    return float(np.exp(-sw_distance(dg_i, dg_j, params.M) / (2.0 * params.sigma ** 2)))


def resolve_grid(diagrams: Sequence[PersistenceDiagram], params: ProbGaussParams) -> ProbGaussParams:
    """
    Fill in missing grid bounds from the bounding box of the diagrams (padded by 3 sigma).
    """
    if params.grid_lo is not None and params.grid_hi is not None:
        return params
    pts = [_points(d) for d in diagrams if len(d)]
    if pts:
        allp = np.vstack(pts)
        lo, hi = allp.min(axis=0) - 3 * params.sigma, allp.max(axis=0) + 3 * params.sigma
    else:
        lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    return params.model_copy(update={
        "grid_lo": params.grid_lo or (float(lo[0]), float(lo[1])),
        "grid_hi": params.grid_hi or (float(hi[0]), float(hi[1])),
    })


def prob_grid(params: ProbGaussParams) -> np.ndarray:
    xs = np.linspace(params.grid_lo[0], params.grid_hi[0], params.grid_size)
    ys = np.linspace(params.grid_lo[1], params.grid_hi[1], params.grid_size)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def prob_embedding(diagram: PersistenceDiagram, params: ProbGaussParams) -> np.ndarray:
    """
    Probability vector of a diagram on the fixed grid; an empty diagram maps to zeros.
    """
    grid = prob_grid(params)
    pts = _points(diagram)
    if not len(pts):
        return np.zeros(grid.shape[0])
    return smooth(pts, grid, SmoothingParams(sigma=params.sigma)).weights


def _prob_from_embeddings(e_i: np.ndarray, e_j: np.ndarray, params: ProbGaussParams) -> float:
    return float(np.exp(-np.sum((e_i - e_j) ** 2) / (2.0 * params.bandwidth ** 2)))


def prob_gauss_kernel(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram, params: ProbGaussParams) -> float:
    """
    Gaussian kernel between smoothed measures on a shared grid.
    """
    params = resolve_grid([dg_i, dg_j], params)
    return _prob_from_embeddings(prob_embedding(dg_i, params), prob_embedding(dg_j, params), params)


def kernel_value(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram, params: BaseModel) -> float:
    """Dispatch on the params type."""
    if isinstance(params, PFParams):
        return pf_kernel(dg_i, dg_j, params)
    if isinstance(params, PSSParams):
        return pss_kernel(dg_i, dg_j, params)
    if isinstance(params, PWGParams):
        return pwg_kernel(dg_i, dg_j, params)
    if isinstance(params, SWParams):
        return sw_kernel(dg_i, dg_j, params)
    if isinstance(params, ProbGaussParams):
        return prob_gauss_kernel(dg_i, dg_j, params)
    raise TypeError(f"unknown kernel params {type(params).__name__}")


def pf_gram_from_distances(distances: np.ndarray, t: float) -> np.ndarray:
    values = np.exp(-t * distances)
    np.fill_diagonal(values, 1.0)
    return values


def _pair_kernel(task):
    dg_i, dg_j, params = task
    return kernel_value(dg_i, dg_j, params)


def gram(diagrams: Sequence[PersistenceDiagram], params: BaseModel,
         diagram_ids: Optional[Sequence[str]] = None, n_jobs: Optional[int] = None) -> GramMatrix:
    """
    Kernel matrix of a diagram set.

    PF keeps the d_FIM matrix so other t values cost only an exponentiation
    (GramMatrix.with_t). Prob+k_G resolves its grid once from the whole set.

    Args:
        diagrams: at least one diagram
        params: kernel parameters
        diagram_ids: identifiers (default '0'..'n-1')
        n_jobs: joblib workers

    Returns:
        GramMatrix
    """
    n = len(diagrams)
    if n < 1:
        raise ValueError("gram needs at least one diagram")
    ids = [str(k) for k in range(n)] if diagram_ids is None else [str(x) for x in diagram_ids]
    logger.info(f"Assembling {n}x{n} Gram matrix, kernel={params.kernel}")

    if isinstance(params, PFParams):
        distances = fim_matrix(diagrams, params.smoothing, n_jobs)
        return GramMatrix(pf_gram_from_distances(distances, params.t), params, ids, distances)

    values = np.zeros((n, n))
    if isinstance(params, ProbGaussParams):
        params = resolve_grid(diagrams, params)
        embeddings = [prob_embedding(d, params) for d in diagrams]
        for i in range(n):
            for j in range(i, n):
                values[i, j] = values[j, i] = _prob_from_embeddings(embeddings[i], embeddings[j], params)
        return GramMatrix(values, params, ids)

    rows, cols = np.triu_indices(n)
    tasks = [(diagrams[i], diagrams[j], params) for i, j in zip(rows, cols)]
    results = parallel_map(_pair_kernel, tasks, n_jobs)
    values[rows, cols] = results
    values[cols, rows] = results
    return GramMatrix(values, params, ids)


def off_diagonal(matrix: np.ndarray) -> np.ndarray:
    """Strict upper-triangle entries."""
    rows, cols = np.triu_indices(matrix.shape[0], k=1)
    return matrix[rows, cols]


def quantile_t(fim_values: Sequence[float], s: float) -> float:
    """
    t such that 1/t is the s% quantile of the given d_FIM values.

    Nearest-rank quantile: the value at 1-based position ceil(s n / 100) of the
    sorted list (at least position 1); s = 100 gives the maximum.

    Raises:
        DegenerateDistancesError: the selected quantile is zero. That happens whenever
            the chosen rank falls on a zero distance (duplicate diagrams), not only
            when every distance is zero
    """
    values = np.sort(np.asarray(fim_values, dtype=float).ravel())
    if values.size == 0:
        raise ValueError("quantile_t needs at least one distance")
    if not 0 < s <= 100:
        raise ValueError(f"s must lie in (0, 100], got {s}")
    rank = max(1, math.ceil(round(s * values.size / 100.0, 9)))
    q = float(values[rank - 1])
    if q <= 0.0:
        raise DegenerateDistancesError(
            f"the {s}% quantile of the d_FIM values is 0; use a larger sigma or distinct diagrams")
    return 1.0 / q

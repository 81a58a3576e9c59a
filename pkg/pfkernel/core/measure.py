"""
Smoothed and normalized measures of persistence diagrams
Each diagram becomes a probability vector on a finite support set Theta.

Gaussian convention: N(x; u, sigma I) is taken as exp(-|x - u|^2 / (2 sigma^2)); the
1 / (2 pi sigma^2) prefactor cancels in the normalization and is omitted.
"""
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import logsumexp
from scipy.spatial.distance import cdist

from pfkernel.core.diagram import PersistenceDiagram, diagonal_projection
from pfkernel.core.fgt import GaussTransformProblem, gauss_transform
from pfkernel.utils.errors import EmptyMeasureError, SmoothingUnderflowError
from pfkernel.utils.logger import setup_logger

logger = setup_logger(__name__)

UNDERFLOW_THRESHOLD = 1e-300


class SmoothingParams(BaseModel):
    """Gaussian smoothing bandwidth and summation method."""
    sigma: float = Field(..., gt=0, description="Gaussian bandwidth")
    accel: Literal["exact", "fgt"] = Field("exact", description="exact sums or Fast Gauss Transform")
    epsilon: float = Field(1e-6, gt=0, lt=1, description="FGT error tolerance")

    model_config = {"frozen": True}


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability vector on an ordered support list."""
    support: np.ndarray
    weights: np.ndarray
    accelerated: bool = field(default=False, compare=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.shape[0] != support.shape[0]:
            raise ValueError(f"{weights.shape[0]} weights for {support.shape[0]} support points")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if weights.size and abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.weights.shape[0]


def build_support(dg_i: PersistenceDiagram, dg_j: PersistenceDiagram) -> np.ndarray:
    """
    Theta = Dg_i, Dg_j and both diagonal mirrors, without multiplicity.

    Duplicates are detected by exact coordinate equality. The result is in
    lexicographic order.
    """
    p_i, p_j = dg_i.finite_points(), dg_j.finite_points()
    stacked = np.vstack([p_i, diagonal_projection(p_j), p_j, diagonal_projection(p_i)])
    if stacked.shape[0] == 0:
        return np.empty((0, 2))
    return np.unique(stacked, axis=0)


def _log_space_weights(points: np.ndarray, theta: np.ndarray, sigma: float) -> np.ndarray:
    exponents = -cdist(theta, points, "sqeuclidean") / (2.0 * sigma ** 2)
    log_rows = logsumexp(exponents, axis=1)
    log_z = logsumexp(log_rows)
    if not np.isfinite(log_z):
        raise SmoothingUnderflowError(
            f"Gaussian sums vanish even in log space for sigma={sigma}; use a larger sigma")
    return np.exp(log_rows - log_z)


def smooth(points: np.ndarray, theta: np.ndarray, params: SmoothingParams) -> DiscreteMeasure:
    """
    Smooth a multiset of points with a Gaussian and normalize on Theta.

    Args:
        points: (n, 2) source points (multiplicity counts)
        theta: (m, 2) support
        params: bandwidth and summation method

    Returns:
        DiscreteMeasure on theta; weights[k] = sum_u G(theta_k - u) / Z where
        Z sums over all of theta
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    theta = np.asarray(theta, dtype=float).reshape(-1, 2)
    if points.shape[0] and not theta.shape[0]:
        raise EmptyMeasureError("support is empty but the diagram has points")
    if not points.shape[0]:
        if theta.shape[0]:
            raise EmptyMeasureError("no points to smooth onto a non-empty support")
        return DiscreteMeasure(theta, np.empty(0))

    problem = GaussTransformProblem(
        sources=points,
        charges=np.ones(points.shape[0]),
        targets=theta,
        bandwidth=params.sigma,
        epsilon=params.epsilon,
    )
    sums, accelerated = gauss_transform(problem, params.accel == "fgt")
    # FGT values can dip a hair below zero far from every source
    sums = np.clip(sums, 0.0, None)
    z = sums.sum()
    if z < UNDERFLOW_THRESHOLD:
        logger.debug(f"Normalizer {z!r} underflows; recomputing in log space")
        weights = _log_space_weights(points, theta, params.sigma)
        accelerated = False
    else:
        weights = sums / z
    # renormalize once more so the sum is 1 to the last bits
    weights = weights / weights.sum()
    return DiscreteMeasure(theta, weights, accelerated)

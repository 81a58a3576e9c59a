"""
Synthetic data
Linked twist map orbits and two-regime sequences for change-point experiments.
"""
import math
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from pfkernel.core.homology import PointCloud
from pfkernel.utils.logger import setup_logger

logger = setup_logger(__name__)


class OrbitSpec(BaseModel):
    r: float = Field(..., gt=0, description="twist parameter")
    n_points: int = Field(..., ge=1, description="points in the orbit, initial position included")
    seed: int = Field(..., description="generator seed")


def twist_map_orbit(s0: float, t0: float, r: float, n_points: int) -> np.ndarray:
    """
    Iterate the linked twist map from (s0, t0).

        s_{i+1} = s_i + r t_i (1 - t_i)          mod 1
        t_{i+1} = t_i + r s_{i+1} (1 - s_{i+1})  mod 1

    mod 1 is x - floor(x); every term is nonnegative, so the result lies in [0, 1).

    Returns:
        (n_points, 2) array starting with (s0, t0)
    """
    out = np.empty((n_points, 2))
    s, t = float(s0), float(t0)
    for i in range(n_points):
        out[i, 0], out[i, 1] = s, t
        s = s + r * t * (1.0 - t)
        s -= math.floor(s)
        t = t + r * s * (1.0 - s)
        t -= math.floor(t)
    return out


def orbit(spec: OrbitSpec) -> PointCloud:
    """
    One orbit from a uniformly random initial position in [0, 1)^2.
    """
    rng = np.random.default_rng(spec.seed)
    s0, t0 = rng.uniform(0.0, 1.0, size=2)
    return PointCloud(twist_map_orbit(s0, t0, spec.r, spec.n_points))


def orbit_dataset(r_values: Sequence[float], per_class: int, n_points: int, seed: int
                  ) -> List[Tuple[PointCloud, int]]:
    """
    per_class orbits for every r; label = index into r_values.

    Orbit number k (counted over the whole dataset) uses seed + k.
    """
    if not len(r_values):
        raise ValueError("r_values is empty")
    data: List[Tuple[PointCloud, int]] = []
    k = 0
    for label, r in enumerate(r_values):
        for _ in range(per_class):
            data.append((orbit(OrbitSpec(r=r, n_points=n_points, seed=seed + k)), label))
            k += 1
    logger.info(f"Generated {len(data)} orbits ({len(r_values)} classes x {per_class}, {n_points} points)")
    return data


def changepoint_sequence(r_before: float, r_after: float, n_before: int, n_after: int,
                         n_points: int, seed: int) -> List[PointCloud]:
    """
    n_before orbits at r_before followed by n_after at r_after.

    The true change index (size of the first regime) is n_before.
    """
    if n_before < 2 or n_after < 2:
        raise ValueError("each regime needs at least 2 samples")
    rs = [r_before] * n_before + [r_after] * n_after
    return [orbit(OrbitSpec(r=r, n_points=n_points, seed=seed + k)) for k, r in enumerate(rs)]

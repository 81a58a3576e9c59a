"""
Persistent homology
Vietoris-Rips persistence (H0, H1) of point clouds and sublevel-set persistence
(H0) of functions sampled on a path.

Filtration convention: an edge {x, z} enters at a = d(x, z) / 2, i.e. the complex
at scale a holds every simplex whose pairwise distances are at most 2a. Many tools
use a = d instead; diagrams from those differ by a factor of two.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from pfkernel.core.diagram import PersistenceDiagram
from pfkernel.utils.errors import PointCloudError, UnsupportedDimensionError
from pfkernel.utils.logger import setup_logger

logger = setup_logger(__name__)

_NO_COFACE = np.iinfo(np.int64).max
# edges per vectorized coface block
_CHUNK = 512


@dataclass(frozen=True)
class PointCloud:
    """Finite set of points in d-dimensional Euclidean space."""
    points: np.ndarray

    def __post_init__(self):
        arr = np.array(self.points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise PointCloudError(f"expected an (n, d) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PointCloudError("point cloud has NaN or infinite coordinates")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class FilteredEdge:
    endpoints: Tuple[int, int]
    value: float


class _UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        """Merge the sets rooted at a and b; returns the surviving root."""
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


def load_point_cloud(path: Union[str, Path]) -> PointCloud:
    """
    Read whitespace-separated coordinates, one point per line.
    """
    try:
        arr = np.loadtxt(path, ndmin=2, comments="#")
    except ValueError as e:
        raise PointCloudError(f"{path}: {e}") from None
    return PointCloud(arr)


def save_point_cloud(cloud: PointCloud, path: Union[str, Path]) -> None:
    np.savetxt(path, cloud.points, fmt="%.17g")


def enclosing_radius(cloud: PointCloud) -> float:
    """
    Smallest scale at which some vertex is joined to every other vertex.

    From that scale on the Rips complex is a cone, so it has no homology above
    dimension 0 and a single component.
    """
    if len(cloud) < 2:
        return 0.0
    return float(squareform(pdist(cloud.points)).max(axis=1).min() / 2.0)


def _edge_arrays(cloud: PointCloud, max_scale: float) -> Tuple[np.ndarray, np.ndarray]:
    n = len(cloud)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    values = pdist(cloud.points) / 2.0
    i_idx, j_idx = np.triu_indices(n, k=1)
    keep = values <= max_scale
    values, i_idx, j_idx = values[keep], i_idx[keep], j_idx[keep]
    # triu_indices is already lexicographic, so a stable sort keeps that order on ties
    order = np.argsort(values, kind="stable")
    ends = np.column_stack([i_idx[order], j_idx[order]]).astype(np.int64)
    return ends, values[order]


def filtered_edges(cloud: PointCloud, max_scale: float = np.inf) -> List[FilteredEdge]:
    """
    Edges with filtration value <= max_scale in filtration order.

    Ties are broken by the lexicographic vertex pair.
    """
    ends, values = _edge_arrays(cloud, max_scale)
    return [FilteredEdge((int(i), int(j)), float(v)) for (i, j), v in zip(ends, values)]


def _h0_pairs(n: int, ends: np.ndarray, values: np.ndarray) -> Tuple[List[Tuple[float, float]], np.ndarray]:
    uf = _UnionFind(n)
    pairs: List[Tuple[float, float]] = []
    negative = np.zeros(len(ends), dtype=bool)
    for k, (i, j) in enumerate(ends.tolist()):
        a, b = uf.find(i), uf.find(j)
        if a == b:
            continue
        # every vertex is born at 0, so the elder rule has nothing to choose between
        uf.union(a, b)
        pairs.append((0.0, float(values[k])))
        negative[k] = True
    components = len({uf.find(v) for v in range(n)})
    pairs.extend([(0.0, np.inf)] * components)
    return pairs, negative


def _edge_ranks(n: int, ends: np.ndarray) -> np.ndarray:
    """Filtration position of every edge as an n x n table; len(ends) marks a missing edge."""
    rank = np.full((n, n), len(ends), dtype=np.int64)
    positions = np.arange(len(ends))
    rank[ends[:, 0], ends[:, 1]] = positions
    rank[ends[:, 1], ends[:, 0]] = positions
    return rank


def _coface_keys(rank: np.ndarray, ends: np.ndarray, columns: np.ndarray) -> np.ndarray:
    """
    Keys of the triangles on each edge in `columns`, one row per edge and one entry per
    third vertex (_NO_COFACE where no triangle closes).

    A triangle's key is (position of its latest edge) * n + (vertex opposite that edge).
    Keys sort triangles by filtration value and every triangle after its edges.
    """
    n, m = rank.shape[0], len(ends)
    a, b = ends[columns, 0], ends[columns, 1]
    ra, rb = rank[a], rank[b]
    k = columns[:, None]
    latest = np.maximum(np.maximum(ra, rb), k)
    opposite = np.where(latest == k, np.arange(n)[None, :],
                        np.where(latest == ra, b[:, None], a[:, None]))
    return np.where((ra < m) & (rb < m), latest * n + opposite, _NO_COFACE)


def _coboundary(rank: np.ndarray, ends: np.ndarray, column: int) -> np.ndarray:
    keys = _coface_keys(rank, ends, np.array([column]))[0]
    return np.sort(keys[keys != _NO_COFACE])


def _h1_pairs(n: int, ends: np.ndarray, values: np.ndarray, negative: np.ndarray) -> List[Tuple[float, float]]:
    """
    H1 pairs by reducing the coboundary matrix over Z/2.

    Edges that merged two components never start a cocycle and are skipped. Columns
    are reduced from the latest edge to the earliest; a column's pivot is its earliest
    triangle. An edge whose earliest triangle has that edge as its latest face is paired
    with it straight away (a zero-persistence pair that no other column can claim).
    """
    if len(ends) == 0:
        return []
    rank = _edge_ranks(n, ends)
    columns = np.flatnonzero(~negative)
    pivot_owner: Dict[int, int] = {}
    pending: List[int] = []
    for start in range(0, len(columns), _CHUNK):
        chunk = columns[start:start + _CHUNK]
        first = _coface_keys(rank, ends, chunk).min(axis=1)
        apparent = (first != _NO_COFACE) & (first // n == chunk)
        pivot_owner.update(zip(first[apparent].tolist(), chunk[apparent].tolist()))
        pending.extend(chunk[~apparent].tolist())
    logger.debug(f"H1 reduction: {len(ends)} edges, {len(pivot_owner)} apparent pairs, "
                 f"{len(pending)} columns to reduce")

    reduced: Dict[int, np.ndarray] = {}
    pairs: List[Tuple[float, float]] = []
    for k in reversed(pending):
        column = _coboundary(rank, ends, k)
        while column.size:
            owner = pivot_owner.get(int(column[0]))
            if owner is None:
                break
            other = reduced.get(owner)
            if other is None:
                other = reduced[owner] = _coboundary(rank, ends, owner)
            column = np.setxor1d(column, other, assume_unique=True)
        if column.size:
            pivot = int(column[0])
            pivot_owner[pivot] = k
            reduced[k] = column
            pairs.append((float(values[k]), float(values[pivot // n])))
        else:
            pairs.append((float(values[k]), np.inf))
    return pairs


def _to_diagram(pairs: List[Tuple[float, float]], dim: int) -> PersistenceDiagram:
    kept = [(b, d) for b, d in pairs if d > b]
    return PersistenceDiagram(kept, dim).sorted()


def rips_persistence(cloud: PointCloud, max_dim: int = 1, max_scale: float = np.inf) -> List[PersistenceDiagram]:
    """
    Vietoris-Rips persistence diagrams.

    The filtration is cut at min(max_scale, enclosing_radius(cloud)); above the
    enclosing radius every new simplex only yields zero-persistence pairs, so the
    diagrams are those of the full filtration up to max_scale.

    Args:
        cloud: input point cloud
        max_dim: 0 for [H0], 1 for [H0, H1]
        max_scale: largest filtration value a included in the complex

    Returns:
        list of diagrams indexed by homology dimension; essential classes have death inf
        and zero-persistence pairs are discarded
    """
    if max_dim not in (0, 1):
        raise UnsupportedDimensionError(f"max_dim must be 0 or 1, got {max_dim}")
    if len(cloud) == 0:
        raise PointCloudError("point cloud is empty")
    if not max_scale > 0:
        raise PointCloudError(f"max_scale must be positive, got {max_scale}")

    ends, values = _edge_arrays(cloud, min(max_scale, enclosing_radius(cloud)))
    h0, negative = _h0_pairs(len(cloud), ends, values)
    diagrams = [_to_diagram(h0, 0)]
    if max_dim == 1:
        diagrams.append(_to_diagram(_h1_pairs(len(cloud), ends, values, negative), 1))
    logger.debug(f"Rips persistence of {len(cloud)} points: " +
                 ", ".join(f"H{k}={len(d)}" for k, d in enumerate(diagrams)))
    return diagrams


def sublevel_persistence(values: Sequence[float]) -> PersistenceDiagram:
    """
    H0 persistence of the sublevel filtration of a function sampled on a path.

    Local minima give births; when two components meet, the one with the later birth
    dies (elder rule, ties broken by the later sample index). The global minimum is
    essential.

    Args:
        values: samples f(0), ..., f(n-1)

    Returns:
        H0 diagram
    """
    f = np.asarray(values, dtype=float).ravel()
    if f.size == 0:
        raise PointCloudError("sampled function is empty")
    if not np.all(np.isfinite(f)):
        raise PointCloudError("sampled function has non-finite values")

    n = f.size
    uf = _UnionFind(n)
    # oldest[root] is the vertex that gave the component its birth
    oldest = list(range(n))
    added = np.zeros(n, dtype=bool)
    pairs: List[Tuple[float, float]] = []
    order = np.lexsort((np.arange(n), f))

    def elder_key(vertex: int) -> Tuple[float, int]:
        return (f[vertex], vertex)

    for v in order:
        v = int(v)
        added[v] = True
        for w in (v - 1, v + 1):
            if 0 <= w < n and added[w]:
                a, b = uf.find(v), uf.find(w)
                if a == b:
                    continue
                elder, younger = sorted((oldest[a], oldest[b]), key=elder_key)
                pairs.append((float(f[younger]), float(f[v])))
                oldest[uf.union(a, b)] = elder
    elder = oldest[uf.find(int(order[0]))]
    pairs.append((float(f[elder]), np.inf))
    return _to_diagram(pairs, 0)

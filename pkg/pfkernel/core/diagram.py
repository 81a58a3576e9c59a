"""
Persistence diagram model
Birth/death points, diagonal geometry and the canonical text format
"""
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from pfkernel.utils.errors import DiagramParseError, DiagramValidationError, EssentialPointError
from pfkernel.utils.logger import setup_logger

logger = setup_logger(__name__)

Source = Union[str, Path, bytes, IO]


@dataclass(frozen=True)
class PersistencePoint:
    """One (birth, death) pair; death may be +inf for essential classes."""
    birth: float
    death: float

    def __post_init__(self):
        if not math.isfinite(self.birth):
            raise DiagramValidationError(f"birth must be finite, got {self.birth}")
        if math.isnan(self.death):
            raise DiagramValidationError("death is NaN")
        if self.death < self.birth:
            raise DiagramValidationError(f"death {self.death} < birth {self.birth}")

    @property
    def is_essential(self) -> bool:
        return math.isinf(self.death)

    @property
    def persistence(self) -> float:
        return self.death - self.birth


class EssentialPolicy(BaseModel):
    """What to do with points whose death is +inf."""
    mode: Literal["drop", "cap"] = Field("drop", description="drop essential points or cap their death")
    cap_value: Optional[float] = Field(None, description="replacement death value when mode=cap")

    @model_validator(mode="after")
    def _check_cap(self):
        if self.mode == "cap" and (self.cap_value is None or not math.isfinite(self.cap_value)):
            raise ValueError("cap policy needs a finite cap_value")
        return self

    @classmethod
    def drop(cls) -> "EssentialPolicy":
        return cls(mode="drop")

    @classmethod
    def cap(cls, value: float) -> "EssentialPolicy":
        return cls(mode="cap", cap_value=value)

    @classmethod
    def parse(cls, text: str) -> "EssentialPolicy":
        """
        Parse the command-line form: 'drop' or 'cap:<value>'.
        """
        text = text.strip().lower()
        if text == "drop":
            return cls.drop()
        if text.startswith("cap:"):
            return cls.cap(float(text[4:]))
        raise ValueError(f"unknown essential policy '{text}' (use drop or cap:<value>)")


class PersistenceDiagram:
    """
    Finite multiset of persistence points for one homology dimension.

    Points are kept as a read-only (n, 2) float array in insertion order; multiplicity
    is preserved. Instances are immutable.
    """

    __slots__ = ("_points", "_dim")

    def __init__(self, points: Union[np.ndarray, Sequence[Sequence[float]]] = (), homology_dimension: int = 0):
        arr = np.array(points, dtype=float).reshape(-1, 2) if len(points) else np.empty((0, 2))
        if homology_dimension < 0:
            raise DiagramValidationError(f"homology dimension must be >= 0, got {homology_dimension}")
        if arr.size:
            births, deaths = arr[:, 0], arr[:, 1]
            if not np.all(np.isfinite(births)):
                raise DiagramValidationError("births must be finite")
            if np.any(np.isnan(deaths)):
                raise DiagramValidationError("death is NaN")
            bad = np.nonzero(deaths < births)[0]
            if bad.size:
                k = int(bad[0])
                raise DiagramValidationError(f"death {deaths[k]} < birth {births[k]}")
        arr.setflags(write=False)
        self._points = arr
        self._dim = int(homology_dimension)

    @classmethod
    def from_points(cls, points: Iterable[PersistencePoint], homology_dimension: int = 0) -> "PersistenceDiagram":
        return cls([(p.birth, p.death) for p in points], homology_dimension)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def homology_dimension(self) -> int:
        return self._dim

    @property
    def has_essential(self) -> bool:
        return bool(np.any(np.isinf(self._points[:, 1])))

    def __len__(self) -> int:
        return self._points.shape[0]

    def __iter__(self) -> Iterator[PersistencePoint]:
        for b, d in self._points:
            yield PersistencePoint(float(b), float(d))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return self._dim == other._dim and np.array_equal(self._points, other._points)

    def __hash__(self):
        return hash((self._dim, self._points.tobytes()))

    def __repr__(self) -> str:
        return f"PersistenceDiagram(n={len(self)}, dim={self._dim})"

    def sorted(self) -> "PersistenceDiagram":
        """Same multiset, points in lexicographic order."""
        if not len(self):
            return self
        order = np.lexsort((self._points[:, 1], self._points[:, 0]))
        return PersistenceDiagram(self._points[order], self._dim)

    def finite_points(self) -> np.ndarray:
        """
        Points for geometric computations.

        Raises:
            EssentialPointError: when an essential point has not been resolved
        """
        if self.has_essential:
            raise EssentialPointError("diagram holds essential points; apply an EssentialPolicy first")
        return self._points

    def resolve_essential(self, policy: EssentialPolicy) -> "PersistenceDiagram":
        """
        Apply an essential-class policy.

        Args:
            policy: drop or cap(v)

        Returns:
            a diagram with finite deaths only
        """
        if not self.has_essential:
            return self
        pts = np.array(self._points)
        essential = np.isinf(pts[:, 1])
        if policy.mode == "drop":
            pts = pts[~essential]
        else:
            if np.any(pts[essential, 0] > policy.cap_value):
                raise DiagramValidationError(f"cap value {policy.cap_value} lies below an essential birth")
            pts[essential, 1] = policy.cap_value
        return PersistenceDiagram(pts, self._dim)


def project_to_diagonal(u: PersistencePoint) -> PersistencePoint:
    """
    Orthogonal projection onto the diagonal y = x.

    Raises:
        EssentialPointError: for death = inf
    """
    if u.is_essential:
        raise EssentialPointError(f"cannot project essential point ({u.birth}, inf)")
    mid = (u.birth + u.death) / 2.0
    return PersistencePoint(mid, mid)


def diagonal_projection(points: np.ndarray) -> np.ndarray:
    """Vectorized projection of an (n, 2) array of finite points."""
    if points.size and np.any(np.isinf(points)):
        raise EssentialPointError("cannot project essential points")
    mid = points.sum(axis=1) / 2.0
    return np.column_stack([mid, mid]) if points.size else np.empty((0, 2))


def diagonal_mirror(diagram: PersistenceDiagram) -> PersistenceDiagram:
    """
    Diagonal projections of every point, multiplicity kept.
    """
    return PersistenceDiagram(diagonal_projection(diagram.points), diagram.homology_dimension)


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_diagram(text: str, policy: Optional[EssentialPolicy] = None) -> PersistenceDiagram:
    """
    Parse the canonical text format.

    Args:
        text: file contents
        policy: essential-class policy (default drop)

    Returns:
        PersistenceDiagram with finite points
    """
    policy = policy or EssentialPolicy.drop()
    dim = 0
    rows: list[Tuple[float, float]] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0].lower() == "dim":
            if rows or len(fields) != 2:
                raise DiagramParseError("'dim <k>' must be a single header before any point", line_number)
            try:
                dim = int(fields[1])
            except ValueError:
                raise DiagramParseError(f"bad dimension '{fields[1]}'", line_number) from None
            if dim < 0:
                raise DiagramParseError(f"negative dimension {dim}", line_number)
            continue
        if len(fields) != 2:
            raise DiagramParseError(f"expected 'birth death', got {len(fields)} fields", line_number)
        try:
            # float() accepts inf / Inf / infinity in any case
            birth, death = float(fields[0]), float(fields[1])
        except ValueError:
            raise DiagramParseError(f"not a number in '{line}'", line_number) from None
        if not math.isfinite(birth):
            raise DiagramValidationError(f"line {line_number}: birth must be finite")
        if math.isnan(death) or death < birth:
            raise DiagramValidationError(f"line {line_number}: death {death} < birth {birth}")
        rows.append((birth, death))
    diagram = PersistenceDiagram(rows, dim)
    resolved = diagram.resolve_essential(policy)
    if len(resolved) != len(diagram):
        logger.debug(f"Dropped {len(diagram) - len(resolved)} essential points")
    return resolved


def load_diagram(source: Source, policy: Optional[EssentialPolicy] = None) -> PersistenceDiagram:
    """
    Load a diagram from a path, bytes or an open stream.

    Args:
        source: file path, raw bytes or file-like object
        policy: essential-class policy (default drop)

    Returns:
        PersistenceDiagram
    """
    return parse_diagram(_read_text(source), policy)


def format_diagram(diagram: PersistenceDiagram) -> str:
    """Canonical text; repr() floats so a reload is bit-exact."""
    out = io.StringIO()
    out.write(f"dim {diagram.homology_dimension}\n")
    for b, d in diagram.points:
        out.write(f"{float(b)!r} {float(d)!r}\n")
    return out.getvalue()


def save_diagram(diagram: PersistenceDiagram, dest: Union[str, Path, IO]) -> None:
    """
    Write a diagram in the canonical text format.

    Args:
        diagram: diagram to write (essential deaths written as inf)
        dest: path or text stream
    """
    text = format_diagram(diagram)
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8")
    else:
        dest.write(text)

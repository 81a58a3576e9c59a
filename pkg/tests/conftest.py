from typing import Callable, List

import numpy as np
import pytest

from pfkernel.core.diagram import PersistenceDiagram


def random_diagram(rng: np.random.Generator, n_points: int, scale: float = 1.0) -> PersistenceDiagram:
    births = rng.uniform(0.0, scale, n_points)
    deaths = births + rng.uniform(0.05 * scale, scale, n_points)
    return PersistenceDiagram(np.column_stack([births, deaths]))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20180617)


@pytest.fixture
def make_diagrams(rng) -> Callable[..., List[PersistenceDiagram]]:
    """Factory: count diagrams with 1..max_points random points each."""

    def make(count: int, max_points: int = 20, scale: float = 1.0) -> List[PersistenceDiagram]:
        return [random_diagram(rng, int(rng.integers(1, max_points + 1)), scale) for _ in range(count)]

    return make


@pytest.fixture
def write_diagram_files(tmp_path):
    """Write diagrams to tmp_path and return their paths plus a plain manifest."""
    from pfkernel.core.diagram import save_diagram

    def write(diagrams: List[PersistenceDiagram], prefix: str = "dg"):
        paths = []
        for k, d in enumerate(diagrams):
            path = tmp_path / f"{prefix}_{k:03d}.txt"
            save_diagram(d, path)
            paths.append(path)
        manifest = tmp_path / f"{prefix}_manifest.txt"
        manifest.write_text("".join(f"{p.name}\n" for p in paths), encoding="utf-8")
        return paths, manifest

    return write

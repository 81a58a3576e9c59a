"""
Input manifests
A manifest lists input files, one per line; relative paths are resolved against the
manifest's own directory.
"""
from pathlib import Path
from typing import List, Optional, Tuple, Union

import pandas as pd

from pfkernel.core.diagram import EssentialPolicy, PersistenceDiagram, load_diagram
from pfkernel.utils.errors import ManifestError
from pfkernel.utils.logger import setup_logger

logger = setup_logger(__name__)

PathLike = Union[str, Path]


def _resolve(base: Path, entry: str) -> Path:
    path = Path(entry)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ManifestError(f"listed file not found: {path}")
    return path


def read_manifest(path: PathLike) -> List[Path]:
    """
    One path per line; blank lines and '#' comments ignored.

    Returns:
        resolved paths in manifest order
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    entries = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            entries.append(_resolve(path.parent, line))
    if not entries:
        raise ManifestError(f"manifest lists no files: {path}")
    logger.info(f"Manifest {path}: {len(entries)} files")
    return entries


def read_labeled_manifest(path: PathLike) -> Tuple[List[Path], List[int]]:
    """
    CSV with columns path,label.

    Returns:
        (resolved paths, integer labels)
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    df = pd.read_csv(path)
    missing = {"path", "label"} - set(df.columns)
    if missing:
        raise ManifestError(f"labeled manifest {path} lacks columns {sorted(missing)}")
    paths = [_resolve(path.parent, str(p)) for p in df["path"]]
    logger.info(f"Labeled manifest {path}: {len(paths)} files, {df['label'].nunique()} classes")
    return paths, [int(v) for v in df["label"]]


def load_diagrams(paths: List[Path], policy: Optional[EssentialPolicy] = None) -> List[PersistenceDiagram]:
    diagrams = [load_diagram(p, policy) for p in paths]
    logger.info(f"Loaded {len(diagrams)} diagrams")
    return diagrams

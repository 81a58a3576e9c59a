"""
Result files
CSV tables through pandas plus a JSON metadata sidecar next to every output
"""
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from pfkernel import __version__
from pfkernel.utils.logger import setup_logger
from pfkernel.utils.settings import get_settings

logger = setup_logger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def get_output_path(name: str, output_dir: Optional[PathLike] = None) -> Path:
    """
    Resolve an output file name inside the output directory, creating the directory.

    Args:
        name: file name or path; absolute paths are kept
        output_dir: directory (default PF_OUTPUT_DIR)

    Returns:
        Path of the output file
    """
    path = Path(name)
    if not path.is_absolute() and path.parent == Path("."):
        path = Path(output_dir or get_settings().output_dir) / path
    if not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
        logger.info(f"Created output directory: {path.parent}")
    return path


def sidecar_path(path: PathLike) -> Path:
    """out.csv -> out.json"""
    return Path(path).with_suffix(".json")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "model_dump"):
        return _jsonable(value.model_dump())
    return value


def write_sidecar(path: PathLike, metadata: Dict[str, Any]) -> Path:
    """
    Write the metadata sidecar for an output file.

    The sidecar carries the package version plus whatever the caller records
    (command, argv, parameters, seeds); keys are sorted so equal runs give equal bytes.

    Returns:
        path of the JSON file
    """
    dest = sidecar_path(path)
    payload = {"version": __version__, **_jsonable(metadata)}
    dest.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Metadata written: {dest}")
    return dest


def read_sidecar(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if path.suffix != ".json":
        path = sidecar_path(path)
    return json.loads(path.read_text(encoding="utf-8"))


def write_table_csv(rows: Union[pd.DataFrame, Sequence[Dict[str, Any]]], path: PathLike) -> Path:
    """
    Write rows as CSV with round-trip float formatting.

    Returns:
        written path
    """
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    path = Path(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Table written: {path}, {len(df)} rows")
    return path


def write_matrix_csv(values: np.ndarray, ids: Sequence[str], path: PathLike) -> Path:
    """
    Square matrix as CSV with an id header row and an id column.
    """
    df = pd.DataFrame(np.asarray(values), index=list(ids), columns=list(ids))
    df.index.name = "id"
    path = Path(path)
    df.to_csv(path, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Matrix written: {path}, {df.shape[0]}x{df.shape[1]}")
    return path


def read_matrix_csv(path: PathLike) -> pd.DataFrame:
    df = pd.read_csv(path, index_col=0, float_precision="round_trip")
    df.index = df.index.astype(str)
    return df

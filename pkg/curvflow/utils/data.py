import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np

from curvflow.models.flow import HISTORY_FIELDS, FlowRecord
from curvflow.models.grid import ScalarField, SphereGrid
from curvflow.services.shape_service import make_radial, make_support
from curvflow.services.spherical_domain import build_grid
from curvflow.utils.errors import GridError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def load_data(file_path: Path, default_data=None):
    """
    Loads JSON data from a file, with optional default data.
    """
    file_path = Path(file_path)
    if file_path.exists():
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            logger.warning("[WARN] %s is not valid JSON: %s", file_path, e)
            return default_data if default_data is not None else {}
    return default_data if default_data is not None else {}


def save_data(file_path: Path, data: Any):
    """
    Saves data to a JSON file.
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2)


def _fmt(value: float) -> str:
    return FLOAT_FORMAT % value


# --- Scalar fields ---

def field_to_csv(field: ScalarField, file_path: Path):
    """Row-major nodes: ``theta,phi,value`` on S^2, ``theta,value`` on S^1."""
    grid = field.grid
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        if grid.n == 1:
            writer.writerow(["theta", "value"])
            for theta, value in zip(grid.theta, field.values):
                writer.writerow([_fmt(theta), _fmt(value)])
        else:
            writer.writerow(["theta", "phi", "value"])
            thetas, phis = np.meshgrid(grid.theta, grid.phi, indexing="ij")
            for theta, phi, value in zip(thetas.ravel(), phis.ravel(), field.values.ravel()):
                writer.writerow([_fmt(theta), _fmt(phi), _fmt(value)])


def read_field_csv(file_path: Path) -> Tuple[int, Tuple[int, ...], np.ndarray]:
    """(n, grid shape, values) from a field CSV."""
    with open(file_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        rows = [[float(x) for x in row] for row in reader if row]
    if header == ["theta", "value"]:
        values = np.array([row[1] for row in rows])
        return 1, (len(rows),), values
    if header != ["theta", "phi", "value"]:
        raise GridError(f"{file_path}: unexpected field header {header}")
    data = np.array(rows)
    n_theta = len(np.unique(data[:, 0]))
    if n_theta == 0 or len(rows) % n_theta:
        raise GridError(f"{file_path}: {len(rows)} rows do not form a lat-lon grid")
    shape = (n_theta, len(rows) // n_theta)
    return 2, shape, data[:, 2].reshape(shape)


def field_from_csv(file_path: Path, grid: Optional[SphereGrid] = None) -> ScalarField:
    n, shape, values = read_field_csv(file_path)
    if grid is None:
        grid = build_grid(n, *shape)
    elif grid.shape != shape:
        raise GridError(f"{file_path}: field has shape {shape}, grid has {grid.shape}")
    return ScalarField(grid, values)


# --- Flow history ---

def save_history_csv(records: Iterable[FlowRecord], file_path: Path):
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(HISTORY_FIELDS)
        for record in records:
            writer.writerow([value if isinstance(value, int) else _fmt(value) for value in record.as_row()])


def load_history_csv(file_path: Path) -> list:
    with open(file_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != HISTORY_FIELDS:
            raise ValueError(f"{file_path}: unexpected history header {reader.fieldnames}")
        return [
            FlowRecord(**{key: int(row[key]) if key == "step" else float(row[key]) for key in HISTORY_FIELDS})
            for row in reader
        ]


# --- Snapshots ---

def save_snapshot(shape, file_path: Path, t: float = 0.0, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Field CSV of u (support) or rho (radial) plus a JSON sidecar next to it."""
    file_path = Path(file_path)
    field_to_csv(shape.u if shape.representation == "support" else shape.rho, file_path)
    grid = shape.grid
    sidecar = {"representation": shape.representation, "n": grid.n, "shape": list(grid.shape), "t": t}
    if extra:
        sidecar.update(extra)
    meta_path = file_path.with_suffix(".json")
    save_data(meta_path, sidecar)
    return meta_path


def load_snapshot(file_path: Path):
    file_path = Path(file_path)
    meta = load_data(file_path.with_suffix(".json"), default_data=None)
    if not meta:
        raise GridError(f"{file_path}: snapshot sidecar is missing")
    field = field_from_csv(file_path)
    if field.grid.n != meta["n"] or list(field.grid.shape) != list(meta["shape"]):
        raise GridError(f"{file_path}: sidecar does not match the field")
    if meta["representation"] == "support":
        return make_support(field.grid, field.values), meta
    return make_radial(field.grid, field.values), meta

"""CSV and JSON serialization of fields, control surfaces, coefficients and reports.

Floats are written with ``repr``, which round-trips binary64 exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..errors import InputError
from ..fdsolver import ControlSurface
from ..grid import Field2D, Grid2D
from ..spectral import CoefficientMatrix

SNAPSHOT_HEADER = ("x1", "x2", "theta")
CONTROL_HEADER = ("t", "x1", "u")
COEFF_HEADER = ("j", "n", "c")


def _write_rows(path, header, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c).ravel().tolist() for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        fh.writelines(",".join(map(repr, row)) + "\n" for row in zip(*cols))
    return path


def _read_rows(path, header):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            got = next(reader, None)
            if got is None or tuple(h.strip() for h in got) != header:
                raise InputError(f"{path}: expected header {','.join(header)}, got {got}")
            rows = [[float(v) for v in row] for row in reader if row]
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return data


def snapshot_filename(index: int, t: float) -> str:
    return f"snapshot_{index:03d}_t{t:.6f}.csv"


def write_snapshot(field: Field2D, path):
    """Rows ``x1,x2,theta``, x1 outer and x2 inner (row-major over the grid)."""
    X1, X2 = field.grid.mesh()
    return _write_rows(path, SNAPSHOT_HEADER, (X1, X2, field.values))


def read_snapshot(path, t: float = 0.0) -> Field2D:
    data = _read_rows(path, SNAPSHOT_HEADER)
    x1 = np.unique(data[:, 0])
    x2 = np.unique(data[:, 1])
    if x1.size * x2.size != data.shape[0]:
        raise InputError(f"{path}: samples do not form a full tensor grid")
    grid = Grid2D(float(x1[-1]), x1.size, x2.size)
    if not (np.isclose(x1[0], 0.0) and np.isclose(x2[0], 0.0) and np.isclose(x2[-1], 1.0)):
        raise InputError(f"{path}: grid must span [0, L] x [0, 1]")
    return Field2D(data[:, 2].reshape(x1.size, x2.size), grid, t)


def write_control(surface: ControlSurface, path):
    T, X = np.meshgrid(surface.times, surface.x1, indexing="ij")
    return _write_rows(path, CONTROL_HEADER, (T, X, surface.values))


def read_control(path) -> ControlSurface:
    data = _read_rows(path, CONTROL_HEADER)
    times = np.unique(data[:, 0])
    x1 = np.unique(data[:, 1])
    if times.size * x1.size != data.shape[0]:
        raise InputError(f"{path}: control samples do not form a full (t, x1) grid")
    return ControlSurface(times, x1, data[:, 2].reshape(times.size, x1.size))


def write_coefficients(c: CoefficientMatrix, path):
    J, N = np.meshgrid(np.arange(c.J + 1), np.arange(c.N + 1), indexing="ij")
    return _write_rows(path, COEFF_HEADER, (J, N, c.c))


def read_coefficients(path, L: float = 1.0) -> CoefficientMatrix:
    data = _read_rows(path, COEFF_HEADER)
    J, N = int(data[:, 0].max()), int(data[:, 1].max())
    c = np.zeros((J + 1, N + 1))
    c[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    return CoefficientMatrix(c, L)


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def write_json(obj: dict, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_finite_or_none(obj), indent=2, allow_nan=False) + "\n")
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

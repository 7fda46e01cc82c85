"""CSV tables, legacy VTK fields and JSON manifests."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..grid import StructuredGrid2D


def fmt(v) -> str:
    """Scientific notation with four significant digits; blank for missing values."""
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return f"{float(v):.3E}"


def unfmt(text: str):
    text = text.strip()
    return None if text == "" else float(text)


def round4(v):
    return None if v is None else float(fmt(v)) if fmt(v) else None


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def vtk_text(grid: StructuredGrid2D, fields: dict, title: str = "edgems field") -> str:
    """Legacy ASCII structured-points dataset with one scalar per entry of ``fields`` (full nodal vectors)."""
    x0, _, y0, _ = grid.bounds
    n = grid.n_nodes
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        f"ORIGIN {x0:.17g} {y0:.17g} 0",
        f"SPACING {grid.hx:.17g} {grid.hy:.17g} 1",
        f"POINT_DATA {n}",
    ]
    for name, values in fields.items():
        values = np.asarray(values, dtype=float).ravel()
        if values.size != n:
            raise ValueError(f"field {name!r} has {values.size} values, expected {n}")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.10e}" for v in values)
    return "\n".join(lines) + "\n"


def write_vtk(path, grid: StructuredGrid2D, fields: dict, title: str = "edgems field") -> None:
    atomic_write(path, vtk_text(grid, fields, title))


def read_vtk_scalars(path) -> dict:
    """Scalars of a file written by :func:`write_vtk` (used by tests and tools)."""
    lines = Path(path).read_text().splitlines()
    n = int(next(l for l in lines if l.startswith("POINT_DATA")).split()[1])
    out = {}
    k = 0
    while k < len(lines):
        if lines[k].startswith("SCALARS"):
            name = lines[k].split()[1]
            out[name] = np.array([float(v) for v in lines[k + 2:k + 2 + n]])
            k += 2 + n
        else:
            k += 1
    return out


def write_json(path, data: dict) -> None:
    atomic_write(path, json.dumps(data, indent=2, sort_keys=True, default=_default) + "\n")


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (Path, tuple)):
        return str(o) if isinstance(o, Path) else list(o)
    raise TypeError(type(o))

"""Permeability rasters, coefficient presets and initial-condition presets."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..assembly import CoefficientField
from ..grid import StructuredGrid2D

MAGIC = "EMSK"


class RasterLoadError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def read_raster(path) -> np.ndarray:
    """Raster values as an ``(ny, nx)`` array, row 0 at the lowest ``y``."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise RasterLoadError(path, 1, "empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != MAGIC or head[1] != "1":
        raise RasterLoadError(path, 1, f"expected header '{MAGIC} 1 <nx> <ny>'")
    try:
        nx, ny = int(head[2]), int(head[3])
    except ValueError:
        raise RasterLoadError(path, 1, "raster dimensions must be integers") from None
    if nx <= 0 or ny <= 0:
        raise RasterLoadError(path, 1, "raster dimensions must be positive")
    rows = []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        try:
            row = [float(v) for v in text.split()]
        except ValueError:
            raise RasterLoadError(path, lineno, "non-numeric value") from None
        if len(row) != nx:
            raise RasterLoadError(path, lineno, f"expected {nx} values, found {len(row)}")
        if not all(np.isfinite(row)) or min(row) <= 0:
            raise RasterLoadError(path, lineno, "values must be finite and positive")
        rows.append(row)
    if len(rows) != ny:
        raise RasterLoadError(path, len(lines) + 1, f"expected {ny} rows, found {len(rows)}")
    return np.array(rows)


def write_raster(path, values) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    ny, nx = values.shape
    with open(path, "w") as fh:
        fh.write(f"{MAGIC} 1 {nx} {ny}\n")
        for row in values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def raster_to_field(values: np.ndarray, grid: StructuredGrid2D, path="<raster>") -> CoefficientField:
    """Replicate raster cells onto the fine elements (each cell covers an integer block)."""
    ny, nx = values.shape
    if grid.nx % nx or grid.ny % ny:
        raise RasterLoadError(path, 1, f"raster {nx}x{ny} does not divide the {grid.nx}x{grid.ny} element grid")
    fx, fy = grid.nx // nx, grid.ny // ny
    full = np.repeat(np.repeat(values, fy, axis=0), fx, axis=1)
    # elements are numbered row by row, lowest y first
    return CoefficientField(full.ravel())


def load_permeability(path, grid: StructuredGrid2D) -> CoefficientField:
    return raster_to_field(read_raster(path), grid, path)


def random_inclusions(n: int, contrast: float = 1e4, fraction: float = 0.2, seed: int = 0) -> np.ndarray:
    """``n x n`` raster of value 1 with a random ``fraction`` of cells at ``contrast``."""
    rng = np.random.default_rng(seed)
    out = np.ones((n, n))
    out[rng.random((n, n)) < fraction] = contrast
    return out


def channels(n: int, contrast: float = 1e4, width: int = 1, spacing: int = 4, seed: int = 0) -> np.ndarray:
    """Horizontal high-permeability channels interrupted by random gaps, plus scattered inclusions."""
    rng = np.random.default_rng(seed)
    out = np.ones((n, n))
    for j in range(spacing // 2, n, spacing):
        out[j:j + width, :] = contrast
        gap = rng.integers(0, n)
        out[j:j + width, gap:gap + max(1, n // 8)] = 1.0
    incl = rng.random((n, n)) < 0.05
    out[incl] = contrast
    return out


def make_kappa(kind: str, params: dict, grid: StructuredGrid2D, seed: int = 0, resolve=lambda p: Path(p)):
    params = dict(params)
    if kind == "constant":
        return CoefficientField.constant(grid, float(params.get("value", 1.0)))
    if kind == "raster":
        return load_permeability(resolve(params["path"]), grid)
    if kind in ("random", "channel"):
        cells = int(params.pop("cells", min(grid.nx, 32)))
        s = int(params.pop("seed", seed))
        gen = random_inclusions if kind == "random" else channels
        raw = gen(cells, seed=s, **{k: (int(v) if k in ("width", "spacing") else float(v)) for k, v in params.items()})
        return raster_to_field(raw, grid)
    raise ValueError(f"unknown permeability source {kind!r}")


def _example1(x, y, **_):
    return np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)


def _example2(x, y, amplitude=0.1, **_):
    return amplitude * np.sin(np.pi * x) * np.sin(np.pi * y)


def _example4_u1(x, y, L=30.0, **_):
    return 1.0 - np.exp(-2 * ((x - L / 2.15) ** 2 + (y - L / 2.15) ** 2))


def _example4_u2(x, y, L=30.0, a=0.1, b=0.9, **_):
    return b / (a + b) ** 2 - np.exp(-2 * ((x - L / 2) ** 2 + (y - L / 2) ** 2))


def _example5_u1(x, y, **_):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _example5_u2(x, y, **_):
    return 0.5 * np.sin(2 * np.pi * x) * np.sin(np.pi * y)


def _constant(x, y, value=0.0, **_):
    return np.full(np.shape(x), float(value))


def _zero(x, y, **_):
    return np.zeros(np.shape(x))


def _sine(x, y, amplitude=1.0, kx=1.0, ky=1.0, x0=0.0, y0=0.0, lx=1.0, ly=1.0, **_):
    return amplitude * np.sin(kx * np.pi * (x - x0) / lx) * np.sin(ky * np.pi * (y - y0) / ly)


INITIAL_PRESETS = {
    "example1": _example1,
    "example2": _example2,
    "example3_2d": _example2,
    "example4_u1": _example4_u1,
    "example4_u2": _example4_u2,
    "example5_u1": _example5_u1,
    "example5_u2": _example5_u2,
    "constant": _constant,
    "sine": _sine,
    "zero": _zero,
}


def initial_condition(name: str, x, y, **params) -> np.ndarray:
    if name not in INITIAL_PRESETS:
        raise ValueError(f"unknown initial condition {name!r}")
    return INITIAL_PRESETS[name](np.asarray(x, float), np.asarray(y, float), **params)

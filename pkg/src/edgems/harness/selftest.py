"""Fast property checks runnable without the test suite."""
from __future__ import annotations

import numpy as np
import scipy.linalg as la

from ..assembly import CoefficientField, FineOperators, VelocityField
from ..edgebasis import build_edge_space
from ..grid import build_decomposition, build_grid
from ..integrate import phi1_dense
from ..integrate.exponential import LinearPart, SpeciesSystem, run_exponential
from ..pou import assemble_pou
from .fields import random_inclusions, raster_to_field


def _phi1_oracle(X):
    n = X.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = X
    aug[:n, n:] = np.eye(n)
    return la.expm(aug)[:n, n:]


def check_phi1(rng):
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 21))
        X = rng.standard_normal((n, n))
        X *= 5.0 / max(np.abs(np.linalg.eigvals(X)).max(), 1e-12)
        ref = _phi1_oracle(X)
        worst = max(worst, np.linalg.norm(phi1_dense(X) - ref) / np.linalg.norm(ref))
    return worst <= 1e-10, f"max relative error {worst:.2e}"


def check_affine_exactness(rng):
    lam, r, u0, dt = 3.0, 2.0, 1.5, 0.01
    lin = LinearPart(np.eye(1), lam * np.eye(1), np.zeros((1, 1)), lambda t: 0.0)
    sy = SpeciesSystem(lin, np.eye(1), np.eye(1))

    class Const:
        n_species = 1

        def __call__(self, x, y, t, u):
            return (np.full_like(u, r),)

    tr = run_exponential([sy], Const(), [np.array([u0])], dt, 100 * dt, (np.zeros(1), np.zeros(1)))
    exact = (u0 - r / lam) * np.exp(-lam * 1.0) + r / lam
    err = abs(tr.final.coeffs[0][0] - exact)
    return err <= 1e-12, f"error after 100 steps {err:.2e}"


def check_partition_of_unity(rng):
    fine = build_grid((0, 1, 0, 1), 32, 32)
    kappa = raster_to_field(random_inclusions(16, 1e4, seed=int(rng.integers(1 << 30))), fine)
    decomp = build_decomposition(build_grid((0, 1, 0, 1), 4, 4), 8)
    pou = assemble_pou(decomp, kappa)
    dev = float(np.abs(np.asarray(pou.chi.sum(axis=1)).ravel() - 1).max())
    return dev <= 1e-10, f"max |sum chi - 1| = {dev:.2e}"


def check_edge_dimensions(rng):
    decomp = build_decomposition(build_grid((0, 1, 0, 1), 4, 4), 8)
    i = int(decomp.coarse.node_id(2, 2))
    dims = [build_edge_space(decomp, i, lvl).dim for lvl in range(4)]
    return dims == [4, 8, 16, 32], f"interior dimensions {dims}"


def check_fine_operators(rng):
    fine = build_grid((0, 1, 0, 1), 8, 8)
    ops = FineOperators.build(fine, CoefficientField.constant(fine), VelocityField("rigid_rotation"))
    one = np.ones(fine.n_nodes)
    area = float(one @ (ops.mass @ one))
    rows = float(np.abs(ops.stiffness @ one).max())
    ok = abs(area - 1.0) < 1e-12 and rows < 1e-12
    return ok, f"mass total {area:.15f}, stiffness row sums {rows:.1e}"


CHECKS = {
    "phi1 oracle": check_phi1,
    "exponential Euler affine exactness": check_affine_exactness,
    "partition of unity": check_partition_of_unity,
    "edge space dimensions": check_edge_dimensions,
    "fine operator consistency": check_fine_operators,
}


def run_selftest(seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn(rng)
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out

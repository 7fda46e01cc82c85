"""Fine-grid backward Euler reference with Newton on the nodewise reaction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exponential import IntegrationError, n_steps
from .reaction import ReactionModel


@dataclass
class ReferenceResult:
    """Snapshots ``fields[k][s]`` (fine free nodes, lift included) at ``times[k]``."""

    times: list
    fields: list
    newton_iterations: list = field(default_factory=list)

    @property
    def final(self):
        return self.fields[-1]


def backward_euler_reference(mass, stiffness, convections: Sequence, gs: Sequence, reaction: ReactionModel | None,
                             u0: Sequence[np.ndarray], dt: float, T: float, coords, lifts: Sequence[float] | None = None,
                             stride: int | None = None, tol: float = 1e-10, max_iter: int = 25,
                             substeps: int = 1, save_steps=()) -> ReferenceResult:
    """Solve ``M (u^{n+1} - u^n) / dt + (A_s + g_s(t^{n+1}) C_s) u^{n+1} = M R(u^{n+1})``.

    ``mass`` is shared; ``stiffness``, ``convections`` and the modulations
    ``gs`` are per species (a single entry is broadcast).  A number in ``gs``
    is a constant modulation and lets the linear factorization be reused.
    Convergence is declared when the residual scaled by the lumped mass, or
    the Newton increment, drops below ``tol`` relative to ``max(1, |u|)``.
    ``substeps`` subdivides each ``dt`` (only the coarser instants are stored).
    States are stored every ``stride`` steps, at the step indices in
    ``save_steps`` and at the final time.
    """
    S = len(u0)
    stiff = list(stiffness) if isinstance(stiffness, (list, tuple)) else [stiffness] * S
    convs = list(convections) if isinstance(convections, (list, tuple)) else [convections] * S
    gs = list(gs) if isinstance(gs, (list, tuple)) else [gs] * S
    # plain numbers are constant modulations; callables are treated as time dependent
    const_g = all(not callable(g) for g in gs)
    gs = [g if callable(g) else (lambda t, v=float(g): v) for g in gs]
    lifts = [0.0] * S if lifts is None else list(lifts)
    if reaction is not None and reaction.n_species != S:
        raise ValueError(f"reaction expects {reaction.n_species} species, got {S}")
    M = sp.csr_matrix(mass)
    lumped = np.asarray(M.sum(axis=1)).ravel()
    n = M.shape[0]
    N = n_steps(dt, T)
    stride = N if stride is None else stride
    save_steps = set(int(k) for k in save_steps)
    h = dt / substeps
    linear_R = reaction is None or getattr(reaction, "linear_in_u", False)

    def lin_op(t):
        return [(M + h * (Ak + g(t) * Ck if g(t) != 0.0 else Ak)).tocsc() for Ak, Ck, g in zip(stiff, convs, gs)]

    cached_ops = lin_op(0.0) if const_g else None
    cached_lu = None
    u = [np.asarray(v, dtype=float).copy() for v in u0]
    times, fields, iters = [0.0], [[ui + b for ui, b in zip(u, lifts)]], []
    k = 0
    for step in range(N):
        for sub in range(substeps):
            k += 1
            t1 = k * h
            ops = cached_ops if const_g else lin_op(t1)
            rhs = [M @ ui for ui in u]
            new = [ui.copy() for ui in u]
            for it in range(max_iter + 1):
                full = [ui + b for ui, b in zip(new, lifts)]
                R = _reaction(reaction, coords, t1, full)
                F = np.concatenate([ops[s] @ new[s] - rhs[s] - h * (M @ R[s]) for s in range(S)])
                scale = max(1.0, max(np.abs(f).max() for f in full))
                res = np.abs(F / np.tile(lumped, S)).max()
                if res <= tol * scale:
                    break
                if it == max_iter:
                    raise IntegrationError(step + 1, f"Newton did not converge, residual {res:.3e}")
                if linear_R and cached_lu is not None:
                    lu = cached_lu
                else:
                    J = _jacobian(reaction, coords, t1, full, ops, M, h)
                    lu = spla.splu(J)
                    if linear_R and const_g:
                        cached_lu = lu
                delta = lu.solve(-F)
                for s in range(S):
                    new[s] = new[s] + delta[s * n:(s + 1) * n]
                if not all(np.all(np.isfinite(v)) for v in new):
                    raise IntegrationError(step + 1, "non-finite Newton iterate")
                # high contrast puts a rounding floor under the scaled residual
                if np.abs(delta).max() <= tol * scale:
                    break
            iters.append(it)
            u = new
        if (stride and (step + 1) % stride == 0) or step + 1 == N or step + 1 in save_steps:
            times.append((step + 1) * dt)
            fields.append([ui + b for ui, b in zip(u, lifts)])
    return ReferenceResult(times, fields, iters)


def _reaction(reaction, coords, t, full):
    if reaction is None:
        return [np.zeros_like(f) for f in full]
    return [np.asarray(r, dtype=float) * np.ones_like(full[0]) for r in reaction(coords[0], coords[1], t, *full)]


def _jacobian(reaction, coords, t, full, ops, M, h):
    S = len(full)
    if reaction is None:
        dR = [[None] * S for _ in range(S)]
    else:
        dR = reaction.jacobian(coords[0], coords[1], t, *full)
    blocks = [[None] * S for _ in range(S)]
    for s in range(S):
        for r in range(S):
            D = dR[s][r]
            term = None
            if D is not None:
                D = np.asarray(D, dtype=float) * np.ones_like(full[0])
                if np.any(D != 0.0):
                    term = -h * (M @ sp.diags(D))
            if s == r:
                blocks[s][r] = ops[s] + term if term is not None else ops[s]
            else:
                blocks[s][r] = term
    if S == 1:
        return sp.csc_matrix(blocks[0][0])
    n = M.shape[0]
    for s in range(S):
        for r in range(S):
            if blocks[s][r] is None:
                blocks[s][r] = sp.csr_matrix((n, n))
    return sp.bmat(blocks, format="csc")

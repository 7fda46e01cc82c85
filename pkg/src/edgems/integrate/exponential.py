"""Exponential Euler on the coarse multiscale system.

Per species the semi-discrete system is ``M c' + (A + g(t) C) c = B^T M R``
with ``B`` the basis operator.  One step reads

    c <- c + dt phi_1(-dt L) (M^{-1} B^T M r - L c),   L = M^{-1}(A + g C)

with ``r`` the reaction evaluated nodewise on the fine grid at the
prolongated state.  A constant Dirichlet value ``b`` is carried as a lift
``u = b + B c``; a constant is annihilated by both diffusion and
divergence-free convection, so the lift only enters through ``r``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ..msspace import MassSolver
from .phi import Phi1Action, phi1_dense
from .reaction import ReactionModel

log = logging.getLogger(__name__)

PADE_LIMIT = 1200


class IntegrationError(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class ConfigurationError(RuntimeError):
    pass


@dataclass
class LinearPart:
    """Coarse mass, diffusion and convection of one species, with ``g(t)``."""

    mass: object
    stiffness: object
    convection: object
    g: Callable[[float], float] = lambda t: 1.0
    time_dependent: bool = False
    _cho: MassSolver | None = field(default=None, repr=False)

    @classmethod
    def from_space(cls, space, velocity=None) -> "LinearPart":
        if velocity is None or velocity.is_zero:
            return cls(space.mass, space.stiffness, space.convection, lambda t: 0.0, False)
        return cls(space.mass, space.stiffness, space.convection, velocity.g, velocity.time_dependent)

    @property
    def dim(self) -> int:
        return self.mass.shape[0]

    def operator(self, g: float):
        return self.stiffness + g * self.convection if g != 0.0 else self.stiffness

    def solve_mass(self, b):
        if self._cho is None:
            try:
                self._cho = MassSolver(self.mass)
            except (la.LinAlgError, RuntimeError) as exc:
                raise ConfigurationError("coarse mass matrix is singular; "
                                         "increase the pruning tolerance") from exc
        return self._cho.solve(b)

    def generator(self, g: float) -> np.ndarray:
        """Dense ``L = M^{-1}(A + g C)``."""
        K = self.operator(g)
        K = K.toarray() if sp.issparse(K) else np.asarray(K)
        return self.solve_mass(K)


def build_propagator(linear: LinearPart, dt: float, g: float) -> np.ndarray:
    """Dense ``dt * phi_1(-dt L)``."""
    return dt * phi1_dense(-dt * linear.generator(g))


class Propagator:
    """Applies ``dt phi_1(-dt L(g))`` to ``M^{-1} w`` given ``w``.

    ``backend`` is ``"pade"`` (dense matrix), ``"contour"`` (rational
    quadrature, one sparse factorization per node) or ``"auto"``.
    Results are cached per distinct ``g``.
    """

    def __init__(self, linear: LinearPart, dt: float, backend: str = "auto", contour_nodes: int = 16,
                 cache_size: int = 2):
        if backend == "auto":
            backend = "pade" if linear.dim <= PADE_LIMIT else "contour"
        if backend not in ("pade", "contour"):
            raise ValueError(f"unknown propagator backend {backend!r}")
        self.linear = linear
        self.dt = dt
        self.backend = backend
        self.contour_nodes = contour_nodes
        self.cache_size = cache_size
        self._cache: dict[float, object] = {}
        self.builds = 0

    def get(self, g: float):
        key = float(g)
        if key not in self._cache:
            if len(self._cache) >= self.cache_size:
                self._cache.pop(next(iter(self._cache)))
            if self.backend == "pade":
                self._cache[key] = build_propagator(self.linear, self.dt, key)
            else:
                M = sp.csc_matrix(self.linear.mass)
                K = sp.csc_matrix(self.linear.operator(key))
                self._cache[key] = Phi1Action(M, K, self.dt, nodes=self.contour_nodes)
            self.builds += 1
        return self._cache[key]

    def apply(self, g: float, w: np.ndarray) -> np.ndarray:
        P = self.get(g)
        if self.backend == "pade":
            return P @ self.linear.solve_mass(w)
        return self.dt * P.apply_to_load(w)


@dataclass
class StepperState:
    t: float
    n: int
    coeffs: tuple

    def copy(self) -> "StepperState":
        return StepperState(self.t, self.n, tuple(np.array(c, copy=True) for c in self.coeffs))


@dataclass
class SpeciesSystem:
    """Everything the stepper needs for one species."""

    linear: LinearPart
    basis: sp.spmatrix
    fine_mass: sp.spmatrix
    lift: float = 0.0

    @classmethod
    def from_space(cls, space, velocity=None, lift: float = 0.0) -> "SpeciesSystem":
        return cls(LinearPart.from_space(space, velocity), space.basis, space.fine_mass, lift)

    def field(self, c) -> np.ndarray:
        return self.lift + self.basis @ c


@dataclass
class Trajectory:
    states: list
    propagator_builds: int = 0

    def __len__(self):
        return len(self.states)

    @property
    def final(self) -> StepperState:
        return self.states[-1]


def exp_euler_step(state: StepperState, systems: Sequence[SpeciesSystem], reaction: ReactionModel | None,
                   dt: float, propagators: Sequence[Propagator], coords, mode: str = "refresh") -> StepperState:
    """Advance one step; the reaction couples species, the linear part does not."""
    fields = [s.field(c) for s, c in zip(systems, state.coeffs)]
    if reaction is None:
        rs = [np.zeros_like(f) for f in fields]
    else:
        rs = reaction(coords[0], coords[1], state.t, *fields)
    new = []
    for s, c, r, prop in zip(systems, state.coeffs, rs, propagators):
        g = s.linear.g(state.t)
        w = s.basis.T @ (s.fine_mass @ np.asarray(r, dtype=float)) - s.linear.operator(g) @ c
        if not np.all(np.isfinite(w)):
            raise IntegrationError(state.n + 1, "non-finite reaction or state (blow-up)")
        g_prop = g if mode == "refresh" else s.linear.g(0.0)
        c_new = c + prop.apply(g_prop, w)
        if not np.all(np.isfinite(c_new)):
            raise IntegrationError(state.n + 1, "non-finite coefficients (blow-up)")
        new.append(c_new)
    return StepperState(state.t + dt, state.n + 1, tuple(new))


def n_steps(dt: float, T: float) -> int:
    k = T / dt
    n = int(round(k))
    if abs(k - n) > 1e-9 * max(1.0, k):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def run_exponential(systems: Sequence[SpeciesSystem], reaction: ReactionModel | None, c0: Sequence[np.ndarray],
                    dt: float, T: float, coords, hooks: Sequence[Callable] = (), stride: int = 1,
                    mode: str = "refresh", backend: str = "auto", contour_nodes: int = 16) -> Trajectory:
    """Integrate to ``T`` and keep every ``stride``-th state (initial and final states always).

    ``coords`` are the fine free-node coordinates ``(x, y)`` used by the
    reaction; ``hooks`` are called as ``hook(state, systems)`` after every step.
    """
    if mode not in ("refresh", "frozen"):
        raise ValueError(f"unknown propagator mode {mode!r}")
    if len(systems) != len(c0):
        raise ValueError("one initial coefficient vector per species is required")
    if reaction is not None and reaction.n_species != len(systems):
        raise ValueError(f"reaction expects {reaction.n_species} species, got {len(systems)}")
    N = n_steps(dt, T)
    props = []
    for s in systems:
        size = N + 1 if (mode == "refresh" and s.linear.time_dependent) else 1
        props.append(Propagator(s.linear, dt, backend, contour_nodes, cache_size=1 if size > 1 else 2))
    state = StepperState(0.0, 0, tuple(np.asarray(c, dtype=float) for c in c0))
    states = [state]
    for hook in hooks:
        hook(state, systems)
    for n in range(N):
        state = exp_euler_step(state, systems, reaction, dt, props, coords, mode)
        # keep t^n = n dt exactly
        state.t = (n + 1) * dt
        for hook in hooks:
            hook(state, systems)
        if (n + 1) % stride == 0 or n + 1 == N:
            states.append(state)
    return Trajectory(states, sum(p.builds for p in props))

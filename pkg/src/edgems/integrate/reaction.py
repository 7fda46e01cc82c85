"""Nodewise reaction terms for one or two species."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ReactionModel:
    """Base class; subclasses evaluate ``R_s(x, y, t, u_1, ..., u_S)`` nodewise."""

    n_species = 1
    name = "reaction"

    def __call__(self, x, y, t, *u):
        raise NotImplementedError

    def jacobian(self, x, y, t, *u):
        """Nested list ``J[s][r] = dR_s / du_r`` of nodal arrays."""
        raise NotImplementedError

    @property
    def linear_in_u(self) -> bool:
        return False


@dataclass
class AllenCahn(ReactionModel):
    eps: float = 0.1
    name = "allen_cahn"

    def __call__(self, x, y, t, u):
        return ((u - u**3) / self.eps**2,)

    def jacobian(self, x, y, t, u):
        return [[(1 - 3 * u**2) / self.eps**2]]


@dataclass
class Schnakenberg(ReactionModel):
    gamma: float = 3.0
    a: float = 0.1
    b: float = 0.9
    n_species = 2
    name = "schnakenberg"

    def __call__(self, x, y, t, u1, u2):
        q = u1**2 * u2
        return self.gamma * (self.a - u1 + q), self.gamma * (self.b - q)

    def jacobian(self, x, y, t, u1, u2):
        g = self.gamma
        return [[g * (-1 + 2 * u1 * u2), g * u1**2],
                [-g * 2 * u1 * u2, -g * u1**2]]

    @property
    def steady_state(self) -> tuple[float, float]:
        s = self.a + self.b
        return s, self.b / s**2


@dataclass
class SchnakenbergHetero(ReactionModel):
    """``R_1 = u_2 (1 - u_1)``, ``R_2 = u_1 (1 - u_2^2)``."""

    n_species = 2
    name = "schnakenberg_hetero"

    def __call__(self, x, y, t, u1, u2):
        return u2 * (1 - u1), u1 * (1 - u2**2)

    def jacobian(self, x, y, t, u1, u2):
        return [[-u2, 1 - u1], [1 - u2**2, -2 * u1 * u2]]


@dataclass
class CustomPolynomial(ReactionModel):
    """``R(u) = sum_k coeffs[k] u^k + source(x, y, t)``."""

    coeffs: tuple = (0.0,)
    source: Callable | None = field(default=None, repr=False)
    name = "custom_polynomial"

    def __call__(self, x, y, t, u):
        r = np.polynomial.polynomial.polyval(u, self.coeffs) * np.ones_like(u)
        if self.source is not None:
            r = r + self.source(x, y, t)
        return (r,)

    def jacobian(self, x, y, t, u):
        d = np.polynomial.polynomial.polyder(np.asarray(self.coeffs, dtype=float))
        return [[np.polynomial.polynomial.polyval(u, d) * np.ones_like(u)]]

    @property
    def linear_in_u(self) -> bool:
        return len(self.coeffs) <= 1 or all(c == 0 for c in self.coeffs[1:])


def make_reaction(name: str, **params) -> ReactionModel:
    table = {
        "allen_cahn": AllenCahn,
        "schnakenberg": Schnakenberg,
        "schnakenberg_hetero": SchnakenbergHetero,
        "custom_polynomial": CustomPolynomial,
    }
    if name not in table:
        raise ValueError(f"unknown reaction model {name!r}")
    if name == "custom_polynomial" and "coeffs" in params:
        params["coeffs"] = tuple(float(c) for c in np.atleast_1d(params["coeffs"]))
    return table[name](**params)

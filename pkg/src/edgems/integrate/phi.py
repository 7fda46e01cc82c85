"""The phi_1 matrix function, dense and as a rational action.

Dense evaluation uses the degree-13 diagonal Padé approximant of the
exponential of the augmented matrix ``[[X, I], [0, 0]]`` together with
scaling and squaring.  Because the augmented powers have the block form
``[[X^k, X^(k-1)], [0, 0]]``, the top-right block of the approximant reduces
to ``(V - U)^{-1} 2W`` with ``U = X W``, so nothing of size ``2m`` is formed.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_B13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
THETA_13 = 5.371920351148152


def phi1_scalar(z):
    """(e^z - 1)/z with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex if np.iscomplexobj(z) else float)
    small = np.abs(z) < 1e-5
    out = np.empty_like(z)
    zs = z[small]
    out[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24
    zl = z[~small]
    out[~small] = np.expm1(zl) / zl if not np.iscomplexobj(zl) else (np.exp(zl) - 1) / zl
    return out if out.ndim else out[()]


def _pade13_pair(X):
    b = _B13
    n = X.shape[0]
    I = np.eye(n)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    W = X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2) + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * I
    V = X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2) + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * I
    U = X @ W
    lu = la.lu_factor(V - U)
    E = la.lu_solve(lu, V + U)
    P = la.lu_solve(lu, 2.0 * W)
    return E, P


def phi1_dense(X, return_expm: bool = False):
    """phi_1(X) = X^{-1}(e^X - I) for a dense square matrix, without inverting X."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("phi1_dense needs a square matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite entries in phi1 argument")
    norm = np.linalg.norm(X, 1)
    s = max(0, int(np.ceil(np.log2(norm / THETA_13)))) if norm > THETA_13 else 0
    E, P = _pade13_pair(X / 2.0**s)
    I = np.eye(X.shape[0])
    for _ in range(s):
        # phi1(2Y) = phi1(Y) (e^Y + I) / 2 and e^{2Y} = (e^Y)^2
        P = 0.5 * (P @ (E + I))
        E = E @ E
    if return_expm:
        return P, E
    return P


def talbot_nodes(n: int):
    """Quadrature nodes ``z_k`` and weights ``w_k`` of the optimized cotangent Talbot contour.

    Only the upper half of the contour is returned; for real ``X`` and ``v``
    ``e^X v ~= 2 Re sum_k w_k (z_k - X)^{-1} v``.
    """
    theta = -np.pi + (np.arange(n) + 0.5) * 2 * np.pi / n
    theta = theta[theta > 0]
    a, b, c, d = 0.5017, 0.6407, 0.6122, 0.2645
    z = n * (a * theta / np.tan(b * theta) - c + 1j * d * theta)
    dz = n * (a / np.tan(b * theta) - a * b * theta / np.sin(b * theta) ** 2 + 1j * d)
    w = np.exp(z) * dz / (1j * n)
    return z, w


class Phi1Action:
    """``v -> phi_1(-tau M^{-1} K) v`` by contour quadrature.

    ``phi_1(X) v`` is the top block of ``exp([[X, v], [0, 0]]) e_last``,
    whose resolvent at ``z`` is ``(z - X)^{-1} v / z``.  Each node needs the
    complex pencil ``z M + tau K`` factorized once.
    """

    def __init__(self, M, K, tau: float, nodes: int = 16):
        self.M = sp.csc_matrix(M)
        Kc = sp.csc_matrix(K)
        z, w = talbot_nodes(nodes)
        self.weights = w / z
        self._lus = [spla.splu(sp.csc_matrix(zk * self.M + tau * Kc)) for zk in z]

    def __call__(self, v):
        return self.apply_to_load(self.M @ np.asarray(v, dtype=float))

    def apply_to_load(self, b):
        """``phi_1(-tau M^{-1} K) M^{-1} b`` without a separate mass solve."""
        b = np.asarray(b, dtype=float).astype(complex)
        acc = np.zeros(b.shape, dtype=complex)
        for wk, lu in zip(self.weights, self._lus):
            acc += wk * lu.solve(b)
        return 2.0 * acc.real

"""Independent reference implementations used only by the tests."""
import numpy as np
import scipy.linalg as la

from edgems.edgebasis import l2_project_edge


def phi1_taylor_ld(X, terms=40):
    """phi_1(X) by Taylor series with scaling and squaring in extended precision."""
    X = np.asarray(X, dtype=np.longdouble)
    n = X.shape[0]
    I = np.eye(n, dtype=np.longdouble)
    norm = float(np.abs(X.astype(float)).sum(axis=0).max())
    s = max(0, int(np.ceil(np.log2(max(norm, 1e-300) / 0.25))))
    Y = X / np.longdouble(2.0) ** s
    term = I.copy()
    P = I.copy()  # phi_1 partial sum: sum Y^k / (k+1)!
    E = I.copy()  # exp partial sum
    for k in range(1, terms):
        term = term @ Y / np.longdouble(k)
        E = E + term
        P = P + term / np.longdouble(k + 1)
    for _ in range(s):
        P = P @ (E + I) / np.longdouble(2.0)
        E = E @ E
    return P.astype(float)


def phi1_eig(X):
    """phi_1(X) through an eigendecomposition (diagonalizable X only)."""
    lam, V = np.linalg.eig(X)
    f = np.where(np.abs(lam) < 1e-8, 1 + lam / 2, (np.exp(lam) - 1) / np.where(lam == 0, 1, lam))
    return (V * f) @ np.linalg.inv(V)


def phi1_augmented(X):
    n = X.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = X
    aug[:n, n:] = np.eye(n)
    return la.expm(aug)[:n, n:]


def random_matrix(rng, n, radius):
    X = rng.standard_normal((n, n))
    rho = np.abs(np.linalg.eigvals(X)).max()
    return X * (radius / rho)


def arclength(decomp, space):
    """Arclength of each trace node along the neighbourhood boundary, and the perimeter."""
    nb = decomp.neighborhoods[space.node]
    s_of = {}
    offset = 0.0
    for seg in nb.segments:
        s = seg.s if seg.name in ("bottom", "right") else 1 - seg.s
        for n, v in zip(seg.nodes.tolist(), (offset + s * seg.length).tolist()):
            s_of.setdefault(n, v)
        offset += seg.length
    return np.array([s_of[n] for n in space.trace_nodes.tolist()]), offset


def edge_projection_error(space, trace):
    r = trace - space.reconstruct(l2_project_edge(space, trace))
    return np.sqrt(space.inner(r, r))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

import numpy as np
import pytest
import scipy.sparse as sp

from edgems.assembly import (CoefficientField, VelocityField, assemble_convection, assemble_mass,
                             assemble_stiffness)
from edgems.grid import build_grid
from edgems.integrate import IntegrationError, backward_euler_reference
from edgems.integrate.reaction import AllenCahn, CustomPolynomial, Schnakenberg


def _ops(n=12, velocity=VelocityField("zero"), bounds=(0, 1, 0, 1)):
    g = build_grid(bounds, n, n)
    f = g.free_nodes
    M = assemble_mass(g)[f][:, f].tocsr()
    A = assemble_stiffness(g, CoefficientField.constant(g))[f][:, f].tocsr()
    C = assemble_convection(g, velocity)[f][:, f].tocsr()
    return g, M, A, C, tuple(g.node_coords[f].T)


def test_pure_diffusion_decays_monotonically():
    g, M, A, C, (x, y) = _ops(velocity=VelocityField("rigid_rotation"))
    u0 = np.sin(np.pi * x) * np.sin(np.pi * y) + 0.3 * np.sin(3 * np.pi * x) * np.sin(2 * np.pi * y)
    res = backward_euler_reference(M, A, C, [1.0], None, [u0], 0.01, 0.2, (x, y), stride=1)
    norms = [np.sqrt(u[0] @ (M @ u[0])) for u in res.fields]
    assert len(norms) == 21
    assert np.all(np.diff(norms) < 0)


def test_linear_single_step_matches_direct_solve():
    g, M, A, C, (x, y) = _ops()
    u0 = x * (1 - x) * y
    dt = 0.05
    res = backward_euler_reference(M, A, C, [0.0], None, [u0], dt, dt, (x, y))
    import scipy.sparse.linalg as spla
    direct = spla.spsolve((M + dt * A).tocsc(), M @ u0)
    assert np.abs(res.final[0] - direct).max() <= 1e-12


def test_constant_lift_is_carried():
    g, M, A, C, (x, y) = _ops()
    r = Schnakenberg()
    a, b = r.steady_state
    res = backward_euler_reference(M, [A, A], [C, C], [0.0, 0.0], r, [np.zeros_like(x)] * 2, 0.1, 1.0, (x, y),
                                   lifts=[a, b])
    assert np.abs(res.final[0] - a).max() <= 1e-12 and np.abs(res.final[1] - b).max() <= 1e-12


def test_save_steps_and_stride():
    g, M, A, C, (x, y) = _ops(6)
    u0 = np.ones_like(x)
    res = backward_euler_reference(M, A, C, [0.0], None, [u0], 0.1, 1.0, (x, y), stride=4, save_steps=[3])
    assert res.times == pytest.approx([0.0, 0.3, 0.4, 0.8, 1.0])


def test_substeps_match_smaller_step():
    g, M, A, C, (x, y) = _ops(8)
    u0 = 0.5 * np.sin(np.pi * x) * np.sin(np.pi * y)
    a = backward_euler_reference(M, A, C, [0.0], AllenCahn(0.3), [u0], 0.1, 0.4, (x, y), substeps=4)
    b = backward_euler_reference(M, A, C, [0.0], AllenCahn(0.3), [u0], 0.025, 0.4, (x, y))
    assert a.times == pytest.approx([0.0, 0.4])
    assert np.abs(a.final[0] - b.final[0]).max() <= 1e-12


def test_newton_converges_quadratically_for_allen_cahn():
    g, M, A, C, (x, y) = _ops(16, VelocityField("exp_rot", modulation="exp_decay"), (-1, 1, -1, 1))
    vel = VelocityField("exp_rot", modulation="exp_decay")
    u0 = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    res = backward_euler_reference(M, A, C, [vel.g], AllenCahn(0.1), [u0], 2**-8, 2**-5, (x, y))
    assert max(res.newton_iterations) <= 6


def test_newton_failure_reports_step():
    g, M, A, C, (x, y) = _ops(6)
    with pytest.raises(IntegrationError) as err:
        backward_euler_reference(M, A, C, [0.0], AllenCahn(0.1), [np.full_like(x, 0.5)], 0.1, 0.3, (x, y),
                                 max_iter=1)
    assert err.value.step == 1


def test_species_count_checked():
    g, M, A, C, (x, y) = _ops(4)
    with pytest.raises(ValueError):
        backward_euler_reference(M, A, C, [0.0], Schnakenberg(), [x], 0.1, 0.1, (x, y))


def test_custom_polynomial_source_is_time_dependent():
    g, M, A, C, (x, y) = _ops(4)
    src = CustomPolynomial(coeffs=(0.0,), source=lambda x, y, t: np.full_like(x, t))
    res = backward_euler_reference(sp.identity(x.size, format="csr"), A * 0, C, [0.0], src, [np.zeros_like(x)],
                                   0.5, 1.0, (x, y))
    # u' = t with implicit evaluation: 0.5 * (0.5 + 1.0)
    assert np.allclose(res.final[0], 0.75, atol=1e-12)

import numpy as np
import pytest

from edgems.assembly import CoefficientField, FineOperators, VelocityField
from edgems.grid import build_decomposition, build_grid
from edgems.harness.fields import random_inclusions, raster_to_field
from edgems.pou import assemble_pou

UNIT = (0.0, 1.0, 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def decomp_4x4():
    """4 x 4 coarse cells refined by 4 on the unit square."""
    return build_decomposition(build_grid(UNIT, 4, 4), 4)


@pytest.fixture(scope="session")
def high_contrast_setup():
    """Coarse 4 x 4, fine 32 x 32, random inclusions of contrast 1e4."""
    decomp = build_decomposition(build_grid(UNIT, 4, 4), 8)
    kappa = raster_to_field(random_inclusions(16, 1e4, seed=7), decomp.fine)
    ops = FineOperators.build(decomp.fine, kappa, VelocityField("zero"))
    pou = assemble_pou(decomp, kappa, ops.stiffness)
    return decomp, kappa, ops, pou


@pytest.fixture(scope="session")
def unit_kappa_setup():
    decomp = build_decomposition(build_grid(UNIT, 4, 4), 8)
    kappa = CoefficientField.constant(decomp.fine)
    ops = FineOperators.build(decomp.fine, kappa, VelocityField("zero"))
    pou = assemble_pou(decomp, kappa, ops.stiffness)
    return decomp, kappa, ops, pou


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from pairsafe.dynamics import DynamicsKind
from pairsafe.grid import FieldKind, GridSpec, ValueField


def distance_field(kind=FieldKind.COOPERATIVE, n=41, half=4.0):
    """Single-integrator field sampling plain distance (the exact equal-authority value)."""
    spec = GridSpec.from_lists((n, n), (-half, -half), (half, half))
    dist = np.array(spec.node_dist())
    return ValueField(spec, dist, kind, DynamicsKind.SINGLE_INTEGRATOR, {"converged": True})


@pytest.fixture
def si_coop():
    return distance_field(FieldKind.COOPERATIVE)


@pytest.fixture
def si_worst():
    return distance_field(FieldKind.WORST_CASE)


@pytest.fixture(scope="session")
def di_fields():
    """Default double-integrator fields from the solve cache (solved on first use)."""
    from pairsafe import cache

    coop, _, _ = cache.get_field(DynamicsKind.DOUBLE_INTEGRATOR, "coop")
    worst, _, _ = cache.get_field(DynamicsKind.DOUBLE_INTEGRATOR, "worst")
    return coop, worst


@pytest.fixture(scope="session")
def di_worst_converged():
    """Double-integrator worst-case value marched to convergence (no look-ahead cap)."""
    from pairsafe import cache
    from pairsafe.hj_solver import SolveSettings

    field, _, _ = cache.get_field(DynamicsKind.DOUBLE_INTEGRATOR, "worst", settings=SolveSettings())
    return field


@pytest.fixture(scope="session")
def at_fields():
    """Default air-taxi fields from the solve cache.  Cold solves take tens of minutes."""
    from pairsafe import cache

    coop, _, _ = cache.get_field(DynamicsKind.AIR_TAXI, "coop")
    worst, _, _ = cache.get_field(DynamicsKind.AIR_TAXI, "worst")
    ttr, _, _ = cache.get_field(DynamicsKind.AIR_TAXI, "ttr")
    return coop, worst, ttr


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

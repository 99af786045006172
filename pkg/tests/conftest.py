from __future__ import annotations

import pytest
from hypothesis import settings

from fsplab import constitutive, degiorgi, profiles, solver

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

EPS = (1e-2, 1e-3, 1e-4)
GRIDS = (128, 256, 512)
BUMP = solver.Bump(0.7, 0.1, 0.5)
R, RPRIME, TOL = 0.5, 0.25, 1e-6


@pytest.fixture(scope="session")
def p1():
    return constitutive.build_bundle(profiles.power(1.0), 1.0)


@pytest.fixture(scope="session")
def bump_config():
    return solver.SolverConfig(epsilon=EPS[0], T=0.1, dt=5e-3, g=BUMP, inner_radius=R)


@pytest.fixture(scope="session")
def bump_sweeps(p1, bump_config):
    """Finite-speed scenario: one epsilon sweep per grid."""
    return {m: solver.epsilon_sweep(p1, solver.Geometry.radial(3, 1.0, m), bump_config, list(EPS))
            for m in GRIDS}


@pytest.fixture(scope="session")
def bump_run(bump_sweeps):
    """Smallest epsilon on the base grid."""
    return bump_sweeps[GRIDS[0]].trajectories[-1]


@pytest.fixture(scope="session")
def dg_params(p1):
    return degiorgi.params_for(p1, 3, R, RPRIME)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

"""Shared fixtures: fitted transports reused across test modules.

Everything here is deterministic (fixed seeds, deterministic reference
grids), so session scope is safe and saves repeated solver runs.  The
two fixtures at the bottom are expensive (minutes) and are requested
only by the acceptance tests.
"""

import sys
import time

import pytest

from mkdepth.depth import fit_transport
from mkdepth.measures import make_family
from mkdepth.metrics import reference_for_size, run_convergence


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance criterion verdicts after the run.

    The acceptance tests print one PASS/FAIL line each, but default
    output capture hides stdout of passing tests; repeating the lines
    here keeps the verdicts visible in a plain ``pytest -v`` run.
    """
    module = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance"
    )
    lines = getattr(module, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def banana999():
    """Assignment fit of the banana cloud, n = 999, seed 17."""
    family = make_family("banana", dim=2)
    data = family.sample(999, seed=17)
    reference = reference_for_size(999, dim=2)
    return fit_transport(data, reference, mode="assignment")


@pytest.fixture(scope="session")
def disk1200():
    """Assignment fit of the uniform unit disk, n = 1200, seed 5."""
    family = make_family("uniform-ball", dim=2)
    data = family.sample(1200, seed=5)
    reference = reference_for_size(1200, dim=2)
    return fit_transport(data, reference, mode="assignment")


@pytest.fixture(scope="session")
def banana9999():
    """Assignment fit of the banana cloud at n = 9999 (several minutes)."""
    family = make_family("banana", dim=2)
    data = family.sample(9999, seed=17)
    reference = reference_for_size(9999, dim=2)
    return fit_transport(data, reference, mode="assignment")


@pytest.fixture(scope="session")
def disk_convergence():
    """Uniform-disk convergence runs: 10 seeds at n in {500, 4000, 8000}.

    Returns (runs, seconds) keyed by n; the per-size wall time feeds the
    runtime budget check.  Takes roughly twenty minutes in total.
    """
    family = make_family("uniform-ball", dim=2)
    runs, seconds = {}, {}
    for n in (500, 4000, 8000):
        t0 = time.perf_counter()
        runs[n] = run_convergence(
            family, [n], range(10), band=(0.2, 0.8), taus=(0.5,)
        )
        seconds[n] = time.perf_counter() - t0
    return runs, seconds

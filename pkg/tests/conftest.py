from __future__ import annotations

import numpy as np
import pytest

import wiregeom as wg
from wiregeom.bloch import HamiltonianFamily
from wiregeom.singularity import analyze

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture(scope="session")
def acceptance(request):
    """Criterion number -> (passed, detail); printed in the terminal summary."""
    return request.config.stash[_ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def gyroid():
    return HamiltonianFamily.of(wg.builtin("G"))


@pytest.fixture(scope="session")
def gyroid_report(gyroid):
    return analyze(gyroid, 32)


@pytest.fixture(scope="session")
def honeycomb():
    return HamiltonianFamily.of(wg.builtin("honeycomb"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

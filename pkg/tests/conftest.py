import math

import numpy as np
import pytest

from igarom import pipeline
from igarom.splines import KnotVector, NurbsSurface

ACCEPTANCE_RESULTS = []


def cox_de_boor(knots, i, p, x):
    """Literal recursive definition, used as an oracle for the table algorithm.

    Half-open spans, except that the last non-empty span is closed on the right.
    """
    knots = list(knots)
    if p == 0:
        lo, hi = knots[i], knots[i + 1]
        if lo <= x < hi:
            return 1.0
        last = max(k for k in range(len(knots) - 1) if knots[k] < knots[k + 1])
        return 1.0 if (i == last and x == hi) else 0.0
    out = 0.0
    d1 = knots[i + p] - knots[i]
    d2 = knots[i + p + 1] - knots[i + 1]
    if d1 != 0:
        out += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x)
    if d2 != 0:
        out += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x)
    return out


def random_open_knots(rng, p=None):
    p = int(rng.integers(0, 5)) if p is None else p
    n_interior = int(rng.integers(0, 7))
    interior = np.sort(rng.uniform(0.0, 1.0, n_interior))
    if n_interior and rng.random() < 0.3:
        # repeated interior knot, multiplicity <= p
        k = int(rng.integers(0, n_interior))
        interior = np.sort(np.concatenate([interior, np.repeat(interior[k], max(p - 1, 0))]))
    lo, hi = sorted(rng.uniform(-2, 2, 2))
    hi += 0.5
    interior = lo + (hi - lo) * interior
    return KnotVector(np.concatenate([[lo] * (p + 1), interior, [hi] * (p + 1)]), p)


@pytest.fixture
def pipe():
    return pipeline.reference_pipe_geometry()


@pytest.fixture
def unit_square():
    kv = KnotVector([0, 0, 1, 1], 1)
    net = np.array([[[0, 0], [0, 1]], [[1, 0], [1, 1]]], float)
    return NurbsSurface.from_net(kv, kv, net)


@pytest.fixture
def arc_weights():
    return np.array([1.0, math.sqrt(2) / 2, 1.0])


@pytest.fixture(scope="session")
def default_db():
    return pipeline.offline(pipeline.PipelineConfig())


@pytest.fixture(scope="session")
def small_config():
    return pipeline.PipelineConfig(grid=(3, 3), dofs=(8, 8))


@pytest.fixture(scope="session")
def small_db(small_config):
    return pipeline.offline(small_config)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    if call.when == "call":
        item.rep_call = outcome.get_result()

import os

import numpy as np
import pytest

from chernlab.barriers import build_glued_barrier
from chernlab.geometry import Grid, make_hyperbolic_model
from chernlab.hypotheses import HypothesisSet, find_r0
from chernlab.iteration import exhaustion_solve

SEED = int(os.environ.get("CCL_SEED", "20240611"))

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def hyperbolic_case():
    """Hyperbolic plane, s = S = -1, glued log barrier, exhaustion over 4..16."""
    model = make_hyperbolic_model(1, 16.0)
    grid = Grid(16.0, 2048)
    hyp = HypothesisSet.matched(4.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1)
    r0 = find_r0(hyp, 1.0, 1e4)
    barrier = build_glued_barrier(model, -1.0, grid, 1.0, r0)
    sol, compact = exhaustion_solve(model, -1.0, [4, 8, 12, 16], barrier, tol=1e-8)
    return {"model": model, "grid": grid, "hyp": hyp, "r0": r0, "barrier": barrier,
            "solution": sol, "compact": compact}


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str):
        line = f"acceptance {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])

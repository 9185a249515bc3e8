import numpy as np
import pytest

import genspr
import genspr.estimator
import genspr.spr
from genspr.kernels import KernelSpec
from genspr.operators import as_forward_operator
from genspr.problems import make_problem
from genspr.stopping import dp_check

# Every solver run in the suite goes through this wrapper, which asserts the
# monotonicity of the residual and solution norms and of the DP predicate.
_spr_solve = genspr.spr.spr_solve
SOLVER_RUNS = {"count": 0}


def check_monotone(history, m, tau=1.01):
    phi = np.asarray(history["phi_bar"], dtype=float)
    sol = np.asarray(history["sol_norm"], dtype=float)
    assert np.all(np.diff(phi) <= 0), "residual norm increased"
    assert np.all(np.diff(sol) >= 0), "solution norm decreased"
    flags = [dp_check(p, m, tau) for p in phi]
    if True in flags:
        assert all(flags[flags.index(True):]), "DP predicate not monotone"


def _checked_spr_solve(A, b, *args, **kwargs):
    res = _spr_solve(A, b, *args, **kwargs)
    check_monotone(res.history, as_forward_operator(A).m)
    SOLVER_RUNS["count"] += 1
    return res


genspr.spr.spr_solve = _checked_spr_solve
genspr.spr_solve = _checked_spr_solve
genspr.estimator.spr_solve = _checked_spr_solve


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def gravity50():
    return make_problem("gravity", 50, KernelSpec("gaussian", 0.1), level=5e-3, seed=0)


@pytest.fixture(scope="session")
def gravity100():
    return make_problem("gravity", 100, KernelSpec("gaussian", 0.1), level=5e-3, seed=0)


@pytest.fixture(scope="session")
def shaw100():
    return make_problem("shaw", 100, KernelSpec("exponential", 0.1, 1.0), noise="diagonal",
                        level=1e-2, seed=0)


# Acceptance summary: one line per criterion at the end of the run.
_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _ACCEPTANCE:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}  {detail}")

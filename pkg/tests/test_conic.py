import time

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, given, settings, strategies as st

from cfswipt.conic import Cone, ConicProgram, check_kkt, solve

from conic_cases import all_cases
from cvx_bridge import to_cvxpy

CASES = all_cases()
KKT_TOL = 1e-6


def _methods(case):
    return ("nt", "barrier") if case.family != "exp" else ("barrier",)


def test_registry_is_large_enough():
    assert len(CASES) >= 20
    assert {c.family for c in CASES} == {"lp", "soc", "exp"}


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_known_optimum(case):
    for method in _methods(case):
        t0 = time.perf_counter()
        sol = solve(case.prog, method=method)
        elapsed = time.perf_counter() - t0
        assert sol.status == "optimal", method
        assert max(check_kkt(case.prog, sol)) <= KKT_TOL, method
        assert sol.objective_value == pytest.approx(case.optimum, abs=1e-6, rel=1e-6), method
        assert elapsed <= 1.0, method


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_matches_clarabel(case):
    prob, x = to_cvxpy(case.prog)
    prob.solve(solver="CLARABEL")
    assert prob.status == "optimal"
    sol = solve(case.prog)
    assert sol.objective_value == pytest.approx(prob.value, abs=1e-6, rel=1e-6)


def test_auto_picks_nt_without_exp_cones():
    case = next(c for c in CASES if c.family == "soc")
    a, b = solve(case.prog), solve(case.prog, method="nt")
    assert a.iterations == b.iterations


def test_primal_infeasible():
    # x >= 1 and x <= 0
    prog = ConicProgram(c=[1.0], G=sp.csr_matrix([[-1.0], [1.0]]), h=[-1.0, 0.0], cones=[("nonneg", 2)])
    for method in ("nt", "barrier"):
        assert solve(prog, method=method).status == "primal_infeasible"


def test_dual_infeasible():
    # min -x with x >= 0 only
    prog = ConicProgram(c=[-1.0], G=sp.csr_matrix([[-1.0]]), h=[0.0], cones=[("nonneg", 1)])
    for method in ("nt", "barrier"):
        assert solve(prog, method=method).status == "dual_infeasible"


def test_bad_cone_dimensions():
    with pytest.raises(ValueError):
        Cone("exp", 4)
    with pytest.raises(ValueError):
        Cone("rsoc", 2)
    with pytest.raises(ValueError):
        ConicProgram(c=[1.0], G=sp.csr_matrix([[1.0], [1.0]]), h=[0.0, 0.0], cones=[("nonneg", 1)])


def test_non_finite_data_rejected():
    with pytest.raises(ValueError):
        ConicProgram(c=[np.nan], G=sp.csr_matrix([[1.0]]), h=[0.0], cones=[("nonneg", 1)])


@pytest.mark.parametrize("case", CASES[::4], ids=lambda c: c.name)
def test_dump_round_trip(case, tmp_path):
    path = tmp_path / "p.txt"
    case.prog.dump(path)
    back = ConicProgram.load(path)
    assert back.dump() == case.prog.dump()


def test_kkt_checker_flags_wrong_answer():
    case = CASES[0]
    sol = solve(case.prog)
    sol.x = sol.x + 0.1
    assert max(check_kkt(case.prog, sol)) > 1e-3


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**31 - 1))
def test_random_bounded_lp_against_vertices(seed):
    from conic_cases import _vertex_optimum

    rng = np.random.default_rng(seed)
    n = 2
    Gin = np.vstack([rng.normal(size=(4, n)), np.eye(n), -np.eye(n)])
    hin = np.concatenate([rng.uniform(0.1, 2.0, 4), 3 * np.ones(2 * n)])
    c = rng.normal(size=n)
    prog = ConicProgram(c=c, G=sp.csr_matrix(Gin), h=hin, cones=[("nonneg", len(hin))])
    sol = solve(prog)
    assert sol.ok
    assert sol.objective_value == pytest.approx(_vertex_optimum(c, Gin, hin), abs=1e-6)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**31 - 1), st.integers(2, 6))
def test_random_ball_projection(seed, n):
    # min |x - p| over the unit ball equals max(|p| - 1, 0)
    p = np.random.default_rng(seed).normal(size=n) * 2
    G = np.zeros((2 * (n + 1), n + 1))
    G[0, 0] = -1.0
    G[1:n + 1, 1:] = -np.eye(n)
    G[n + 2:, 1:] = -np.eye(n)
    h = np.concatenate([[0.0], -p, [1.0], np.zeros(n)])
    prog = ConicProgram(c=np.eye(n + 1)[0], G=sp.csr_matrix(G), h=h, cones=[("soc", n + 1), ("soc", n + 1)])
    sol = solve(prog)
    assert sol.usable
    assert sol.objective_value == pytest.approx(max(np.linalg.norm(p) - 1, 0.0), abs=1e-6)

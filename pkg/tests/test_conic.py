import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noma_gee import conic
from noma_gee.conic import ConicProgram, constant, get_backend, solve, vstack
from noma_gee.conic.program import cone_violation

BACKENDS = ["clarabel", "cvxopt"]


def socp_norm_case():
    prog = ConicProgram()
    t = prog.add_variable("t")
    prog.minimize(t)
    prog.add_soc(t, constant([3.0, 4.0]))
    return prog, t


def test_add_variable_dimensions():
    prog = ConicProgram()
    assert prog.add_variable("alpha").dim == 1
    assert prog.add_variable("w_1", 6).dim == 6
    assert prog.num_scalars == 7


def test_duplicate_variable_rejected():
    prog = ConicProgram()
    prog.add_variable("alpha")
    with pytest.raises(ValueError):
        prog.add_variable("alpha")


def test_soc_rejects_bad_shapes():
    prog = ConicProgram()
    x = prog.add_variable("x", 2)
    with pytest.raises(ValueError):
        prog.add_soc(x, x)
    with pytest.raises(ValueError):
        prog.add_soc(-1.0, x)


def test_psd_requires_square():
    prog = ConicProgram()
    x = prog.add_variable("x")
    with pytest.raises(ValueError):
        prog.add_psd([[x, x], [x]])


@pytest.mark.parametrize("backend", BACKENDS)
def test_soc_fixed_vector_norm(backend):
    prog, t = socp_norm_case()
    res = solve(prog, backend)
    assert res.optimal and res.scalar(t) == pytest.approx(5.0, abs=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_soc_with_bound(backend):
    prog = ConicProgram()
    t, x = prog.add_variable("t"), prog.add_variable("x")
    prog.minimize(t)
    prog.add_soc(t, vstack([x, constant([1.0])]))
    prog.add_ge(x, 2.0)
    res = solve(prog, backend)
    assert res.scalar(t) == pytest.approx(np.sqrt(5.0), abs=1e-7)
    # grid check of the one-dimensional reasoning
    grid = np.linspace(2, 5, 3001)
    assert np.sqrt(grid ** 2 + 1).min() == pytest.approx(res.scalar(t), abs=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_soc_forced_negative_rhs_infeasible(backend):
    prog = ConicProgram()
    t = prog.add_variable("t")
    prog.minimize(t)
    prog.add_soc(t, constant([1.0]))
    prog.add_le(t, -1.0)
    res = solve(prog, backend)
    assert res.status == "infeasible" and not res.variable_values


@pytest.mark.parametrize("q0, expected", [(1.0, 2.0), (0.0, 1.0)])
def test_exp_bound_minimize(q0, expected):
    prog = ConicProgram()
    z = prog.add_variable("z")
    prog.minimize(z)
    prog.add_exp_bound(z, q0)
    assert solve(prog).scalar(z) == pytest.approx(expected, abs=1e-7)


def test_exp_bound_maximize_exponent():
    prog = ConicProgram()
    q = prog.add_variable("q")
    prog.maximize(q)
    prog.add_exp_bound(8.0, q)
    assert solve(prog).scalar(q) == pytest.approx(3.0, abs=1e-7)


def test_exp_bound_needs_capable_backend():
    prog = ConicProgram()
    z = prog.add_variable("z")
    prog.minimize(z)
    prog.add_exp_bound(z, 1.0)
    with pytest.raises(conic.CapabilityError):
        solve(prog, "cvxopt")


@pytest.mark.parametrize("backend", BACKENDS)
def test_psd_scalar(backend):
    prog = ConicProgram()
    x = prog.add_variable("x")
    prog.minimize(x)
    prog.add_psd([[x]])
    assert solve(prog, backend).scalar(x) == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("sense, expected", [("minimize", 0.0), ("maximize", 1.0)])
def test_psd_diagonal_interval(backend, sense, expected):
    prog = ConicProgram()
    x = prog.add_variable("x")
    getattr(prog, sense)(x)
    prog.add_psd([[x, 0.0], [0.0, 1.0 - x]])
    assert solve(prog, backend).scalar(x) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_psd_off_diagonal(backend):
    prog = ConicProgram()
    y = prog.add_variable("y")
    prog.maximize(y)
    prog.add_psd([[1.0, y], [y, 1.0]])
    assert solve(prog, backend).scalar(y) == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_trivial_programs(backend):
    prog = ConicProgram()
    prog.add_variable("x")
    prog.minimize(0.0)
    res = solve(prog, backend)
    assert res.optimal and res.objective_value == 0.0

    prog = ConicProgram()
    x = prog.add_variable("x")
    prog.maximize(x)
    assert solve(prog, backend).status == "unbounded"

    prog = ConicProgram()
    x = prog.add_variable("x")
    prog.maximize(x)
    prog.add_le(x, 1.0)
    assert solve(prog, backend).objective_value == pytest.approx(1.0, abs=1e-7)


def random_socp(rng, perm=None):
    """min c^T x over a random feasible bounded SOCP."""
    n = 4
    parts = []
    for _ in range(5):
        A, b = rng.normal(size=(3, n)), rng.normal(size=3)
        parts.append(("soc", A, b, float(np.linalg.norm(b)) + 1.0))
    for _ in range(3):
        parts.append(("lin", rng.normal(size=n), 1.0, None))
    c = rng.normal(size=n)
    order = perm if perm is not None else range(len(parts))
    prog = ConicProgram()
    x = prog.add_variable("x", n)
    prog.minimize(c @ x)
    prog.add_soc(5.0, x)  # keeps it bounded; x = 0 is strictly feasible
    for idx in order:
        kind, A, b, r = parts[idx]
        if kind == "soc":
            prog.add_soc(r, A @ x + b)
        else:
            prog.add_le(A @ x, b)
    return prog


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.permutations(list(range(8))))
def test_insertion_order_does_not_matter(seed, perm):
    a = solve(random_socp(np.random.default_rng(seed)))
    b = solve(random_socp(np.random.default_rng(seed), perm))
    assert a.optimal and b.optimal
    assert a.objective_value == pytest.approx(b.objective_value, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000))
def test_solutions_satisfy_constraints_when_rechecked(seed):
    prog = random_socp(np.random.default_rng(seed))
    res = solve(prog)
    x = res["x"]
    for con in prog.constraints:
        s = con.expr.A @ x + con.expr.c
        if con.kind == "soc":
            assert np.linalg.norm(s[1:]) <= s[0] + 1e-6
        else:
            assert s.min() >= -1e-6
    assert res.residual <= 1e-8


def test_cone_violation_measures():
    prog = ConicProgram()
    x = prog.add_variable("x")
    prog.add_exp_bound(x, 1.0)
    con = prog.constraints[0]
    assert cone_violation(con, con.expr.value(np.array([2.0]))) == pytest.approx(0.0, abs=1e-12)
    assert cone_violation(con, con.expr.value(np.array([1.0]))) == pytest.approx(1.0)


def test_dump_lists_every_constraint():
    prog, _ = socp_norm_case()
    prog.add_ge(prog.variables["t"], 0.0, "floor")
    text = prog.dumps()
    assert "var t dim=1" in text and "minimize +1*t" in text
    assert sum(line.startswith("c") for line in text.splitlines()) == 2
    assert "[floor]" in text


def test_backend_selection(monkeypatch):
    assert get_backend().name == "clarabel"
    monkeypatch.setenv("NOMA_GEE_BACKEND", "cvxopt")
    assert get_backend().name == "cvxopt"
    with pytest.raises(ValueError):
        get_backend("gurobi")

"""Solver backends for :class:`ConicProgram`.

``clarabel`` (default) handles every cone type. ``cvxopt`` has no exponential
cone and raises :class:`CapabilityError` for programs that need one. Set
``NOMA_GEE_BACKEND`` to pick the default.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .program import ConicProgram, SolveResult

RESIDUAL_TOL = 1e-8
STALL_RESIDUAL_TOL = 1e-8
STALL_GAP = 1e-7
# tried in order when the default interior-point run stalls
RETRY_SETTINGS = (
    {"max_step_fraction": 0.9},
    {"static_regularization_constant": 1e-10},
    {"tol_feas": 1e-10, "tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10},
    {"equilibrate_enable": False},
)
SQRT2 = np.sqrt(2.0)


class CapabilityError(RuntimeError):
    """The backend cannot represent a constraint type used by the program."""


def _trivial(prog: ConicProgram) -> SolveResult | None:
    if prog.constraints:
        return None
    row, c0 = prog.objective_row()
    if np.any(row):
        return SolveResult("unbounded")
    x = np.zeros(prog.nvars)
    return _finish(prog, x, c0, 0)


def _finish(prog: ConicProgram, x: np.ndarray, obj: float, iters: int,
            tol: float = RESIDUAL_TOL) -> SolveResult:
    residual = prog.violation(x) / prog.scale() if prog.constraints else 0.0
    if not np.all(np.isfinite(x)) or residual > tol:
        return SolveResult("numerical_failure", solver_iterations=iters, residual=residual)
    values = {name: x[v.offset:v.offset + v.dim].copy() for name, v in prog.variables.items()}
    return SolveResult("optimal", obj, values, iters, x, residual)


def _psd_scale(order: int) -> np.ndarray:
    return np.array([1.0 if i == j else SQRT2 for j in range(order) for i in range(j + 1)])


class ClarabelBackend:
    name = "clarabel"
    capabilities = frozenset({"nonneg", "zero", "soc", "exp", "psd"})

    def __init__(self, **settings):
        self.settings = {"tol_feas": 1e-9, "tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9,
                         "max_iter": 200, **settings}

    def solve(self, prog: ConicProgram) -> SolveResult:
        import clarabel

        trivial = _trivial(prog)
        if trivial is not None:
            return trivial
        n = prog.nvars
        blocks, consts, cones = [], [], []
        for con in prog.constraints:
            A, c = con.expr.padded(n), con.expr.c
            if con.kind == "psd":
                scale = _psd_scale(con.order)
                A, c = A * scale[:, None], c * scale
                cones.append(clarabel.PSDTriangleConeT(con.order))
            elif con.kind == "nonneg":
                cones.append(clarabel.NonnegativeConeT(con.size))
            elif con.kind == "zero":
                cones.append(clarabel.ZeroConeT(con.size))
            elif con.kind == "soc":
                cones.append(clarabel.SecondOrderConeT(con.size))
            elif con.kind == "exp":
                cones.append(clarabel.ExponentialConeT())
            blocks.append(-A)
            consts.append(c)
        A = sp.csc_matrix(np.vstack(blocks))
        b = np.concatenate(consts)
        row, c0 = prog.objective_row()
        sign = -1.0 if prog.sense == "maximize" else 1.0
        P = sp.csc_matrix((n, n))
        q = sign * row
        result = None
        for extra in ({},) + RETRY_SETTINGS:
            result = self._attempt(prog, P, q, A, b, cones, {**self.settings, **extra}, row, c0)
            if result.status not in ("numerical_failure", "iteration_limit"):
                break
        return result

    @staticmethod
    def _attempt(prog, P, q, A, b, cones, options, row, c0) -> SolveResult:
        import clarabel

        settings = clarabel.DefaultSettings()
        settings.verbose = False
        for key, val in options.items():
            setattr(settings, key, val)
        try:
            sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
        except Exception:  # solver setup/factorization errors
            return SolveResult("numerical_failure")
        status = str(sol.status)
        iters = int(sol.iterations)
        if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return SolveResult("infeasible", solver_iterations=iters)
        if status in ("DualInfeasible", "AlmostDualInfeasible"):
            return SolveResult("unbounded", solver_iterations=iters)
        x = np.asarray(sol.x)
        if status not in ("Solved", "AlmostSolved"):
            # stalls near the optimum (InsufficientProgress and friends) still
            # leave a usable iterate when the duality gap has closed
            if status == "MaxIterations":
                return SolveResult("iteration_limit", solver_iterations=iters)
            gap_ok = abs(sol.obj_val - sol.obj_val_dual) <= STALL_GAP * max(1.0, abs(sol.obj_val))
            if not gap_ok:
                return SolveResult("numerical_failure", solver_iterations=iters)
            return _finish(prog, x, float(row @ x + c0), iters, STALL_RESIDUAL_TOL)
        return _finish(prog, x, float(row @ x + c0), iters)


class CvxoptBackend:
    name = "cvxopt"
    capabilities = frozenset({"nonneg", "zero", "soc", "psd"})

    def __init__(self, **options):
        self.options = {"show_progress": False, "abstol": 1e-10, "reltol": 1e-10,
                        "feastol": 1e-10, "maxiters": 200, **options}

    def solve(self, prog: ConicProgram) -> SolveResult:
        from cvxopt import matrix, solvers

        missing = {c.kind for c in prog.constraints} - self.capabilities
        if missing:
            raise CapabilityError(f"cvxopt backend cannot handle {sorted(missing)} cones")
        trivial = _trivial(prog)
        if trivial is not None:
            return trivial
        n = prog.nvars
        lin, socs, psds, eqs = [], [], [], []
        for con in prog.constraints:
            A, c = con.expr.padded(n), con.expr.c
            if con.kind == "nonneg":
                lin.append((A, c))
            elif con.kind == "zero":
                eqs.append((A, c))
            elif con.kind == "soc":
                socs.append((A, c))
            else:
                k = con.order
                full_A = np.zeros((k * k, n))
                full_c = np.zeros(k * k)
                idx = 0
                for j in range(k):
                    for i in range(j + 1):
                        for r in {i + j * k, j + i * k}:
                            full_A[r], full_c[r] = A[idx], c[idx]
                        idx += 1
                psds.append((full_A, full_c))
        G_parts = [A for A, _ in lin + socs + psds]
        h_parts = [c for _, c in lin + socs + psds]
        dims = {"l": int(sum(A.shape[0] for A, _ in lin)),
                "q": [A.shape[0] for A, _ in socs],
                "s": [int(round(np.sqrt(A.shape[0]))) for A, _ in psds]}
        row, c0 = prog.objective_row()
        sign = -1.0 if prog.sense == "maximize" else 1.0
        kwargs = {}
        if eqs:
            kwargs["A"] = matrix(np.vstack([A for A, _ in eqs]))
            kwargs["b"] = matrix(-np.concatenate([c for _, c in eqs]))
        if G_parts:
            G = matrix(-np.vstack(G_parts))
            h = matrix(np.concatenate(h_parts))
        else:
            G, h = matrix(np.zeros((0, n))), matrix(np.zeros(0))
        try:
            sol = solvers.conelp(matrix(sign * row), G, h, dims, options=dict(self.options), **kwargs)
        except (ValueError, ArithmeticError):
            return SolveResult("numerical_failure")
        iters = int(sol.get("iterations", 0))
        if sol["status"] == "primal infeasible":
            return SolveResult("infeasible", solver_iterations=iters)
        if sol["status"] == "dual infeasible":
            return SolveResult("unbounded", solver_iterations=iters)
        if sol["x"] is None:
            return SolveResult("numerical_failure", solver_iterations=iters)
        x = np.array(sol["x"]).ravel()
        return _finish(prog, x, float(row @ x + c0), iters, tol=1e-7)


BACKENDS = {"clarabel": ClarabelBackend, "cvxopt": CvxoptBackend}


def get_backend(name: str | None = None):
    name = (name or os.environ.get("NOMA_GEE_BACKEND") or "clarabel").lower()
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown conic backend {name!r}; choose from {sorted(BACKENDS)}") from None


def solve(prog: ConicProgram, backend=None) -> SolveResult:
    if backend is None or isinstance(backend, str):
        backend = get_backend(backend)
    return backend.solve(prog)

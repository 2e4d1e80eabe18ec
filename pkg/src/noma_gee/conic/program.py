"""Small conic modeling layer.

Expressions are affine maps ``x -> A x + c`` over the stacked vector of all
program variables. Problems here have a few dozen scalars, so dense rows are
cheaper than any sparse bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

LN2 = np.log(2.0)


class Expr:
    """Vector-valued affine expression ``A @ x + c``."""

    __array_priority__ = 100.0

    def __init__(self, A, c):
        A = np.asarray(A, dtype=float)
        self.A = A.reshape(1, -1) if A.ndim == 1 else A
        self.c = np.atleast_1d(np.asarray(c, dtype=float))
        if self.A.shape[0] != self.c.shape[0]:
            raise ValueError("row count mismatch")

    @property
    def size(self) -> int:
        return self.c.shape[0]

    @property
    def nvars(self) -> int:
        return self.A.shape[1]

    def __len__(self):
        return self.size

    def padded(self, n: int) -> np.ndarray:
        if self.nvars == n:
            return self.A
        out = np.zeros((self.size, n))
        out[:, :self.nvars] = self.A
        return out

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.A @ np.asarray(x)[:self.nvars] + self.c

    def is_constant(self) -> bool:
        return not np.any(self.A)

    # arithmetic ---------------------------------------------------------
    @staticmethod
    def _coerce(other, size: int) -> "Expr":
        if isinstance(other, Expr):
            return other
        c = np.broadcast_to(np.asarray(other, dtype=float), (size,))
        return Expr(np.zeros((size, 0)), c.copy())

    def _combine(self, other, sign: float) -> "Expr":
        other = self._coerce(other, self.size)
        if other.size != self.size:
            if other.size == 1:
                other = Expr(np.repeat(other.A, self.size, 0), np.repeat(other.c, self.size))
            elif self.size == 1:
                return Expr(np.repeat(self.A, other.size, 0), np.repeat(self.c, other.size))._combine(other, sign)
            else:
                raise ValueError(f"size mismatch {self.size} vs {other.size}")
        n = max(self.nvars, other.nvars)
        return Expr(self.padded(n) + sign * other.padded(n), self.c + sign * other.c)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return Expr(-self.A, -self.c)

    def __mul__(self, k):
        k = np.asarray(k, dtype=float)
        if k.ndim == 0:
            return Expr(self.A * k, self.c * k)
        return Expr(self.A * k[:, None], self.c * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / np.asarray(k, dtype=float))

    def __rmatmul__(self, M):
        M = np.asarray(M, dtype=float)
        if M.ndim == 1:
            M = M.reshape(1, -1)
        return Expr(M @ self.A, M @ self.c)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            idx = [idx]
        return Expr(self.A[idx], self.c[idx])

    def sum(self) -> "Expr":
        return Expr(self.A.sum(axis=0, keepdims=True), [self.c.sum()])

    def __repr__(self):
        return f"Expr(size={self.size}, nvars={self.nvars})"


def vstack(parts: Iterable) -> Expr:
    parts = [p if isinstance(p, Expr) else Expr._coerce(p, np.size(p)) for p in parts]
    n = max(p.nvars for p in parts)
    return Expr(np.vstack([p.padded(n) for p in parts]), np.concatenate([p.c for p in parts]))


def constant(values) -> Expr:
    return Expr._coerce(np.atleast_1d(values), np.size(values))


class Variable(Expr):
    def __init__(self, name: str, offset: int, dim: int):
        A = np.zeros((dim, offset + dim))
        A[:, offset:] = np.eye(dim)
        super().__init__(A, np.zeros(dim))
        self.name = name
        self.offset = offset
        self.dim = dim

    def __repr__(self):
        return f"Variable({self.name!r}, dim={self.dim})"


@dataclass
class Constraint:
    kind: str  # "nonneg" | "zero" | "soc" | "exp" | "psd"
    expr: Expr  # cone member (for psd: upper-triangle entries, column-major)
    label: str = ""
    order: int = 0  # psd matrix order

    @property
    def size(self) -> int:
        return self.expr.size


class ConicProgram:
    """Variables, an affine objective and cone constraints."""

    def __init__(self, name: str = "program"):
        self.name = name
        self.variables: dict[str, Variable] = {}
        self.constraints: list[Constraint] = []
        self.nvars = 0
        self.sense = "minimize"
        self.objective: Expr = constant([0.0])

    # construction -------------------------------------------------------
    def add_variable(self, name: str, dim: int = 1) -> Variable:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        if dim < 1:
            raise ValueError("dimension must be positive")
        var = Variable(name, self.nvars, dim)
        self.variables[name] = var
        self.nvars += dim
        return var

    def _register(self, kind: str, expr: Expr, label: str, order: int = 0) -> int:
        if expr.nvars > self.nvars:
            raise ValueError("constraint references unregistered variables")
        self.constraints.append(Constraint(kind, expr, label, order))
        return len(self.constraints) - 1

    def add_nonneg(self, expr, label: str = "") -> int:
        """expr >= 0 elementwise."""
        return self._register("nonneg", Expr._coerce(expr, 1), label)

    def add_ge(self, lhs, rhs, label: str = "") -> int:
        return self.add_nonneg(lhs - rhs, label)

    def add_le(self, lhs, rhs, label: str = "") -> int:
        return self.add_nonneg(rhs - lhs, label)

    def add_eq(self, lhs, rhs=0.0, label: str = "") -> int:
        return self._register("zero", Expr._coerce(lhs, 1) - rhs, label)

    def add_soc(self, rhs, lhs, label: str = "") -> int:
        """||lhs||_2 <= rhs with rhs an affine scalar."""
        rhs = Expr._coerce(rhs, 1)
        if rhs.size != 1:
            raise ValueError("SOC right-hand side must be scalar")
        lhs = lhs if isinstance(lhs, Expr) else constant(lhs)
        if rhs.is_constant() and rhs.c[0] < 0:
            raise ValueError("SOC right-hand side is structurally negative")
        return self._register("soc", vstack([rhs, lhs]), label)

    def add_exp_bound(self, z, q, label: str = "") -> int:
        """z >= 2**q, i.e. (q ln 2, 1, z) in the exponential cone."""
        z = Expr._coerce(z, 1)
        q = Expr._coerce(q, 1)
        if z.size != 1 or q.size != 1:
            raise ValueError("exp bound takes scalar expressions")
        return self._register("exp", vstack([q * LN2, constant([1.0]), z]), label)

    def add_psd(self, matrix: Sequence[Sequence], label: str = "") -> int:
        """Symmetric matrix of affine entries is PSD (upper triangle is used)."""
        n = len(matrix)
        if n == 0 or any(len(row) != n for row in matrix):
            raise ValueError("PSD constraint needs a square matrix")
        entries = [Expr._coerce(matrix[i][j], 1) for j in range(n) for i in range(j + 1)]
        return self._register("psd", vstack(entries), label, order=n)

    def maximize(self, expr) -> None:
        self.sense, self.objective = "maximize", Expr._coerce(expr, 1)

    def minimize(self, expr) -> None:
        self.sense, self.objective = "minimize", Expr._coerce(expr, 1)

    # inspection ---------------------------------------------------------
    @property
    def num_scalars(self) -> int:
        return self.nvars

    def objective_row(self) -> tuple[np.ndarray, float]:
        return self.objective.padded(self.nvars)[0], float(self.objective.c[0])

    def violation(self, x: np.ndarray) -> float:
        """Largest cone violation of ``x`` over all constraints."""
        worst = 0.0
        for con in self.constraints:
            worst = max(worst, cone_violation(con, con.expr.value(x)))
        return worst

    def scale(self) -> float:
        """Magnitude of the constant data, for normalizing residuals."""
        vals = [np.max(np.abs(c.expr.c), initial=0.0) for c in self.constraints]
        return 1.0 + max(vals, default=0.0)

    def dumps(self) -> str:
        """Readable listing: variables, objective, one constraint per line."""
        names = []
        for var in self.variables.values():
            names += [f"{var.name}[{j}]" if var.dim > 1 else var.name for j in range(var.dim)]

        def fmt(A_row, c):
            terms = [f"{a:+.6g}*{names[j]}" for j, a in enumerate(A_row) if a != 0]
            if c != 0 or not terms:
                terms.append(f"{c:+.6g}")
            return " ".join(terms)

        lines = [f"program {self.name}"]
        lines += [f"var {v.name} dim={v.dim}" for v in self.variables.values()]
        row, c0 = self.objective_row()
        lines.append(f"{self.sense} {fmt(row, c0)}")
        for idx, con in enumerate(self.constraints):
            A = con.expr.padded(self.nvars)
            parts = " ; ".join(fmt(A[r], con.expr.c[r]) for r in range(con.size))
            tag = f" [{con.label}]" if con.label else ""
            lines.append(f"c{idx} {con.kind}{tag}: {parts}")
        return "\n".join(lines) + "\n"


def cone_violation(con: Constraint, s: np.ndarray) -> float:
    if con.kind == "nonneg":
        return float(max(0.0, -s.min()))
    if con.kind == "zero":
        return float(np.abs(s).max())
    if con.kind == "soc":
        return float(max(0.0, np.linalg.norm(s[1:]) - s[0]))
    if con.kind == "exp":
        x, y, z = s
        if y <= 0:
            return float(max(-y, 0.0) + max(0.0, -z))
        return float(max(0.0, y * np.exp(min(x / y, 700.0)) - z))
    if con.kind == "psd":
        M = unpack_triangle(s, con.order)
        return float(max(0.0, -np.linalg.eigvalsh(M).min()))
    raise ValueError(con.kind)


def unpack_triangle(values: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    idx = 0
    for j in range(n):
        for i in range(j + 1):
            M[i, j] = M[j, i] = values[idx]
            idx += 1
    return M


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | unbounded | numerical_failure | iteration_limit
    objective_value: float = float("nan")
    variable_values: dict[str, np.ndarray] = field(default_factory=dict)
    solver_iterations: int = 0
    x: np.ndarray | None = None
    residual: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, var) -> np.ndarray:
        name = var.name if isinstance(var, Variable) else var
        return self.variable_values[name]

    def scalar(self, var) -> float:
        return float(self[var][0])

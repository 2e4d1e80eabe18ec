from .backends import BACKENDS, CapabilityError, get_backend, solve
from .program import ConicProgram, Expr, SolveResult, Variable, constant, vstack

__all__ = [
    "BACKENDS", "CapabilityError", "ConicProgram", "Expr", "SolveResult", "Variable",
    "constant", "get_backend", "solve", "vstack",
]

"""Backtracking solver over compiled goals, plus the brute-force oracle.

The propagation kernel is compiled with Cython when available.  Set
``ADME_PURE_PYTHON=1`` to force the pure-Python engine.
"""
import os

from ._pykernel import Engine as PyEngine

try:
    if os.environ.get("ADME_PURE_PYTHON"):
        raise ImportError("pure-Python engine requested")
    from ._kernel import Engine as CEngine
except ImportError:
    CEngine = None

Engine = CEngine or PyEngine
ENGINE_NAME = "cython" if CEngine is not None else "python"

from .search import (  # noqa: E402
    ALL, LIMIT, SAT, UNSAT, SolveOptions, SolveOutcome, SolveStats, solve, solutions_equal,
)
from .oracle import OracleTooLarge, brute_force  # noqa: E402


def solve_goal(goal, cap=1, options=None, engine=None):
    """Compile *goal* and solve it; solutions are re-validated against it."""
    from ..compiler import compile_goal

    return solve(compile_goal(goal, cap), goal, options, engine)


__all__ = [
    "Engine", "PyEngine", "CEngine", "ENGINE_NAME",
    "SAT", "UNSAT", "LIMIT", "ALL",
    "SolveOptions", "SolveOutcome", "SolveStats",
    "solve", "solve_goal", "solutions_equal", "brute_force", "OracleTooLarge",
]

"""Autonomic deployment engine.

Goals are written in Deladas (:mod:`adme.deladas`), compiled to a boolean
CSP (:mod:`adme.compiler`) and solved (:mod:`adme.solver`).  The manager in
:mod:`adme.madme` enacts solutions on a simulated fabric (:mod:`adme.fabric`)
and keeps them valid as processes and hosts fail.
"""
from .deladas import DeladasError, Goal, parse_goal, print_goal
from .model import Configuration, from_ddd, to_ddd, validate
from .solver import ENGINE_NAME, SolveOptions, solve_goal

__version__ = "0.1.0"

__all__ = [
    "DeladasError", "Goal", "parse_goal", "print_goal",
    "Configuration", "from_ddd", "to_ddd", "validate",
    "ENGINE_NAME", "SolveOptions", "solve_goal",
    "__version__",
]

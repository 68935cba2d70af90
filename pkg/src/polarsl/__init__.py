"""Spectral regularity verdicts for indefinite problems -(u'/r)' = lam w u with sign-changing w."""
from .coeffs import HalfProblem, ProblemSpec, load_problem, parse_problem, side_profile
from .catalog import FUNCTIONS, PROBLEMS, get_function, get_problem

__all__ = ["HalfProblem", "ProblemSpec", "load_problem", "parse_problem", "side_profile", "FUNCTIONS",
           "PROBLEMS", "get_function", "get_problem"]
__version__ = "0.1.0"

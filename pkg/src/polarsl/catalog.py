"""Built-in problems and test functions, each with the verdicts known for it.

Problems are factories taking keyword parameters; ``expected(**params)``
returns the known verdict table (None where nothing is known).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from . import karamata as _k
from .coeffs import INF, ConstExpr, PowerLogTerm, ProblemSpec, ReflectExpr


@dataclass
class CatalogEntry:
    name: str
    build: Callable
    expected: Callable
    defaults: dict = field(default_factory=dict)
    description: str = ""
    decoupled: str | None = None

    def problem(self, **params):
        p = {**self.defaults, **{k: v for k, v in params.items() if v is not None}}
        spec = self.build(**p)
        spec.meta["params"] = p
        spec.meta["catalog"] = self.name
        return spec

    def expected_for(self, **params):
        p = {**self.defaults, **{k: v for k, v in params.items() if v is not None}}
        return self.expected(**p)


def _table(infinity=None, zero=None, zero_case=None, regular_critical=None, similarity=None, riesz=None,
           chain_length=None, kernel_dim=None, discrete=None):
    return {"infinity": infinity, "zero": zero, "zero_case": zero_case, "regular_critical": regular_critical,
            "similarity": similarity, "riesz": riesz, "chain_length": chain_length, "kernel_dim": kernel_dim,
            "discrete": discrete}


# ------------------------------------------------------------ problems

def sgn_problem():
    one = ConstExpr(1.0)
    return ProblemSpec(-1.0, 1.0, one, one, one, one, name="sgn")


def _sgn_expected():
    return _table(True, False, "a", None, False, True, 2, 1, True)


def halfline_problem():
    one = ConstExpr(1.0)
    return ProblemSpec(-INF, INF, one, one, one, one, name="halfline")


def _halfline_expected():
    return _table(True, True, "i", None, True, None, 0, 0, None)


def power_weight_problem(alpha_plus=0.5, alpha_minus=0.5):
    """w = |x|^alpha on each side, r = 1 on (-1, 1)."""
    one = ConstExpr(1.0)
    return ProblemSpec(-1.0, 1.0, PowerLogTerm(1.0, alpha_plus), one, PowerLogTerm(1.0, alpha_minus), one,
                       name="power-weight")


def _power_expected(alpha_plus=0.5, alpha_minus=0.5):
    balanced = alpha_plus == alpha_minus
    return _table(True, not balanced, "a" if balanced else "iv", None, not balanced, True,
                  2 if balanced else 1, 1, True)


def _neglog_sq():
    # 1/(x ln^2 x) on (0, 1)
    return PowerLogTerm(1.0, -1.0, -2.0)


def neglog_reflected_problem(alpha=1.0, beta=1.0, b_plus=1.0):
    """w+ = 1/(x ln^2 x), r+ = 1 on (0, b+); the minus side is the (alpha, beta) scaled reflection."""
    w, r = _neglog_sq(), ConstExpr(1.0)
    return ProblemSpec(-b_plus / beta, b_plus, w, r, ReflectExpr(alpha, beta, w), ReflectExpr(alpha, beta, r),
                       name="neglog-reflected")


def _neglog_expected(alpha=1.0, beta=1.0, b_plus=1.0):
    reg = alpha != beta
    if b_plus >= 1.0:
        return _table(reg, True, "ii", None, reg, None, 0, 0, False)
    return _table(reg, reg, "iv" if reg else "a", None, reg, reg, 1 if reg else 2, 1, True)


def log_weight_problem(alpha_plus=0.5, alpha_minus=1.0, b_plus=1.0, b_minus=-1.0):
    """w = alpha x^-1 (-ln x)^(-1-alpha) on each side with its own alpha, r = 1."""
    wp = PowerLogTerm(alpha_plus, -1.0, -1.0 - alpha_plus)
    wm = PowerLogTerm(alpha_minus, -1.0, -1.0 - alpha_minus)
    one = ConstExpr(1.0)
    return ProblemSpec(b_minus, b_plus, wp, one, wm, one, name="log-weight")


def log_weight_kernel_sum(alpha_plus, alpha_minus, b_plus, b_minus):
    return (-math.log(b_plus)) ** -alpha_plus - (-math.log(-b_minus)) ** -alpha_minus


def _log_expected(alpha_plus=0.5, alpha_minus=1.0, b_plus=1.0, b_minus=-1.0):
    inf = alpha_plus != alpha_minus
    full_p, full_m = b_plus >= 1.0, b_minus <= -1.0
    if full_p and full_m:
        crit = alpha_plus > 1 and alpha_minus > 1
        small = 0 < alpha_plus < 1 and 0 < alpha_minus < 1
        return _table(inf, True, "ii", crit, inf, inf if small else None, 0, 0,
                      True if small else (False if alpha_plus >= 1 or alpha_minus >= 1 else None))
    if full_p or full_m:
        a = alpha_plus if full_p else alpha_minus
        disc = a < 1
        return _table(inf, True, "iii", None, inf, inf if disc else None, 0, 0, disc)
    ks = log_weight_kernel_sum(alpha_plus, alpha_minus, b_plus, b_minus)
    zero = abs(ks) > 1e-12
    return _table(inf, zero, "iv" if zero else "a", None, inf and zero, inf, 1 if zero else 2, 1, True)


PROBLEMS = {
    "sgn": CatalogEntry("sgn", sgn_problem, _sgn_expected, {}, "w = sgn x, r = 1 on (-1, 1)"),
    "neumann-unit": CatalogEntry("neumann-unit", sgn_problem, _sgn_expected, {},
                                 "w = r = 1 on (0, 1), decoupled Neumann problem", decoupled="+"),
    "halfline": CatalogEntry("halfline", halfline_problem, _halfline_expected, {}, "w = sgn x, r = 1 on the real line"),
    "power-weight": CatalogEntry("power-weight", power_weight_problem, _power_expected,
                                 {"alpha_plus": 0.5, "alpha_minus": 0.5}, "w = sgn x |x|^alpha, r = 1 on (-1, 1)"),
    "neglog-reflected": CatalogEntry("neglog-reflected", neglog_reflected_problem, _neglog_expected,
                                     {"alpha": 1.0, "beta": 1.0, "b_plus": 1.0},
                                     "w+ = 1/(x ln^2 x) on (0, 1) with a scaled reflection on the left"),
    "scaled-reflection": CatalogEntry("scaled-reflection", neglog_reflected_problem, _neglog_expected,
                                      {"alpha": 2.0, "beta": 1.0, "b_plus": 0.5},
                                      "w+ = 1/(x ln^2 x) on (0, 1/2) (integrable) with a scaled reflection"),
    "log-weight": CatalogEntry("log-weight", log_weight_problem, _log_expected,
                               {"alpha_plus": 0.5, "alpha_minus": 1.0, "b_plus": 1.0, "b_minus": -1.0},
                               "w = alpha x^-1 (-ln|x|)^(-1-alpha) per side, r = 1"),
}


def get_problem(name, **params):
    if name not in PROBLEMS:
        raise KeyError(f"unknown catalog problem {name!r}; known: {', '.join(sorted(PROBLEMS))}")
    return PROBLEMS[name].problem(**params)


# ------------------------------------------------------------ test functions

FUNCTIONS = {
    "neglog_inv": (_k.neglog_inv_handle, "1/(-ln x) at 0+"),
    "ln": (_k.ln_handle, "ln x at +inf"),
    "staircase": (_k.staircase_handle, "exp(phi(ln x)), phi the n^2 staircase, at +inf"),
    "loglog-cosine": (_k.loglog_cosine_handle, "exp(ln ln x cos ln ln x) at +inf"),
    "loglog-sine-pair": (_k.loglog_sine_pair, "exp(ln ln x +- sin ln ln x) at +inf"),
}


def get_function(name):
    if name not in FUNCTIONS:
        raise KeyError(name)
    return FUNCTIONS[name][0]()

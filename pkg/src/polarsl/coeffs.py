"""Coefficient expressions, accumulated integrals W and R, and their inverses.

Both sides of the interval are stored as plus-type half problems in the
reflected variable t = |x|, with positive coefficients.  Signs are put
back only at the SideProfile level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from ._quad import DivergenceError
from .karamata import Handle

INF = math.inf


class DomainError(ValueError):
    pass


class NoBracketError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, msg, line=0, col=0):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


def _arr(x):
    return np.asarray(x, dtype=float)


def _logsumexp(parts):
    stack = np.stack(np.broadcast_arrays(*parts))
    top = np.max(stack, axis=0)
    safe = np.where(np.isfinite(top), top, 0.0)
    return safe + np.log(np.sum(np.exp(stack - safe), axis=0))


# ---------------------------------------------------------------- expressions

class CoefficientExpr:
    """A positive coefficient function on (0, natural_end)."""

    kind = "abstract"
    natural_end = INF

    def __call__(self, x):
        return self.evaluate(_arr(x))

    def evaluate(self, x):
        raise NotImplementedError

    def scalar(self):
        ev = self.evaluate
        return lambda t: float(ev(np.array(t)))

    def eval_rev(self, s, end):
        """Value at end - s, evaluated without cancellation where possible."""
        return self.evaluate(end - _arr(s))

    def ln_depth(self, u):
        u = _arr(u)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            return np.log(self.evaluate(np.exp(-u)))

    def primitive(self, x):
        return None

    def closed_tail(self, x, end):
        return None

    def integrable_at_zero(self):
        raise NotImplementedError

    def integrable_at(self, end):
        raise NotImplementedError

    def unbounded_at(self, end):
        return False

    def ln_prim_depth(self, u):
        u = _arr(u)
        vals = [math.log(antiderivative(self, math.exp(-float(ui)))) for ui in np.ravel(u)]
        return np.reshape(vals, u.shape)

    def ln_prim_ratio(self, u, d):
        return self.ln_prim_depth(_arr(u) + _arr(d)) - self.ln_prim_depth(u)

    @property
    def log_capable(self):
        return False


class PowerLogTerm(CoefficientExpr):
    """x -> c x^a (-ln x)^b."""

    kind = "powerlog"

    def __init__(self, scale, power=0.0, logpower=0.0, orientation=1):
        if not scale > 0:
            raise DomainError(f"scale must be positive, got {scale}")
        self.c = float(scale)
        self.a = float(power)
        self.b = float(logpower)
        self.orientation = orientation
        self.natural_end = 1.0 if self.b != 0 else INF

    def __repr__(self):
        return f"PowerLogTerm({self.c!r}, {self.a!r}, {self.b!r})"

    def describe(self):
        parts = [repr(self.c)]
        if self.a != 0:
            parts.append(f"x^{self.a!r}")
        if self.b != 0:
            parts.append(f"neglog(x)^{self.b!r}")
        return "*".join(parts)

    def evaluate(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self.c * np.power(x, self.a)
            if self.b != 0:
                out = out * np.power(-np.log(x), self.b)
        return out

    def scalar(self):
        c, a, b = self.c, self.a, self.b
        log = math.log
        if b == 0 and a == 0:
            return lambda t: c
        if b == 0:
            return lambda t: c * t ** a
        if a == 0:
            return lambda t: c * (-log(t)) ** b
        return lambda t: c * t ** a * (-log(t)) ** b

    def eval_rev(self, s, end):
        s = _arr(s)
        if self.b != 0 and end == 1.0:
            with np.errstate(divide="ignore", over="ignore"):
                lg = -np.log1p(-s)
                return self.c * np.exp(self.a * np.log1p(-s)) * np.power(lg, self.b)
        return self.evaluate(end - s)

    def ln_depth(self, u):
        u = _arr(u)
        out = math.log(self.c) - self.a * u
        if self.b != 0:
            with np.errstate(divide="ignore"):
                out = out + self.b * np.log(u)
        return out

    def ln_depth_ratio(self, u, d):
        """ln_depth(u + d) - ln_depth(u) without cancellation."""
        u, d = np.broadcast_arrays(_arr(u), _arr(d))
        out = -self.a * d
        if self.b != 0:
            out = out + self.b * np.log1p(d / u)
        return out

    def integrable_at_zero(self):
        return self.a > -1 or (self.a == -1 and self.b < -1)

    def integrable_at(self, end):
        if end == INF:
            return self.b == 0 and self.a < -1
        if self.b != 0 and end == 1.0:
            return self.b > -1
        return True

    def unbounded_at(self, end):
        if end == 0:
            return self.a < 0 or (self.a == 0 and self.b > 0)
        if end == INF:
            return self.a > 0
        if self.b != 0 and end == 1.0:
            return self.b < 0
        return False

    def primitive(self, x):
        c, a, b = self.c, self.a, self.b
        x = _arr(x)
        if b == 0 and a > -1:
            return c * np.power(x, a + 1) / (a + 1)
        if a == -1 and b < -1:
            return c * np.power(-np.log(x), b + 1) / (-b - 1)
        return None

    def closed_tail(self, x, end):
        c, a, b = self.c, self.a, self.b
        x = _arr(x)
        if a == -1 and b > -1 and end <= 1.0:
            return c * (np.power(-np.log(x), b + 1) - (-math.log(end)) ** (b + 1)) / (b + 1)
        if a == -1 and b < -1 and end < 1.0:
            return c * ((-math.log(end)) ** (b + 1) - np.power(-np.log(x), b + 1)) / (-b - 1)
        if b == 0 and a < -1 and end == INF:
            return c * np.power(x, a + 1) / (-a - 1)
        if b == 0 and a > -1 and end < INF:
            return (c / (a + 1)) * (end ** (a + 1) - np.power(x, a + 1))
        return None

    @property
    def log_capable(self):
        return True

    def _lnJ(self, u):
        # J(u) = int_0^inf exp(-k s) (1 + s/u)^b ds
        k = self.a + 1
        u = np.atleast_1d(_arr(u))
        edges = np.array([0.0, 0.5, 2.0, 6.0, 14.0, 26.0, 42.0, 60.0]) / k
        x, w = _quad._X20, _quad._W20
        lo, hi = edges[:-1], edges[1:]
        pts = (0.5 * (lo + hi))[:, None] + (0.5 * (hi - lo))[:, None] * x[None, :]
        wts = (0.5 * (hi - lo))[:, None] * w[None, :]
        s = pts.ravel()
        ws = wts.ravel()
        vals = np.exp(-k * s)[None, :] * np.power(1.0 + s[None, :] / u[:, None], self.b)
        return np.log(vals @ ws)

    def ln_prim_depth(self, u):
        u = _arr(u)
        c, a, b = self.c, self.a, self.b
        if b == 0:
            if not a > -1:
                raise DivergenceError("not integrable at 0")
            return math.log(c / (a + 1)) - (a + 1) * u
        if a == -1:
            if not b < -1:
                raise DivergenceError("not integrable at 0")
            return math.log(c / (-b - 1)) + (b + 1) * np.log(u)
        if a < -1:
            raise DivergenceError("not integrable at 0")
        shape = u.shape
        flat = np.ravel(u)
        out = math.log(c) - (a + 1) * flat + b * np.log(flat)
        big = flat >= 1.0
        res = np.empty_like(flat)
        if big.any():
            res[big] = out[big] + self._lnJ(flat[big])
        if (~big).any():
            res[~big] = super().ln_prim_depth(flat[~big])
        return res.reshape(shape)

    def ln_prim_ratio(self, u, d):
        u, d = np.broadcast_arrays(_arr(u), _arr(d))
        a, b = self.a, self.b
        if b == 0:
            return -(a + 1) * d
        if a == -1:
            return (b + 1) * np.log1p(d / u)
        base = -(a + 1) * d + b * np.log1p(d / u)
        if np.all(u >= 1.0):
            return base + self._lnJ((u + d).ravel()).reshape(u.shape) - self._lnJ(u.ravel()).reshape(u.shape)
        return self.ln_prim_depth(u + d) - self.ln_prim_depth(u)


class ConstExpr(PowerLogTerm):
    kind = "constant"

    def __init__(self, value):
        super().__init__(value, 0.0, 0.0)

    def __repr__(self):
        return f"ConstExpr({self.c!r})"


class SumExpr(CoefficientExpr):
    kind = "sum"

    def __init__(self, terms):
        terms = list(terms)
        if not terms:
            raise DomainError("empty sum")
        self.terms = terms
        self.natural_end = min(t.natural_end for t in terms)

    def __repr__(self):
        return f"SumExpr({self.terms!r})"

    def describe(self):
        return " + ".join(t.describe() for t in self.terms)

    def evaluate(self, x):
        return sum(t.evaluate(x) for t in self.terms)

    def scalar(self):
        fs = [t.scalar() for t in self.terms]
        return lambda x: sum(f(x) for f in fs)

    def eval_rev(self, s, end):
        return sum(t.eval_rev(s, end) for t in self.terms)

    def ln_depth(self, u):
        return _logsumexp([t.ln_depth(u) for t in self.terms])

    def primitive(self, x):
        parts = [t.primitive(x) for t in self.terms]
        if any(p is None for p in parts):
            return None
        return sum(parts)

    def closed_tail(self, x, end):
        parts = [t.closed_tail(x, end) for t in self.terms]
        if any(p is None for p in parts):
            return None
        return sum(parts)

    def integrable_at_zero(self):
        return all(t.integrable_at_zero() for t in self.terms)

    def integrable_at(self, end):
        return all(t.integrable_at(end) for t in self.terms)

    def unbounded_at(self, end):
        return any(t.unbounded_at(end) for t in self.terms)

    @property
    def log_capable(self):
        return all(t.log_capable for t in self.terms)

    def ln_prim_depth(self, u):
        if not self.log_capable:
            return super().ln_prim_depth(u)
        return _logsumexp([t.ln_prim_depth(u) for t in self.terms])

    def ln_prim_ratio(self, u, d):
        if not self.log_capable:
            return super().ln_prim_ratio(u, d)
        u, d = np.broadcast_arrays(_arr(u), _arr(d))
        lns = [t.ln_prim_depth(u) for t in self.terms]
        tot = _logsumexp(lns)
        return _logsumexp([ln - tot + t.ln_prim_ratio(u, d) for ln, t in zip(lns, self.terms)])


class ReflectExpr(CoefficientExpr):
    """t -> alpha * base(beta t); the minus side of the scaled-reflection family."""

    kind = "reflect"

    def __init__(self, alpha, beta, base):
        if not (alpha > 0 and beta > 0):
            raise DomainError("reflect needs positive alpha and beta")
        if isinstance(base, ReflectExpr):
            raise DomainError("reflect of a reflection is not supported")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.base = base
        self.natural_end = base.natural_end / self.beta

    def __repr__(self):
        return f"ReflectExpr({self.alpha!r}, {self.beta!r}, {self.base!r})"

    def describe(self):
        return f"reflect({self.alpha!r},{self.beta!r})"

    def evaluate(self, x):
        return self.alpha * self.base.evaluate(self.beta * _arr(x))

    def scalar(self):
        f = self.base.scalar()
        al, be = self.alpha, self.beta
        return lambda t: al * f(be * t)

    def eval_rev(self, s, end):
        return self.alpha * self.base.eval_rev(self.beta * _arr(s), self.beta * end)

    def ln_depth(self, u):
        return math.log(self.alpha) + self.base.ln_depth(_arr(u) - math.log(self.beta))

    def primitive(self, x):
        p = self.base.primitive(self.beta * _arr(x))
        return None if p is None else (self.alpha / self.beta) * p

    def closed_tail(self, x, end):
        p = self.base.closed_tail(self.beta * _arr(x), self.beta * end)
        return None if p is None else (self.alpha / self.beta) * p

    def integrable_at_zero(self):
        return self.base.integrable_at_zero()

    def integrable_at(self, end):
        return self.base.integrable_at(self.beta * end)

    def unbounded_at(self, end):
        return self.base.unbounded_at(self.beta * end)

    @property
    def log_capable(self):
        return self.base.log_capable

    def ln_prim_depth(self, u):
        return math.log(self.alpha / self.beta) + self.base.ln_prim_depth(_arr(u) - math.log(self.beta))

    def ln_prim_ratio(self, u, d):
        return self.base.ln_prim_ratio(_arr(u) - math.log(self.beta), d)

    def __getattr__(self, name):
        # stable depth ratio only when the base has one
        if name == "ln_depth_ratio" and hasattr(self.base, "ln_depth_ratio"):
            base = self.base
            return lambda u, d: base.ln_depth_ratio(_arr(u) - math.log(self.beta), d)
        raise AttributeError(name)


class TabulatedExpr(CoefficientExpr):
    """Monotone (PCHIP) interpolation of samples, constant outside the sample range."""

    kind = "tabulated"

    def __init__(self, xs, ys):
        from scipy.interpolate import PchipInterpolator

        xs = _arr(xs)
        ys = _arr(ys)
        if xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0) or xs[0] <= 0:
            raise DomainError("tabulated nodes must be positive and strictly increasing")
        if np.any(ys <= 0):
            raise DomainError("tabulated values must be positive")
        self.xs, self.ys = xs, ys
        self._p = PchipInterpolator(xs, ys, extrapolate=False)
        self._P = self._p.antiderivative()

    def __repr__(self):
        return f"TabulatedExpr(<{self.xs.size} nodes>)"

    def describe(self):
        return f"table[{self.xs.size}]"

    def evaluate(self, x):
        x = _arr(x)
        return np.where(x <= self.xs[0], self.ys[0],
                        np.where(x >= self.xs[-1], self.ys[-1],
                                 self._p(np.clip(x, self.xs[0], self.xs[-1]))))

    def integrable_at_zero(self):
        return True

    def integrable_at(self, end):
        return end < INF

    def primitive(self, x):
        x = _arr(x)
        x0, x1 = self.xs[0], self.xs[-1]
        inner = self._P(np.clip(x, x0, x1)) - self._P(x0)
        return (self.ys[0] * np.minimum(x, x0) + inner
                + self.ys[-1] * np.maximum(x - x1, 0.0))

    def closed_tail(self, x, end):
        if end == INF:
            return None
        return self.primitive(end) - self.primitive(x)


# ------------------------------------------------------------ integration

def _split_point(expr):
    return min(0.5, 0.5 * expr.natural_end)


def antiderivative(expr, x, rtol=1e-10):
    """Integral of expr from 0 to x (x may be an array)."""
    xa = _arr(x)
    if np.any(xa < 0) or np.any(xa > expr.natural_end):
        raise DomainError("point outside the expression's interval")
    if not expr.integrable_at_zero():
        raise DivergenceError("coefficient is not integrable at 0")
    p = expr.primitive(xa)
    if p is not None:
        return p if xa.ndim else float(p)
    out = np.array([_antiderivative_quad(expr, float(t), rtol) for t in np.ravel(xa)])
    out = out.reshape(xa.shape)
    return out if xa.ndim else float(out)


def _antiderivative_quad(expr, x, rtol):
    if x == 0.0:
        return 0.0
    xm = _split_point(expr)
    g = lambda u: np.exp(expr.ln_depth(u) - u)
    if x <= xm:
        return _quad.tail(g, -math.log(x), rtol)
    base = _quad.tail(g, -math.log(xm), rtol)
    end = expr.natural_end
    if end < INF and expr.unbounded_at(end):
        return base + _quad.integrate_geometric(lambda s: expr.eval_rev(s, end), end - x, end - xm, rtol)
    if end == INF and x > 4 * xm:
        return base + _quad.integrate_geometric(expr.evaluate, xm, x, rtol)
    return base + _quad.integrate(expr.evaluate, xm, x, rtol=rtol)


def quad_antiderivative(expr, x, rtol=1e-10):
    """Quadrature route only, used to cross-check the closed forms."""
    return _antiderivative_quad(expr, float(x), rtol)


def tail_integral(expr, x, end, rtol=1e-10, prefer_closed=True):
    """Integral of expr over (x, end); raises DivergenceError if it diverges."""
    if prefer_closed:
        if not expr.integrable_at(end):
            raise DivergenceError("coefficient is not integrable at the endpoint")
        p = expr.closed_tail(x, end)
        if p is not None:
            return float(p)
    if end == INF:
        return _quad.doubling_tail(expr.evaluate, x, rtol)
    s0 = end - x
    g = lambda u: expr.eval_rev(np.exp(-u), end) * np.exp(-u)
    return _quad.tail(g, -math.log(s0), rtol)


def integrates_to(expr, end):
    """Numerical integrability test near `end` (independent of the analytic table)."""
    start = 0.5 * end if end < INF else 1.0
    try:
        tail_integral(expr, start, end, prefer_closed=False)
        return True
    except DivergenceError:
        return False


def integrates_at_zero(expr):
    try:
        _quad.tail(lambda u: np.exp(expr.ln_depth(u) - u), -math.log(_split_point(expr)), 1e-8)
        return True
    except DivergenceError:
        return False


def eval_coeff(expr, x, end=None):
    """Coefficient value at a point strictly inside (0, end)."""
    end = expr.natural_end if end is None else end
    if not (0 < x < end):
        raise DomainError(f"x={x} outside (0, {end})")
    v = float(expr.evaluate(np.array(float(x))))
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"coefficient not finite and positive at x={x}")
    return v


# ------------------------------------------------------------ inversion

def invert_monotone(fn, y, lo, hi, tol=1e-12, maxiter=200, expand=True, limit=None):
    """Solve fn(x) = y for monotone fn, starting from the bracket [lo, hi].

    If the bracket misses y and expansion is allowed, the end nearer to y
    moves outward by a doubling step (kept inside `limit`).  The root is
    then found by Illinois regula falsi with a bisection every fourth step.
    """
    flo, fhi = fn(lo) - y, fn(hi) - y
    step = hi - lo
    tries = 0
    while flo * fhi > 0:
        if not expand or tries >= 200:
            raise NoBracketError(f"value {y} outside the bracketed range")
        tries += 1
        step *= 2.0
        if abs(flo) < abs(fhi):
            new = lo - step
            if limit is not None and new <= limit[0]:
                new = 0.5 * (lo + limit[0])
                if new == lo:
                    raise NoBracketError(f"value {y} outside the range")
            hi, fhi = lo, flo
            lo, flo = new, fn(new) - y
        else:
            new = hi + step
            if limit is not None and new >= limit[1]:
                new = 0.5 * (hi + limit[1])
                if new == hi:
                    raise NoBracketError(f"value {y} outside the range")
            lo, flo = hi, fhi
            hi, fhi = new, fn(new) - y
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    a, fa, b, fb = lo, flo, hi, fhi
    ftol = tol * max(1.0, abs(y))
    last = 0
    for it in range(maxiter):
        if it % 4 == 3:
            x = 0.5 * (a + b)
        else:
            den = fb - fa
            x = b - fb * (b - a) / den if den != 0 and math.isfinite(den) else 0.5 * (a + b)
            if not min(a, b) < x < max(a, b):
                x = 0.5 * (a + b)
        fx = fn(x) - y
        if fx == 0 or abs(fx) <= ftol and abs(b - a) <= 1e3 * tol * max(1.0, abs(x)):
            return x
        if fx * fb < 0:
            a, fa = b, fb
            last = 0
        elif last == 1:
            fa *= 0.5
        else:
            last = 1
        b, fb = x, fx
        if abs(b - a) <= 4e-16 * max(abs(a), abs(b), 1e-300):
            return b
    return b


# ------------------------------------------------------------ problems

@dataclass(frozen=True)
class HalfProblem:
    """One side in plus-type coordinates t = |x| on (0, L)."""

    w: CoefficientExpr
    r: CoefficientExpr
    L: float
    sign: int = 1

    def __post_init__(self):
        for name, e in (("w", self.w), ("r", self.r)):
            if self.L > e.natural_end * (1 + 1e-15):
                raise DomainError(f"{name} is not defined up to |b|={self.L}")
            if not e.integrable_at_zero():
                raise DomainError(f"{name} is not integrable at 0")

    def W(self, t):
        return antiderivative(self.w, t)

    def R(self, t):
        return antiderivative(self.r, t)

    def W_end(self):
        return self._total(self.w)

    def R_end(self):
        return self._total(self.r)

    def _total(self, e):
        if not e.integrable_at(self.L):
            return INF
        if self.L < INF and not e.unbounded_at(self.L):
            p = e.primitive(self.L)
            if p is not None and math.isfinite(p):
                return float(p)
        xm = 0.5 * self.L if self.L < INF else 1.0
        return float(antiderivative(e, xm)) + tail_integral(e, xm, self.L)

    def W_tail(self, t):
        """Integral of w over (t, L)."""
        return tail_integral(self.w, t, self.L)

    def R_tail(self, t):
        return tail_integral(self.r, t, self.L)

    def swapped(self):
        return HalfProblem(self.r, self.w, self.L, self.sign)


@dataclass(frozen=True)
class ProblemSpec:
    b_minus: float
    b_plus: float
    w_plus: CoefficientExpr
    r_plus: CoefficientExpr
    w_minus: CoefficientExpr
    r_minus: CoefficientExpr
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.b_minus < 0 < self.b_plus):
            raise DomainError("need b_minus < 0 < b_plus")
        self.half("+")
        self.half("-")

    def half(self, side):
        if side in ("+", 1, "plus"):
            return HalfProblem(self.w_plus, self.r_plus, self.b_plus, 1)
        if side in ("-", -1, "minus"):
            return HalfProblem(self.w_minus, self.r_minus, -self.b_minus, -1)
        raise ValueError(f"unknown side {side!r}")

    def echo(self):
        return {
            "name": self.name,
            "b_minus": _num(self.b_minus),
            "b_plus": _num(self.b_plus),
            "w_plus": _describe(self.w_plus),
            "r_plus": _describe(self.r_plus),
            "w_minus": _describe(self.w_minus),
            "r_minus": _describe(self.r_minus),
        }


def _num(v):
    if v == INF:
        return "+inf"
    if v == -INF:
        return "-inf"
    return v


def _describe(e):
    return e.describe() if hasattr(e, "describe") else repr(e)


def side_sign(side):
    return 1 if side in ("+", 1, "plus") else -1


# ------------------------------------------------------------ profiles

class MonotoneFn:
    """Callable monotone handle with a closed-form flag."""

    def __init__(self, fn, closed_form, name=""):
        self._fn = fn
        self.closed_form = closed_form
        self.name = name

    def __call__(self, x):
        xa = _arr(x)
        if xa.ndim == 0:
            return float(self._fn(float(xa)))
        return np.array([self._fn(float(t)) for t in np.ravel(xa)]).reshape(xa.shape)


class HalfProfile:
    """Profiles of a plus-type half problem: W, R, R^-1, G = W o R^-1, F and f = F^-1."""

    def __init__(self, half: HalfProblem):
        self.h = half
        self.R_L = half.R_end()
        self.W_L = half.W_end()
        self.closed_W = half.w.primitive(np.array(0.5 * min(half.L, 1.0))) is not None
        self.closed_R = half.r.primitive(np.array(0.5 * min(half.L, 1.0))) is not None
        r = half.r
        self._rinv_closed = (isinstance(r, PowerLogTerm) and r.b == 0 and r.a > -1)

    # plain handles
    def W(self, t):
        return antiderivative(self.h.w, t)

    def R(self, t):
        return antiderivative(self.h.r, t)

    def R_inv(self, y):
        if not y > 0:
            if y == 0:
                return 0.0
            raise DomainError("R^-1 needs a positive argument")
        if y >= self.R_L:
            raise NoBracketError("value beyond R(b)")
        if self._rinv_closed:
            r = self.h.r
            return (y * (r.a + 1) / r.c) ** (1.0 / (r.a + 1))
        u = self.u_of_depth(-math.log(y))
        return math.exp(-u)

    def G(self, x):
        return self.W(self.R_inv(x))

    def F(self, x):
        return 1.0 / (x * self.G(x))

    def f(self, y):
        """Inverse of F: f(y) = R(tau) where R(tau) W(tau) = 1/y."""
        return math.exp(self.ln_f(y))

    def ln_f(self, y):
        target = -math.log(y)
        h = self.h

        def lnRW(u):
            return float(h.r.ln_prim_depth(u)) + float(h.w.ln_prim_depth(u))

        u_min = -math.log(h.L) if h.L < INF else -50.0
        if h.L < INF:
            u_min += 1e-12 * max(1.0, abs(u_min))
            if lnRW(u_min) < target:
                raise NoBracketError("y below the range of F")
        lo = max(u_min, 1.0)
        hi = lo + 4.0
        u = invert_monotone(lambda s: -lnRW(s), -target, lo, hi, tol=1e-14, limit=(u_min, 1e300))
        return float(h.r.ln_prim_depth(u))

    # depth-coordinate helpers (depth u = -ln t)
    def u_of_depth(self, v):
        """Depth u of t with R(t) = exp(-v)."""
        r = self.h.r
        if self._rinv_closed:
            return (v + math.log(r.c / (r.a + 1))) / (r.a + 1)
        lnR = lambda s: float(r.ln_prim_depth(s))
        lo = max(v, 1.0) if self.h.L >= 1 else max(v, -math.log(self.h.L) + 1e-9)
        return invert_monotone(lambda s: -lnR(s), v, lo, lo + 2.0, tol=1e-14)

    def _shift(self, u, d):
        r = self.h.r
        if self._rinv_closed:
            return d / (r.a + 1)
        return invert_monotone(lambda s: -float(r.ln_prim_ratio(u, s)), d, 0.0, d + 1.0, tol=1e-15)

    def G_handle(self, name="G"):
        """W o R^-1 as a karamata handle at 0+, in depth v = -ln x."""
        w = self.h.w

        def lnG(v):
            v = _arr(v)
            us = np.array([self.u_of_depth(float(t)) for t in np.ravel(v)]).reshape(v.shape)
            return w.ln_prim_depth(us)

        def ratio(v, d):
            v, d = np.broadcast_arrays(_arr(v), _arr(d))
            out = np.empty(v.shape)
            for idx in np.ndindex(v.shape):
                u = self.u_of_depth(float(v[idx]))
                out[idx] = float(w.ln_prim_ratio(u, self._shift(u, float(d[idx]))))
            return out

        capable = self.h.w.log_capable and self.h.r.log_capable
        v_max = 1e8 if capable else 600.0
        return Handle(regime="zero_plus", lnf=lnG, ln_ratio=ratio, v_max=v_max, name=name,
                      log_capable=capable)


class SideProfile:
    """Signed handles for one side: W, R, R_inv, F, f (minus side in x < 0)."""

    def __init__(self, problem: ProblemSpec, side):
        self.side = "+" if side_sign(side) > 0 else "-"
        self.half = HalfProfile(problem.half(self.side))
        s = 1 if self.side == "+" else -1
        hp = self.half
        self.sign = s
        cW, cR = hp.closed_W, hp.closed_R
        self.W = MonotoneFn(lambda x: s * hp.W(s * x), cW, "W")
        self.R = MonotoneFn(lambda x: s * hp.R(s * x), cR, "R")
        self.R_inv = MonotoneFn(lambda y: s * hp.R_inv(s * y), hp._rinv_closed, "R_inv")
        self.F = MonotoneFn(lambda x: hp.F(s * x), cW and cR, "F")
        self.f = MonotoneFn(lambda y: s * hp.f(y), False, "f")
        self.closed_form = {"W": cW, "R": cR, "R_inv": hp._rinv_closed, "F": cW and cR, "f": False}

    def G(self, x):
        """W(R^-1(x)) with signs."""
        return self.sign * self.half.G(self.sign * x)

    def summary(self):
        hp = self.half
        return {
            "side": self.side,
            "W_end": _num(self.sign * hp.W_L) if hp.W_L < INF else _num(self.sign * INF),
            "R_end": _num(self.sign * hp.R_L) if hp.R_L < INF else _num(self.sign * INF),
            "closed_form": self.closed_form,
        }


def side_profile(problem, side):
    """Assemble the handle bundle and check round trips on a probe grid."""
    prof = SideProfile(problem, side)
    hp = prof.half
    L = hp.h.L
    top = min(0.5 * L, 0.5) if L < INF else 0.5
    for t in np.geomspace(1e-6 * top, top, 5):
        y = hp.R(t)
        back = hp.R_inv(y)
        if abs(back - t) > 1e-8 * max(1.0, t):
            raise NoBracketError(f"R inverse round trip failed at {t}")
    return prof


# ------------------------------------------------------------ endpoint classes

@dataclass
class EndpointClass:
    side: str
    w_integrable: bool
    r_integrable: bool
    regularity: str
    limit_type: str
    disk_radius: float | None = None
    evidence: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "side": self.side,
            "w_integrable": self.w_integrable,
            "r_integrable": self.r_integrable,
            "regularity": self.regularity,
            "limit_type": self.limit_type,
            "disk_radius": self.disk_radius,
            "evidence": self.evidence,
        }


def integrability(half: HalfProblem):
    return half.w.integrable_at(half.L), half.r.integrable_at(half.L)


def classify_endpoint(problem, side, probe=True, threshold=1e-6):
    h = problem.half(side)
    wi, ri = integrability(h)
    tag = "+" if side_sign(side) > 0 else "-"
    numeric = {"w": integrates_to(h.w, h.L), "r": integrates_to(h.r, h.L)}
    evidence = {"numeric_integrability": numeric}
    if wi and ri:
        return EndpointClass(tag, wi, ri, "regular", "limit_circle", None, evidence)
    if not probe:
        return EndpointClass(tag, wi, ri, "singular", "undetermined", None, evidence)
    from .weyl import weyl_disk_probe

    radius, trace = weyl_disk_probe(h)
    evidence["disk_trace"] = trace
    if radius < threshold:
        lt = "limit_point"
    elif len(trace) >= 2 and trace[-1][1] > 0.5 * trace[0][1] and radius > 10 * threshold:
        lt = "limit_circle"
    else:
        lt = "undetermined"
    # z = 0 basis {1, R}: both in L2(w) near b means limit circle
    if lt == "undetermined":
        lt = "limit_circle" if _z0_basis_square_integrable(h) else "limit_point"
        evidence["decided_by"] = "z0_basis"
    return EndpointClass(tag, wi, ri, "singular", lt, radius, evidence)


def _z0_basis_square_integrable(h):
    if not h.w.integrable_at(h.L):
        return False
    if h.r.integrable_at(h.L):
        return True
    # needs R^2 w integrable near L
    start = 0.5 * h.L if h.L < INF else 1.0
    R0 = antiderivative(h.r, start)

    def g(t):
        return np.array([(R0 + _quad.integrate(h.r.evaluate, start, float(s), n=4)) ** 2
                         for s in np.ravel(t)]).reshape(np.shape(t)) * h.w.evaluate(t)

    try:
        if h.L == INF:
            _quad.doubling_tail(g, start, rtol=1e-6)
        else:
            _quad.integrate_geometric(g, start, h.L * (1 - 1e-12), rtol=1e-6)
        return True
    except DivergenceError:
        return False


# ------------------------------------------------------------ config parser

_KEYS = {"interval.b_minus", "interval.b_plus", "plus.w", "plus.r", "minus.w", "minus.r", "name"}


class _Lexer:
    def __init__(self, text, line, col0):
        self.s = text
        self.i = 0
        self.line = line
        self.col0 = col0

    def err(self, msg):
        raise ParseError(msg, self.line, self.col0 + self.i + 1)

    def ws(self):
        while self.i < len(self.s) and self.s[self.i] in " \t":
            self.i += 1

    def peek(self, lit):
        self.ws()
        return self.s.startswith(lit, self.i)

    def eat(self, lit):
        if not self.peek(lit):
            self.err(f"expected {lit!r}")
        self.i += len(lit)

    def done(self):
        self.ws()
        return self.i >= len(self.s)


def _parse_literal(lx):
    import re

    lx.ws()
    m = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?").match(lx.s, lx.i)
    if not m:
        lx.err("expected a number")
    lx.i = m.end()
    return float(m.group(0))


def _parse_num(lx, params):
    lx.ws()
    if lx.peek("("):
        lx.eat("(")
        total = 0.0
        sign = 1.0
        first = True
        while True:
            if lx.peek("-"):
                lx.eat("-")
                sign = -sign if first else -1.0
            elif lx.peek("+") and not first:
                lx.eat("+")
                sign = 1.0
            elif not first:
                break
            total += sign * _parse_atom(lx, params)
            first = False
            sign = 1.0
            if lx.peek(")"):
                break
        lx.eat(")")
        return total
    if lx.peek("-$"):
        lx.eat("-")
        return -_parse_atom(lx, params)
    return _parse_atom(lx, params)


def _parse_atom(lx, params):
    import re

    lx.ws()
    if lx.peek("$"):
        lx.eat("$")
        m = re.compile(r"[A-Za-z_]\w*").match(lx.s, lx.i)
        if not m:
            lx.err("expected a parameter name")
        name = m.group(0)
        if name not in params:
            lx.err(f"unknown parameter ${name}")
        lx.i = m.end()
        return float(params[name])
    return _parse_literal(lx)


def _parse_expr(lx, params, side, kind, plus_exprs):
    terms = []
    while True:
        terms.append(_parse_term(lx, params, side, kind, plus_exprs))
        if lx.done():
            break
        lx.eat("+")
    if len(terms) == 1:
        return terms[0]
    if any(isinstance(t, ReflectExpr) for t in terms):
        lx.err("reflect(...) cannot be part of a sum")
    return SumExpr(terms)


def _parse_term(lx, params, side, kind, plus_exprs):
    if lx.peek("reflect"):
        lx.eat("reflect")
        lx.eat("(")
        alpha = _parse_num(lx, params)
        lx.eat(",")
        beta = _parse_num(lx, params)
        lx.eat(")")
        if side != "minus":
            lx.err("reflect(...) is only allowed on the minus side")
        base = plus_exprs.get(kind)
        if base is None:
            lx.err(f"plus.{kind} must be defined before minus.{kind}")
        return ReflectExpr(alpha, beta, base)
    c, a, b = 1.0, 0.0, 0.0
    seen = False
    while True:
        if lx.peek("neglog(x)"):
            lx.eat("neglog(x)")
            b += _parse_num(lx, params) if _try(lx, "^") else 1.0
        elif lx.peek("x"):
            lx.eat("x")
            a += _parse_num(lx, params) if _try(lx, "^") else 1.0
        else:
            c *= _parse_num(lx, params)
        seen = True
        if not lx.peek("*"):
            break
        lx.eat("*")
    if not seen:
        lx.err("empty term")
    if not c > 0:
        lx.err("coefficient scale must be positive")
    if a == 0 and b == 0:
        return ConstExpr(c)
    return PowerLogTerm(c, a, b)


def _try(lx, lit):
    if lx.peek(lit):
        lx.eat(lit)
        return True
    return False


def parse_problem(text, params=None, name=""):
    """Parse a key = value problem file into a ProblemSpec."""
    params = dict(params or {})
    entries = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            raise ParseError("expected key = value", ln, 1)
        key, val = line.split("=", 1)
        key = key.strip()
        col = line.index("=") + 2
        if key.startswith("param."):
            pname = key[6:]
            if pname not in params:
                lx = _Lexer(val, ln, col - 1)
                params[pname] = _parse_literal(lx)
                if not lx.done():
                    lx.err("trailing input")
            continue
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", ln, 1)
        entries[key] = (val, ln, col - 1)
    for k in ("interval.b_minus", "interval.b_plus", "plus.w", "plus.r", "minus.w", "minus.r"):
        if k not in entries:
            raise ParseError(f"missing key {k}", 0, 0)

    def bound(k):
        val, ln, col = entries[k]
        s = val.strip()
        if s in ("-inf", "+inf", "inf"):
            return -INF if s == "-inf" else INF
        lx = _Lexer(val, ln, col)
        v = _parse_num(lx, params)
        if not lx.done():
            lx.err("trailing input")
        return v

    plus = {}
    exprs = {}
    for side in ("plus", "minus"):
        for kind in ("w", "r"):
            val, ln, col = entries[f"{side}.{kind}"]
            lx = _Lexer(val, ln, col)
            e = _parse_expr(lx, params, side, kind, plus)
            exprs[(side, kind)] = e
            if side == "plus":
                plus[kind] = e
    nm = entries["name"][0].strip() if "name" in entries else name
    return ProblemSpec(bound("interval.b_minus"), bound("interval.b_plus"),
                       exprs[("plus", "w")], exprs[("plus", "r")],
                       exprs[("minus", "w")], exprs[("minus", "r")], name=nm,
                       meta={"params": params})


def load_problem(path, params=None):
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), params, name=str(path))

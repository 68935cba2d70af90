"""Finite-sample tests for slow variation, regular variation and positive increase.

A function near its regime point is held as ln|f| against a depth
coordinate v that grows toward the regime point:

    zero_plus / zero_minus       v = -ln|x|
    plus_infinity / minus_inf    v =  ln|x|

Infinity regimes are reduced to 0+ through x -> 1/g(1/x), so every detector
reads ratios  f(lam x)/f(x) = exp(s * [lnf(v + d) - lnf(v)]),  d = ln(1/lam),
with s = +1 at zero and s = -1 at infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad

REGIMES = ("zero_plus", "zero_minus", "plus_infinity", "minus_infinity")


class PreconditionError(ValueError):
    pass


def _s(regime):
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    return 1.0 if regime.startswith("zero") else -1.0


def _x_of_depth(regime, v):
    v = np.asarray(v, dtype=float)
    if regime == "zero_plus":
        return np.exp(-v)
    if regime == "zero_minus":
        return -np.exp(-v)
    if regime == "plus_infinity":
        return np.exp(v)
    return -np.exp(v)


class Handle:
    """Positive function near a regime point, stored through its logarithm."""

    def __init__(self, regime="zero_plus", lnf=None, ln_ratio=None, lnf_u=None, dlnf=None,
                 v_max=600.0, name="", log_capable=None, fn=None, dfn=None, u_max=None):
        _s(regime)
        if lnf is None and lnf_u is None:
            raise ValueError("need lnf or lnf_u")
        self.regime = regime
        self._lnf = lnf
        self._ratio = ln_ratio
        self.lnf_u = lnf_u
        self.dlnf = dlnf
        self.v_max = v_max
        self.u_max = u_max if u_max is not None else (math.log(v_max) if v_max > 1 else None)
        self.name = name
        self.fn = fn
        self.dfn = dfn
        self.log_capable = (fn is None) if log_capable is None else log_capable

    @classmethod
    def from_callable(cls, f, regime="zero_plus", df=None, name=""):
        """Wrap a plain positive (or sign-definite) callable of x."""

        def lnf(v):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return np.log(np.abs(f(_x_of_depth(regime, v))))

        return cls(regime, lnf=lnf, v_max=700.0, name=name, fn=f, dfn=df, log_capable=False)

    @classmethod
    def from_expr(cls, expr, regime="zero_plus", name=""):
        """A coefficient expression near 0+ or +inf, through its closed-form log."""
        stable = getattr(expr, "ln_depth_ratio", None)
        ratio = None
        if regime == "zero_plus":
            lnf = expr.ln_depth
            ratio = stable
        elif regime == "plus_infinity":
            lnf = lambda v: expr.ln_depth(-np.asarray(v, dtype=float))
        else:
            raise ValueError("expressions live on the positive half line")
        return cls(regime, lnf=lnf, ln_ratio=ratio, v_max=1e8 if regime == "zero_plus" else 600.0,
                   name=name or getattr(expr, "describe", lambda: "")(), log_capable=True)

    def lnf(self, v):
        if self._lnf is not None:
            return self._lnf(v)
        return self.lnf_u(np.log(np.asarray(v, dtype=float)))

    def ratio(self, v, d):
        """lnf(v + d) - lnf(v), computed stably when the handle knows how."""
        if self._ratio is not None:
            return np.asarray(self._ratio(v, d), dtype=float)
        v, d = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(d, dtype=float))
        return np.asarray(self.lnf(v + d), dtype=float) - np.asarray(self.lnf(v), dtype=float)

    def reflected(self):
        """Mirror a left-hand regime onto the matching right-hand one."""
        target = {"zero_minus": "zero_plus", "minus_infinity": "plus_infinity"}.get(self.regime, self.regime)
        h = Handle(target, lnf=self._lnf, ln_ratio=self._ratio, lnf_u=self.lnf_u, dlnf=self.dlnf,
                   v_max=self.v_max, name=self.name, log_capable=self.log_capable, u_max=self.u_max)
        if self.fn is not None:
            g = self.fn
            h.fn = lambda x: -g(-x)
        return h


@dataclass(frozen=True)
class GridPolicy:
    x0: float | None = None
    q: float | None = None
    depth: int = 60
    lambdas: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    mode: str = "auto"

    def depths(self, handle, reserve=0.0):
        mode = self.mode
        if mode == "auto":
            mode = "doubly" if handle.log_capable else "geometric"
        zero = handle.regime.startswith("zero")
        if mode == "geometric":
            q = self.q if self.q is not None else (0.5 if zero else 2.0)
            x0 = self.x0 if self.x0 is not None else (0.5 if zero else math.e)
            v0 = abs(math.log(abs(x0)))
            v = v0 + abs(math.log(q)) * np.arange(self.depth)
        elif mode == "doubly":
            q = self.q if self.q is not None else (0.5 if zero else 2.0)
            factor = 1.0 / q if q < 1 else q
            v0 = abs(math.log(abs(self.x0))) if self.x0 is not None else 1.0
            v = v0 * factor ** np.arange(self.depth)
        else:
            raise ValueError(f"unknown grid mode {mode!r}")
        v = v[v + reserve <= handle.v_max]
        if v.size < 8:
            raise PreconditionError("grid too short for this handle")
        return v


@dataclass
class TriVerdict:
    status: str
    evidence: dict = field(default_factory=dict)
    trend: float | None = None
    note: str = ""

    def __post_init__(self):
        if self.status not in ("holds", "fails", "inconclusive"):
            raise ValueError(self.status)

    @property
    def holds(self):
        return self.status == "holds"

    @property
    def fails(self):
        return self.status == "fails"

    def as_dict(self):
        return {"status": self.status, "trend": self.trend, "note": self.note}


@dataclass
class EquivalenceWitness:
    coord: str
    points: np.ndarray
    ratios: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.size == 0 or np.any(np.diff(p) <= 0):
            raise ValueError("witness points must be strictly increasing")


def _windows(n):
    k = max(4, n // 4)
    return slice(n - k, n), slice(n - 2 * k, n - k), slice(n // 2, n)


def log_slope(t, y):
    """Least squares slope of ln y against ln t (zeros floored)."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    y = np.maximum(y, 1e-300)
    if t.size < 2:
        return 0.0
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


# ------------------------------------------------------------ detectors

def is_slowly_varying(fn: Handle, regime=None, policy=GridPolicy()):
    regime = regime or fn.regime
    s = _s(regime)
    lams = np.asarray(policy.lambdas, dtype=float)
    d = np.log(1.0 / lams)
    try:
        v = policy.depths(fn, reserve=float(d.max()))
        with np.errstate(all="ignore"):
            dev = np.abs(np.expm1(s * fn.ratio(v[:, None], d[None, :])))
    except Exception as exc:  # evaluation failure is a verdict, not a crash
        return TriVerdict("inconclusive", {}, None, f"evaluation failed: {exc}")
    if not np.all(np.isfinite(dev)):
        return TriVerdict("inconclusive", {"depth": v}, None, "non-finite ratios")
    M = dev.max(axis=1)
    fw, pw, half = _windows(v.size)
    trend = log_slope(v[half], M[half])
    ev = {"depth": v, "lambdas": lams, "deviation": dev, "max_deviation": M}
    final = float(M[fw].max())
    if final < 0.05 and (trend <= 0 or final < 1e-12):
        return TriVerdict("holds", ev, trend)
    stuck = (dev[fw].max(axis=0) >= 0.1) & (dev[fw].max(axis=0) >= 0.5 * dev[pw].max(axis=0))
    if stuck.any():
        return TriVerdict("fails", ev, trend, f"lambda={lams[np.argmax(stuck)]} ratio stays away from 1")
    return TriVerdict("inconclusive", ev, trend)


def is_positively_increasing(fn: Handle, regime=None, policy=GridPolicy(), margin=0.02):
    regime = regime or fn.regime
    s = _s(regime)
    lams = np.asarray(policy.lambdas, dtype=float)
    d = np.log(1.0 / lams)
    v = policy.depths(fn, reserve=float(d.max()))
    steps = np.diff(v)
    mono = s * fn.ratio(v[:-1], steps)
    if np.any(mono > 1e-10 * np.maximum(1.0, np.abs(np.asarray(fn.lnf(v[:-1]), dtype=float)))):
        raise PreconditionError("function is not nondecreasing on the grid")
    with np.errstate(all="ignore"):
        rho = np.exp(s * fn.ratio(v[:, None], d[None, :]))
    if not np.all(np.isfinite(rho)):
        return TriVerdict("inconclusive", {"depth": v}, None, "non-finite ratios")
    fw, pw, half = _windows(v.size)
    tail_max = rho[half].max(axis=0)
    best = int(np.argmin(tail_max))
    trend = log_slope(v[half], 1.0 - rho[half, best] + 1e-300)
    ev = {"depth": v, "lambdas": lams, "ratio": rho, "tail_max": tail_max}
    if tail_max[best] <= 1.0 - margin:
        return TriVerdict("holds", ev, trend, f"lambda={lams[best]} limsup estimate {tail_max[best]:.4g}")
    if np.all(tail_max >= 1.0 - margin / 4):
        return TriVerdict("fails", ev, trend, "tail ratios reach 1 for every lambda")
    return TriVerdict("inconclusive", ev, trend)


def rv_index_estimate(fn: Handle, gamma, policy=GridPolicy()):
    """Index estimate from L(v) = (1/(v^g f(v))) int_0^v s^(g-1) f(s) ds at 0+.

    In depth coordinates L(v) = int_0^inf exp(-g t + lnf(v+t) - lnf(v)) dt,
    which is free of underflow.  Raises DivergenceError when the inner
    integral does not exist.
    """
    if fn.regime != "zero_plus":
        raise ValueError("index estimation is done at 0+")
    v = policy.depths(fn, reserve=0.0)
    L = np.empty(v.size)
    for k, vk in enumerate(v):
        room = fn.v_max - vk

        def g(t, vk=vk):
            t = np.asarray(t, dtype=float)
            with np.errstate(all="ignore"):
                out = np.exp(-gamma * t + fn.ratio(np.full(t.shape, vk), t))
            return np.where(t <= room, out, 0.0)

        L[k] = _quad.tail(g, 0.0, rtol=1e-12)
    alpha = 1.0 / L - gamma
    fw, pw, half = _windows(v.size)
    est = float(np.mean(alpha[fw]))
    spread = float(np.ptp(alpha[fw]))
    trend = log_slope(v[half][1:], np.abs(np.diff(alpha[half])) + 1e-300)
    ev = {"depth": v, "L": L, "alpha": alpha}
    if spread <= 1e-3 * max(1.0, abs(est)):
        return est, TriVerdict("holds", ev, trend, f"L stabilises at {L[-1]:.12g}")
    return est, TriVerdict("inconclusive", ev, trend, "L still moving in the final window")


def stieltjes_condition_check(f, g=None, dg=None, alpha=0.0, policy=GridPolicy(), x0=0.5):
    """Checks of the improper Stieltjes integral of g df near 0+, via integration by parts.

    f, g, dg are vectorized callables of x > 0 (g defaults to the identity).
    """
    if g is None:
        g = lambda x: np.asarray(x, dtype=float)
        dg = lambda x: np.ones_like(np.asarray(x, dtype=float))
    elif dg is None:
        def dg(x):
            x = np.asarray(x, dtype=float)
            h = 1e-6 * x
            return (g(x + h) - g(x - h)) / (2 * h)
    q = policy.q if policy.q is not None else 0.5
    xs = (policy.x0 or x0) * q ** np.arange(policy.depth)
    target = alpha / (1.0 + alpha)
    S = np.empty(xs.size)
    fg = np.empty(xs.size)
    for k, x in enumerate(xs):
        integrand = lambda u: f(np.exp(-u)) * dg(np.exp(-u)) * np.exp(-u)
        try:
            I = _quad.tail(integrand, -math.log(x), rtol=1e-13)
        except _quad.DivergenceError:
            return TriVerdict("fails", {"x": xs[:k]}, None, "Stieltjes integral does not exist")
        fg[k] = float(f(np.array(x)) * g(np.array(x)))
        S[k] = 1.0 - I / fg[k]
    dev = np.abs(S - target)
    fw, pw, half = _windows(xs.size)
    trend = log_slope(1.0 / xs[half], dev[half] + 1e-300)
    fg_trend = log_slope(1.0 / xs[half], fg[half])
    ev = {"x": xs, "S": S, "fg": fg, "target": target, "limit_estimate": float(S[-1])}
    fg_ok = fg[-1] < fg[0] and fg_trend < 0
    final = float(dev[fw].max())
    if final < 0.05 and (trend <= 0 or final < 1e-9) and fg_ok:
        return TriVerdict("holds", ev, trend)
    if float(dev[fw].min()) >= 0.1 and not trend < -0.05:
        return TriVerdict("fails", ev, trend, "limit differs from alpha/(1+alpha)")
    if not fg_ok and fg_trend > 0.05:
        return TriVerdict("fails", ev, trend, "f g does not tend to 0")
    return TriVerdict("inconclusive", ev, trend)


def karamata_rep_check(fn: Handle, regime=None, policy=GridPolicy()):
    """eps(x) = x f'(x)/f(x) along the grid; normalized slow variation when eps -> 0."""
    regime = regime or fn.regime
    v = policy.depths(fn, reserve=1.0)
    sgn_dir = -1.0 if regime.startswith("zero") else 1.0
    if fn.fn is not None:
        x = _x_of_depth(regime, v)
        fx = fn.fn(x)
        if fn.dfn is not None:
            eps = x * fn.dfn(x) / fx
        else:
            # relative step keeps x - h on the right side of 0
            h = np.maximum(1e-6, 1e-6 * np.abs(x)) if not regime.startswith("zero") else 1e-6 * np.abs(x)
            eps = x * (fn.fn(x + h) - fn.fn(x - h)) / (2 * h * fx)
    elif fn.dlnf is not None:
        eps = sgn_dir * np.asarray(fn.dlnf(v), dtype=float)
    else:
        h = np.maximum(1e-6, 1e-6 * v)
        eps = sgn_dir * (fn.ratio(v, h) - fn.ratio(v, -h)) / (2 * h)
    eps = np.asarray(eps, dtype=float)
    if not np.all(np.isfinite(eps)):
        return TriVerdict("inconclusive", {"depth": v, "eps": eps}, None, "derivative evaluation failed")
    fw, pw, half = _windows(v.size)
    trend = log_slope(v[half], eps[half])
    ev = {"depth": v, "eps": eps}
    final = float(np.abs(eps[fw]).max())
    if final < 0.05 and (trend <= 0 or final < 1e-12):
        return TriVerdict("holds", ev, trend)
    if float(np.abs(eps[fw]).min()) >= 0.1 or (final >= 0.1 and trend > -0.05):
        return TriVerdict("fails", ev, trend)
    return TriVerdict("inconclusive", ev, trend)


def seq_equivalence_search(f: Handle, g: Handle, regime="plus_infinity", n=4000, tol=1e-9):
    """Look for points running off to the regime point where f/g is within tol of 1."""
    from scipy.optimize import brentq

    if f.lnf_u is not None and g.lnf_u is not None:
        coord = "loglog"
        hi = min(f.u_max, g.u_max)
        lo = 1.0
        h = lambda t: np.asarray(f.lnf_u(t), dtype=float) - np.asarray(g.lnf_u(t), dtype=float)
    else:
        coord = "log"
        hi = min(f.v_max, g.v_max)
        lo = 1.0
        h = lambda t: np.asarray(f.lnf(t), dtype=float) - np.asarray(g.lnf(t), dtype=float)
    t = np.linspace(lo, hi, n)
    with np.errstate(all="ignore"):
        ht = h(t)
    ok = np.isfinite(ht)
    if not ok.all():
        # plain callables overflow long before the nominal range ends
        stop = int(np.argmin(ok)) if ok[0] else 0
        if stop < 8:
            return None
        t, ht = t[:stop], ht[:stop]
        hi = float(t[-1])
    found = []
    close = np.abs(np.expm1(ht)) <= tol
    for k in np.nonzero(close)[0]:
        found.append(float(t[k]))
    sc = np.nonzero((np.sign(ht[:-1]) * np.sign(ht[1:]) < 0) & ~close[:-1] & ~close[1:])[0]
    for k in sc:
        root = brentq(lambda s: float(h(np.array(s))), t[k], t[k + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
        if abs(math.expm1(float(h(np.array(root))))) <= tol:
            found.append(root)
    if len(found) < 3:
        return None
    pts = np.unique(np.array(found))
    if pts[-1] < lo + 0.9 * (hi - lo):
        return None
    ratios = np.exp(h(pts))
    return EquivalenceWitness(coord, pts, ratios)


def inverse_equivalence_check(f: Handle, g: Handle, witness, index):
    """Invert f and g at y_n = f(x_n) and check f^-1(y_n)/g^-1(y_n) -> 1."""
    from .coeffs import invert_monotone, NoBracketError

    if witness is None:
        raise PreconditionError("no equivalence witness: the premise f ~~ g is not established")
    if index == 0:
        raise PreconditionError("the index of f must be nonzero")
    if witness.coord != "log":
        raise PreconditionError("inverse check needs witness points in log coordinates")
    lnf = lambda v: float(f.lnf(np.array(v)))
    lng = lambda v: float(g.lnf(np.array(v)))
    pts = witness.points
    lnr = []
    try:
        for v in pts:
            Y = lnf(v)
            vf = invert_monotone(lnf, Y, max(v - 1.0, 1e-3), v + 1.0, tol=1e-15)
            vg = invert_monotone(lng, Y, max(v - 1.0, 1e-3), v + 1.0, tol=1e-15)
            lnr.append(vf - vg)
    except NoBracketError as exc:
        return TriVerdict("inconclusive", {}, None, f"inversion failed: {exc}")
    lnr = np.array(lnr)
    dev = np.abs(np.expm1(lnr))
    fw, pw, half = _windows(pts.size)
    trend = log_slope(pts[half], dev[half] + 1e-300)
    fwd = np.abs(np.expm1(np.array([lnf(v) - lng(v) for v in pts])))
    ev = {"points": pts, "inverse_ratio": np.exp(lnr),
          "forward_reciprocal_bounded": _reciprocal_bounded(fwd),
          "inverse_reciprocal_bounded": _reciprocal_bounded(dev)}
    ev["reciprocal_equivalence_consistent"] = (ev["forward_reciprocal_bounded"]
                                               == ev["inverse_reciprocal_bounded"])
    if float(dev[fw].max()) <= 1e-6:
        return TriVerdict("holds", ev, trend)
    if float(dev[fw].min()) >= 0.05 and trend > -0.05:
        return TriVerdict("fails", ev, trend)
    return TriVerdict("inconclusive", ev, trend)


def _reciprocal_bounded(dev):
    """Finite-sample reading of (ratio - 1)^-1 = O(1) along a sequence."""
    with np.errstate(divide="ignore"):
        recip = np.where(dev > 0, 1.0 / dev, np.inf)
    if not np.all(np.isfinite(recip)):
        return False
    head = recip[: max(1, recip.size // 4)]
    return bool(recip[-max(1, recip.size // 4):].max() <= 10 * np.median(head))


# ------------------------------------------------------------ catalog functions

def staircase_phi(x):
    """Piecewise-linear phi: value n(n+1)/2 on [n^2, n^2+n], slope 1 in between."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    for idx in np.ndindex(x.shape):
        out[idx] = _staircase_scalar(float(x[idx]))
    return out


def _staircase_scalar(x):
    if x <= 0:
        return 0.0
    n = math.isqrt(int(math.floor(x)))
    # piece n covers (n^2 - n, n^2 + n]
    while n * n + n < x:
        n += 1
    while n > 1 and x <= n * n - n:
        n -= 1
    return n * (n + 1) / 2 + min(0.0, x - n * n)


def _staircase_increment(v, c):
    """phi(v + c) - phi(v) exactly for integer-valued v up to 2^52 and moderate c."""
    n = math.isqrt(int(v))
    total = 0.0
    for m in range(max(1, n - 1), n + 3):
        lo, hi = m * m - m, m * m          # ramp (slope 1) on (m^2 - m, m^2)
        a = max(lo - v, 0.0)
        b = min(hi - v, c)
        if b > a:
            total += b - a
    return total


def staircase_handle():
    """f(x) = exp(phi(ln x)) at +inf."""

    def ratio(v, d):
        v, d = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(d, dtype=float))
        out = np.empty(v.shape)
        for idx in np.ndindex(v.shape):
            vv, dd = float(v[idx]), float(d[idx])
            if dd >= 0:
                out[idx] = _staircase_increment(vv, dd)
            else:
                out[idx] = -_staircase_increment(vv + dd, -dd)
        return out

    return Handle("plus_infinity", lnf=staircase_phi, ln_ratio=ratio, v_max=2.0 ** 50, name="staircase",
                  log_capable=True)


def loglog_cosine_handle():
    """exp((ln2 x) cos(ln2 x)) at +inf, in depth v = ln x."""

    def lnf(v):
        s = np.log(np.asarray(v, dtype=float))
        return s * np.cos(s)

    def ratio(v, d):
        v, d = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(d, dtype=float))
        s = np.log(v)
        ds = np.log1p(d / v)
        return -2.0 * s * np.sin(s + 0.5 * ds) * np.sin(0.5 * ds) + ds * np.cos(s + ds)

    def dlnf(v):
        v = np.asarray(v, dtype=float)
        s = np.log(v)
        return (np.cos(s) - s * np.sin(s)) / v

    return Handle("plus_infinity", lnf=lnf, ln_ratio=ratio, dlnf=dlnf, v_max=1e300,
                  name="loglog_cosine", log_capable=True)


def loglog_sine_pair():
    """The pair exp(ln2 x + sin ln2 x), exp(ln2 x - sin ln2 x) in u = ln ln x."""
    u_max = 51 * math.pi
    f = Handle("plus_infinity", lnf_u=sine_up, u_max=u_max,
               v_max=math.exp(u_max), name="loglog_sine_up", log_capable=True)
    g = Handle("plus_infinity", lnf_u=sine_down, u_max=u_max,
               v_max=math.exp(u_max), name="loglog_sine_down", log_capable=True)
    return f, g


def sine_up(u):
    return np.asarray(u, dtype=float) + np.sin(u)


def sine_down(u):
    return np.asarray(u, dtype=float) - np.sin(u)


def neglog_inv_handle():
    """1/(-ln x) at 0+."""
    return Handle("zero_plus", lnf=lambda v: -np.log(np.asarray(v, dtype=float)),
                  ln_ratio=lambda v, d: -np.log1p(np.asarray(d, dtype=float) / np.asarray(v, dtype=float)),
                  dlnf=lambda v: -1.0 / np.asarray(v, dtype=float), v_max=1e8, name="neglog_inv",
                  log_capable=True)


def ln_handle():
    """ln x at +inf."""
    return Handle("plus_infinity", lnf=lambda v: np.log(np.asarray(v, dtype=float)),
                  ln_ratio=lambda v, d: np.log1p(np.asarray(d, dtype=float) / np.asarray(v, dtype=float)),
                  dlnf=lambda v: 1.0 / np.asarray(v, dtype=float), v_max=1e8, name="ln", log_capable=True)

"""Panel quadrature for integrands that blow up (integrably) at one end.

Everything here works on vectorized callables.  The tail integrals use a
log substitution so that singular-but-integrable endpoints become smooth
decaying integrands on a half line.
"""
import math

import numpy as np

_X20, _W20 = np.polynomial.legendre.leggauss(20)
_X10, _W10 = np.polynomial.legendre.leggauss(10)

LN2 = math.log(2.0)


class DivergenceError(ArithmeticError):
    """Raised when a tail integral does not settle."""


def _rule(g, a, b, x, w):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(g(pts), dtype=float)
    return half * (vals @ w)


def panels(g, edges, rtol=1e-12, atol=0.0, max_depth=18):
    """Per-panel integrals over consecutive edges, refined where 20 and 10 point rules disagree."""
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    if a.size == 0:
        return np.zeros(0)
    if atol == 0.0:
        first = _rule(g, a, b, _X20, _W20)
        atol = 1e-3 * rtol * float(np.sum(np.abs(first[np.isfinite(first)])))
    return _independent(g, a, b, rtol, atol, 0, max_depth)


def _pairs(g, a, m, b, rtol, atol, depth, max_depth):
    return (_independent(g, a, m, rtol, atol, depth, max_depth)
            + _independent(g, m, b, rtol, atol, depth, max_depth))


def _independent(g, a, b, rtol, atol, depth, max_depth):
    hi = _rule(g, a, b, _X20, _W20)
    lo = _rule(g, a, b, _X10, _W10)
    if not np.all(np.isfinite(hi)):
        raise DivergenceError("non-finite integrand on panel")
    bad = np.abs(hi - lo) > np.maximum(rtol * np.abs(hi), atol)
    if bad.any() and depth < max_depth:
        ab, bb = a[bad], b[bad]
        hi[bad] = _pairs(g, ab, 0.5 * (ab + bb), bb, rtol, atol, depth + 1, max_depth)
    return hi


def integrate(g, a, b, n=8, rtol=1e-12):
    """Plain adaptive integral over a bounded interval with a smooth integrand."""
    if b == a:
        return 0.0
    return float(np.sum(panels(g, np.linspace(a, b, n + 1), rtol)))


def integrate_geometric(g, s_lo, s_hi, rtol=1e-12):
    """Integral over [s_lo, s_hi] (0 < s_lo) with panels graded geometrically toward s_lo."""
    if s_hi <= s_lo:
        return 0.0
    k = max(1, int(math.ceil(math.log2(s_hi / s_lo))))
    edges = np.geomspace(s_lo, s_hi, k + 1)
    return float(np.sum(panels(g, edges, rtol)))


def tail(g, u0, rtol=1e-12, uniform=60, max_panels=200, with_trace=False):
    """Integral of a decaying integrand g over [u0, inf).

    The first `uniform` panels have width ln 2 (the images of geometric
    panels x_k = x0 / 2^k under u = -ln x); after that panels double in
    length.  Once successive panel contributions shrink by a stable factor
    the remaining tail is summed as a geometric series.
    """
    edges = u0 + LN2 * np.arange(uniform + 1)
    contrib = list(panels(g, edges, rtol))
    total = float(np.sum(contrib))
    lo = float(edges[-1])
    width = max(LN2, abs(lo))
    ratios = []
    estimate = None
    while True:
        if len(contrib) >= max_panels:
            raise DivergenceError("tail integral not settled within panel cap")
        hi = lo + width
        if not math.isfinite(hi):
            raise DivergenceError("tail integral ran out of range")
        c = float(panels(g, [lo, hi], rtol)[0])
        contrib.append(c)
        total += c
        lo, width = hi, 2.0 * width
        if c == 0.0 or abs(c) <= 1e-18 * abs(total):
            estimate = total
            break
        prev = contrib[-2]
        if prev == 0.0:
            continue
        rho = c / prev
        ratios.append(rho)
        if 0.0 < rho < 0.97:
            new = total + c * rho / (1.0 - rho)
            if estimate is not None and abs(new - estimate) <= 10 * rtol * abs(new):
                estimate = new
                break
            estimate = new
        else:
            estimate = None
        if len(ratios) >= 40 and all(r > 0.97 for r in ratios[-5:]):
            raise DivergenceError("tail contributions do not decay")
    total = estimate
    if with_trace:
        return total, np.array(contrib)
    return total


def doubling_tail(g, x0, rtol=1e-12, max_panels=200):
    """Integral of g over [x0, inf) on panels [x0 2^k, x0 2^(k+1)]."""
    if x0 <= 0:
        raise ValueError("doubling panels need a positive start")

    def h(u):
        with np.errstate(over="ignore"):
            x = np.exp(u)
        return g(x) * x

    return tail(h, math.log(x0), rtol=rtol, max_panels=max_panels)

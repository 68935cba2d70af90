"""Fundamental solutions and Neumann m-functions of the half problems.

Each side is a plus-type half problem on (0, L) (the minus side is
reflected), so one solver serves both.  For the reflected minus side the
plus-type m equals the minus-side m-function at the same z.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad, _rk
from .coeffs import (INF, DivergenceError, HalfProblem, HalfProfile, NoBracketError, antiderivative,
                     invert_monotone, side_sign)


class ConvergenceError(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial or []


class NotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    delta: float | None = None
    max_steps: int = 200000
    # localisation depth (e-folds of the decaying solution) for the cut point
    e_star: float = 20.0
    lp_tol: float = 1e-8
    lp_kmax: int = 40
    transfer_tol: float = 1e-14


@dataclass
class StateVec:
    value: complex
    quasi_derivative: complex
    log_scale: float = 0.0

    def true(self):
        s = math.exp(self.log_scale)
        return self.value * s, self.quasi_derivative * s


@dataclass
class MSample:
    y: float
    m: complex
    truncation: float
    disk_radius: float | None = None
    wronskian_drift: float | None = None
    converged: bool = True
    cap: str = "neumann"
    z: complex | None = None
    note: str = ""
    error: str = ""

    @property
    def ok(self):
        return not self.error


@dataclass
class MTrace:
    side: str
    samples: list = field(default_factory=list)

    @property
    def y(self):
        return np.array([s.y for s in self.samples])

    @property
    def m(self):
        return np.array([s.m for s in self.samples])

    def violations(self):
        out = []
        for s in self.samples:
            if s.error:
                out.append((s.y, s.error))
            elif not (s.m.imag > 0 and s.m.real > 0):
                out.append((s.y, "Nevanlinna/Stieltjes sign violated"))
        return out


# ------------------------------------------------------------ half solver

_SOLVERS = {}


def solver_for(half: HalfProblem):
    key = id(half.w), id(half.r), half.L
    s = _SOLVERS.get(key)
    if s is None or s.h is not half and (s.h.w is not half.w or s.h.r is not half.r):
        s = _HalfSolver(half)
        _SOLVERS[key] = s
    return s


class _HalfSolver:
    def __init__(self, half: HalfProblem):
        self.h = half
        self.w = half.w.scalar()
        self.r = half.r.scalar()
        self.L = half.L
        self.w_int = half.w.integrable_at(half.L)
        self.r_int = half.r.integrable_at(half.L)
        self.regular = self.w_int and self.r_int
        self._lam = None
        self._ends = {}

    # accumulated integrals near 0
    def lnRW(self, u):
        return float(self.h.r.ln_prim_depth(u)) + float(self.h.w.ln_prim_depth(u))

    def start_point(self, z, tol):
        """delta with |z| W(delta) R(delta) <= tol, and the transfer data there."""
        target = math.log(tol / max(abs(z), 1e-300))
        lo = 1.0 if self.L >= 1 else -math.log(self.L) + 1.0
        if self.lnRW(lo) <= target:
            u = lo
        else:
            u = invert_monotone(lambda s: -self.lnRW(s), -target, lo, lo + 4.0, tol=1e-10)
            u += 1e-9 * max(1.0, u)
        delta = math.exp(-u)
        W = math.exp(float(self.h.w.ln_prim_depth(u)))
        R = math.exp(float(self.h.r.ln_prim_depth(u)))
        return delta, W, R

    def end_point(self, z, tol):
        """For a regular end with unbounded coefficients, back off by eta with |z| W_tail R_tail <= tol."""
        h = self.h
        if self.L == INF or not (h.w.unbounded_at(self.L) or h.r.unbounded_at(self.L)):
            return self.L, 0.0, 0.0
        eta = 0.25 * self.L
        for _ in range(200):
            Wt = h.W_tail(self.L - eta)
            Rt = h.R_tail(self.L - eta)
            if abs(z) * Wt * Rt <= tol:
                return self.L - eta, Wt, Rt
            eta *= 0.5
        raise ConvergenceError("could not back off from the regular endpoint")

    @staticmethod
    def transfer(z, f0, g0, W, R):
        A = 0.5 * W * R
        return f0 + g0 * R - z * f0 * A, g0 - z * f0 * W - z * g0 * A

    @staticmethod
    def untransfer(z, fd, gd, W, R):
        A = 0.5 * W * R
        a11, a12, a21, a22 = 1 - z * A, R, -z * W, 1 - z * A
        det = a11 * a22 - a12 * a21
        return (a22 * fd - a12 * gd) / det, (-a21 * fd + a11 * gd) / det

    # localisation
    def lam_table(self):
        if self._lam is None:
            h = self.h
            top = self.L * (1 - 1e-13) if self.L < INF else 1e150
            ts = np.geomspace(1e-250, top, 1500)
            lw = lambda u: 0.5 * (h.w.ln_depth(u) + h.r.ln_depth(u))
            g = lambda u: np.exp(lw(u) - u)
            head = _quad.tail(g, -math.log(ts[0]), rtol=1e-8)
            end = self.L
            reflect = end < INF and (h.w.unbounded_at(end) or h.r.unbounded_at(end))

            def sq(t):
                if not reflect:
                    return np.sqrt(h.w.evaluate(t) * h.r.evaluate(t))
                # near a finite singular end evaluate in the distance to it
                near = t > 0.5 * end
                tt = np.where(near, 0.25 * end, t)
                ss = np.where(near, end - t, 0.25 * end)
                return np.where(near, np.sqrt(h.w.eval_rev(ss, end) * h.r.eval_rev(ss, end)),
                                np.sqrt(h.w.evaluate(tt) * h.r.evaluate(tt)))
            pieces = _quad.panels(sq, ts, rtol=1e-8)
            lam = head + np.concatenate([[0.0], np.cumsum(pieces)])
            # the head may underflow for steep coefficients; -inf knots sit below any query
            with np.errstate(divide="ignore"):
                self._lam = (np.log(ts), np.log(lam))
        return self._lam

    def Lambda_inv(self, val):
        lt, ll = self.lam_table()
        if math.log(val) >= ll[-1]:
            return None
        return math.exp(float(np.interp(math.log(val), ll, lt)))

    def Lambda_end(self):
        lt, ll = self.lam_table()
        return math.exp(ll[-1])

    # shooting
    def from_zero(self, z, X, f0, g0, cfg, energy=False):
        delta, W, R = self.start_point(z, cfg.transfer_tol)
        if delta >= X:
            raise ConvergenceError("cut point inside the transfer layer")
        fd, gd = self.transfer(z, f0, g0, W, R)
        res = _rk.integrate(self.w, self.r, z, delta, X, fd, gd, cfg.rtol, cfg.atol,
                            h0=0.5 * delta, max_steps=cfg.max_steps, energy=energy)
        if energy:
            # |f|^2 w over (0, delta) is about |f0|^2 W(delta)
            res.energy += abs(f0) ** 2 * W * math.exp(-2 * res.lnscale)
        return res

    def to_zero(self, z, X, fX, gX, cfg):
        delta, W, R = self.start_point(z, cfg.transfer_tol)
        res = _rk.integrate(self.w, self.r, z, X, delta, fX, gX, cfg.rtol, cfg.atol,
                            h0=None, max_steps=cfg.max_steps)
        f0, g0 = self.untransfer(z, res.f, res.g, W, R)
        res.f, res.g = f0, g0
        return res

    def cut_for(self, z, mult=1.0):
        k = cmath.sqrt(-z).real
        if k <= 0:
            return None
        return self.Lambda_inv(mult * 20.0 / k) if mult else None

    def solve_at(self, z, X, cap, cfg, energy=True, end_data=(0.0, 0.0)):
        """m from a cut at X with the given cap, plus Wronskian drift and disk radius."""
        Wt, Rt = end_data
        if cap == "neumann":
            fX, gX = 1.0 + 0j, z * Wt + 0j
        else:
            fX, gX = -Rt + 0j, 1.0 + 0j
        psi = self.to_zero(z, X, fX, gX, cfg)
        if psi.g == 0:
            raise ConvergenceError("psi quasi-derivative vanished at 0")
        m = -psi.f / psi.g
        c = self.from_zero(z, X, 1.0 + 0j, 0j, cfg, energy=energy)
        wx = fX * c.g - gX * c.f
        w0 = -psi.g
        drift = abs(w0 / wx * math.exp(psi.lnscale - c.lnscale) - 1.0) if wx != 0 else math.inf
        radius = None
        if energy and z.imag != 0:
            lnE = math.log(c.energy) + 2 * c.lnscale if c.energy > 0 else -math.inf
            radius = math.exp(-lnE) / (2 * abs(z.imag)) if lnE > -math.inf else math.inf
        return m, drift, radius

    def m(self, z, cfg):
        z = complex(z)
        if z.imag == 0 and z.real >= 0:
            raise ValueError("m is evaluated off [0, inf)")
        X = self.cut_for(z)
        if X is not None and self.Lambda_end() > 1.5 * 20.0 / cmath.sqrt(-z).real:
            m, drift, rad = self.solve_at(z, X, "neumann", cfg)
            return MSample(z.imag, m, X, rad, drift, True, "neumann", z, "localised cut")
        if self.regular:
            Xe, Wt, Rt = self.end_point(z, cfg.transfer_tol)
            m, drift, rad = self.solve_at(z, Xe, "neumann", cfg, end_data=(Wt, Rt))
            return MSample(z.imag, m, self.L, rad, drift, True, "neumann", z, "exact endpoint")
        cap = "dirichlet" if (not self.w_int and self.r_int) else "neumann"
        trace = []
        prev = None
        for X in self.lp_cuts():
            m, drift, rad = self.solve_at(z, X, cap, cfg)
            trace.append((X, m, rad))
            if prev is not None and abs(m - prev) <= cfg.lp_tol * abs(m):
                return MSample(z.imag, m, X, rad, drift, True, cap, z, "truncation sequence")
            prev = m
        raise ConvergenceError("truncated m values did not settle", trace)

    def lp_cuts(self):
        """Cuts where W R passes 10^k, stopping where the cut is no longer representable."""
        h = self.h
        lo = 1.0 if self.L >= 1 else -math.log(self.L) + 1.0
        for k in range(1, 60):
            val = 10.0 ** k
            if self.L < INF:
                top = self.L * (1 - 1e-15)
                if _rw(h, top) < val:
                    return
                X = invert_monotone(lambda t: math.log(_rw(h, t)), math.log(val), 0.5 * self.L, top,
                                    tol=1e-12, expand=False)
            else:
                X = invert_monotone(lambda t: math.log(_rw(h, t)), math.log(val), 1.0, 2.0, tol=1e-12,
                                    limit=(0.0, 1e300))
            yield X


def _rw(h, t):
    return float(antiderivative(h.w, t)) * float(antiderivative(h.r, t))


# ------------------------------------------------------------ public operations

def integrate_system(problem, side, z, x_from, x_to, init: StateVec, cfg=IntegratorConfig()):
    """State at x_to of the side equation (plus-type coordinates |x| on the minus side)."""
    h = problem.half(side)
    s = solver_for(h)
    a, b = abs(x_from), abs(x_to)
    f0, g0 = init.true()
    if a == 0:
        res = s.from_zero(complex(z), b, complex(f0), complex(g0), cfg)
    elif b == 0:
        res = s.to_zero(complex(z), a, complex(f0), complex(g0), cfg)
    else:
        res = _rk.integrate(s.w, s.r, complex(z), a, b, complex(f0), complex(g0), cfg.rtol, cfg.atol,
                            max_steps=cfg.max_steps)
    return StateVec(res.f, res.g, res.lnscale)


def fundamental_solutions(problem, side, z, x_eval, cfg=IntegratorConfig()):
    """(s, c) at x_eval with s(0)=0, s'(0)=1 and c(0)=1, c'(0)=0."""
    if x_eval == 0:
        return StateVec(0j, 1 + 0j), StateVec(1 + 0j, 0j)
    sv = integrate_system(problem, side, z, 0.0, x_eval, StateVec(0j, 1 + 0j), cfg)
    cv = integrate_system(problem, side, z, 0.0, x_eval, StateVec(1 + 0j, 0j), cfg)
    return sv, cv


def m_function(problem, side, z, cfg=IntegratorConfig()):
    """Neumann m-function of one side at z (not in [0, inf))."""
    return solver_for(problem.half(side)).m(z, cfg)


def m_trace(problem, side, y_grid, cfg=IntegratorConfig(), conj=False):
    ys = np.asarray(y_grid, dtype=float)
    if np.any(ys <= 0) or np.any(np.diff(ys) <= 0):
        raise ValueError("y grid must be positive and increasing")
    tr = MTrace("+" if side_sign(side) > 0 else "-")
    s = solver_for(problem.half(side))
    for y in ys:
        z = complex(0.0, -y if conj else y)
        try:
            tr.samples.append(s.m(z, cfg))
        except (ConvergenceError, _rk.StepLimitError, NoBracketError, DivergenceError) as exc:
            tr.samples.append(MSample(float(y), complex("nan"), math.nan, None, None, False,
                                      "", z, "", str(exc)))
    return tr


def atkinson_predict(profile, y):
    """i f+(y) on the plus side, -i f-(y) = i |f-(y)| on the minus side."""
    fy = profile.f(y)
    return 1j * fy if profile.side == "+" else -1j * fy


def duality_check(problem, side, z, cfg=IntegratorConfig()):
    """|m_dual(z) + 1/(z m(z))| / |m_dual(z)| for the coefficient-swapped side."""
    h = problem.half(side)
    if h.w.integrable_at(h.L) and h.r.integrable_at(h.L):
        raise NotApplicable("duality needs a singular endpoint")
    m = solver_for(h).m(z, cfg).m
    md = solver_for(_swapped(h)).m(z, cfg).m
    return abs(md + 1.0 / (z * m)) / abs(md)


_SWAPS = {}


def _swapped(h):
    key = (id(h.w), id(h.r), h.L)
    if key not in _SWAPS:
        _SWAPS[key] = h.swapped()
    return _SWAPS[key]


def weyl_disk_probe(half: HalfProblem, z=2j, threshold=1e-6, kmax=None, cfg=IntegratorConfig()):
    """Radii 1/(2|Im z| int_0^X |c|^2 w) along cuts doubling toward the endpoint."""
    s = solver_for(half)
    L = half.L
    if L == INF:
        cuts = [2.0 ** k for k in range(0, kmax or 60)]
    else:
        cuts = [L - 0.5 * L * 2.0 ** -k for k in range(0, kmax or 52)]
        cuts = [c for c in cuts if c < L]
    delta, W, R = s.start_point(z, cfg.transfer_tol)
    f, g = s.transfer(z, 1 + 0j, 0j, W, R)
    x = delta
    lnscale = 0.0
    energy = W  # |c|^2 w over (0, delta), c ~ 1 there
    trace = []
    radius = math.inf
    for X in cuts:
        if X <= x:
            continue
        res = _rk.integrate(s.w, s.r, z, x, X, f, g, cfg.rtol, cfg.atol, energy=True,
                            max_steps=cfg.max_steps)
        energy = energy * math.exp(-2 * res.lnscale) + res.energy
        lnscale += res.lnscale
        f, g, x = res.f, res.g, X
        lnE = math.log(energy) + 2 * lnscale
        radius = math.exp(-lnE) / (2 * abs(z.imag))
        trace.append((X, radius))
        if radius < 0.1 * threshold:
            break
    return radius, trace


def liouville_length(half: HalfProblem):
    return solver_for(half).Lambda_end()

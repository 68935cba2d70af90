"""Shooting eigensolver for the coupled indefinite problem, kernel and Jordan
chain analysis at 0, and a finite-difference determinant oracle.

On x > 0 the equation is -(u'/r)' = lam w u; on x < 0, in the reflected
variable t = -x, it is -(u'/r)' = -lam w u with the positive plus-type
weight of the minus half.  Eigenfunctions are shot from both endpoints
(Neumann data, u^[1] = 0) towards 0 and the matching mismatch
D = -(u+ u-^[1] + u+^[1] u-) at 0 (reflected quasi-derivative) is scanned
for sign changes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import _quad, _rk
from .coeffs import INF, DivergenceError, HalfProblem, antiderivative, integrability, invert_monotone, tail_integral
from .weyl import ConvergenceError, NotApplicable, solver_for


@dataclass(frozen=True)
class EigenConfig:
    rtol: float = 1e-11
    scan_rtol: float = 1e-8
    atol: float = 1e-14
    transfer_tol: float = 1e-14
    max_steps: int = 400000
    panels: int = 400
    tol: float = 1e-6
    force_truncate: bool = False
    truncate_frac: float = 1e-4
    truncate_inf: float = 100.0
    kernel_tol: float = 1e-12


@dataclass
class CharSample:
    lam: float
    D: float
    approximate: bool = False


@dataclass
class Eigenvalue:
    lam: float
    residual: float
    sign_class: str
    multiplicity_note: str = "simple"
    krein_norm: float | None = None


@dataclass
class JordanReport:
    kernel_dim: int
    chain_length: int
    kernel_sum: float | None = None
    x: np.ndarray | None = None
    g: np.ndarray | None = None
    residual: float | None = None
    note: str = ""

    def as_dict(self):
        return {"kernel_dim": self.kernel_dim, "chain_length": self.chain_length, "kernel_sum": self.kernel_sum,
                "residual": self.residual, "note": self.note}


@dataclass
class SpectrumReport:
    eigenvalues: list
    window: tuple
    warnings: list = field(default_factory=list)
    kernel: JordanReport | None = None
    approximate: bool = False
    oracle: list = field(default_factory=list)

    @property
    def positive(self):
        return [e for e in self.eigenvalues if e.sign_class == "positive"]

    @property
    def negative(self):
        return [e for e in self.eigenvalues if e.sign_class == "negative"]

    @property
    def counts(self):
        return {"positive": len(self.positive), "negative": len(self.negative),
                "zero": sum(e.sign_class == "zero" for e in self.eigenvalues)}

    def rows(self):
        """CSV rows: index, lam, residual, sign_class, oracle_lam, oracle_diff."""
        out = []
        for i, e in enumerate(self.eigenvalues):
            o = self.oracle[i] if i < len(self.oracle) else None
            diff = None if o is None else abs(o - e.lam) / max(abs(e.lam), 1e-300)
            out.append((i, e.lam, e.residual, e.sign_class, o, diff))
        return out


# ------------------------------------------------------------ shots

def _end_state(half: HalfProblem, z, cfg):
    """Cut point, Neumann state there and whether the end is truncated."""
    wi, ri = integrability(half)
    s = solver_for(half)
    if wi and ri:
        X, Wt, _ = s.end_point(z, cfg.transfer_tol)
        return X, 1.0 + 0j, z * Wt + 0j, False
    if not cfg.force_truncate:
        raise NotApplicable("singular endpoint: eigenvalues need force_truncate")
    X = half.L * (1 - cfg.truncate_frac) if half.L < INF else cfg.truncate_inf
    return X, 1.0 + 0j, 0j, True


def _shoot(half: HalfProblem, z, cfg, energy=False):
    """Neumann solution from the endpoint to 0: (f0, g0, lnscale, energy, truncated)."""
    s = solver_for(half)
    X, fX, gX, trunc = _end_state(half, z, cfg)
    delta, W, R = s.start_point(z if z != 0 else 1.0, cfg.transfer_tol)
    res = _rk.integrate(s.w, s.r, z, X, delta, fX, gX, cfg.rtol, cfg.atol, max_steps=cfg.max_steps,
                        energy=energy)
    f0, g0 = s.untransfer(z, res.f, res.g, W, R)
    E = res.energy + abs(f0) ** 2 * W if energy else 0.0
    return f0, g0, res.lnscale, E, trunc


def char_function(problem, lam, cfg=EigenConfig(), mode="coupled"):
    """Normalised matching mismatch at 0 (its zeros are the eigenvalues).

    mode 'coupled' is the full problem; '+' and '-' give the decoupled
    Neumann problems of one side (zeros of u^[1](0)).
    """
    lam = float(lam)
    if mode in ("+", "-"):
        z = lam if mode == "+" else -lam
        f0, g0, _, _, tr = _shoot(problem.half(mode), complex(z), cfg)
        return CharSample(lam, float((g0 / math.hypot(abs(f0), abs(g0))).real), tr)
    fp, gp, _, _, tp = _shoot(problem.half("+"), complex(lam), cfg)
    fm, gm, _, _, tm = _shoot(problem.half("-"), complex(-lam), cfg)
    D = -(fp * gm + gp * fm)
    norm = math.hypot(abs(fp), abs(gp)) * math.hypot(abs(fm), abs(gm))
    return CharSample(lam, float((D / norm).real), tp or tm)


def krein_norm(problem, lam, cfg=EigenConfig()):
    """[f, f]_w / int |w| f^2 for the glued eigenfunction at lam."""
    fp, gp, sp, Ep, _ = _shoot(problem.half("+"), complex(lam), cfg, energy=True)
    fm, gm, sm, Em, _ = _shoot(problem.half("-"), complex(-lam), cfg, energy=True)
    # scale each side to unit value (or quasi-derivative) at 0
    if abs(fp) >= abs(gp):
        ap, am = abs(fp) ** 2, abs(fm) ** 2
    else:
        ap, am = abs(gp) ** 2, abs(gm) ** 2
    pos = Ep / ap if ap > 0 else 0.0
    neg = Em / am if am > 0 else 0.0
    return (pos - neg) / (pos + neg)


# ------------------------------------------------------------ root scan

def _sig(lam):
    return math.copysign(math.sqrt(abs(lam)), lam)


def _lam(s):
    return math.copysign(s * s, s)


def _scan(fn, lo, hi, panels, tol):
    """Sign-change brackets of fn(lam) on a grid uniform in sqrt|lam|, plus dip warnings."""
    s = np.linspace(_sig(lo), _sig(hi), panels + 1)
    step = s[1] - s[0] if s.size > 1 else 1.0
    s = s[np.abs(s) > 1e-9 * max(1.0, abs(step))]
    vals = np.array([fn(_lam(v)) for v in s])
    brackets, warns = [], []
    for i in range(s.size - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            brackets.append((s[i], s[i]))
        elif a * b < 0:
            brackets.append((s[i], s[i + 1]))
    for i in range(1, s.size - 1):
        v = abs(vals[i])
        if v < tol and v <= abs(vals[i - 1]) and v <= abs(vals[i + 1]) and vals[i - 1] * vals[i + 1] > 0:
            warns.append(f"|D| dips to {v:.2e} near lam={_lam(s[i]):.6g} without a sign change")
    return brackets, warns, step


def _roots(fn, brackets):
    out = []
    for a, b in brackets:
        if a == b:
            out.append(_lam(a))
            continue
        fa, fb = fn(_lam(a)), fn(_lam(b))
        if fa * fb > 0:
            # coarse sign change not confirmed at full accuracy
            continue
        r = brentq(lambda s: fn(_lam(s)), a, b, xtol=1e-13, rtol=1e-13, maxiter=200)
        out.append(_lam(r))
    return out


def eigenvalues(problem, window, cfg=EigenConfig(), mode="coupled", with_kernel=True):
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValueError("empty window")
    coarse = replace(cfg, rtol=cfg.scan_rtol)
    fn = lambda lam: char_function(problem, lam, cfg, mode).D
    brackets, warns, step = _scan(lambda lam: char_function(problem, lam, coarse, mode).D, lo, hi,
                                  cfg.panels, cfg.tol)
    roots = _roots(fn, brackets)
    scale = max(1.0, abs(lo), abs(hi))
    kern = kernel_analysis(problem) if (with_kernel and mode == "coupled") else None
    eig = []
    approximate = False
    for lam in sorted(roots):
        smp = char_function(problem, lam, cfg, mode)
        approximate |= smp.approximate
        if abs(lam) <= 1e-10 * scale:
            eig.append(Eigenvalue(0.0, abs(smp.D), "zero", _zero_note(kern)))
            continue
        kn = krein_norm(problem, lam, cfg) if mode == "coupled" else None
        eig.append(Eigenvalue(lam, abs(smp.D), "positive" if lam > 0 else "negative", "simple", kn))
    has_zero = any(e.sign_class == "zero" for e in eig)
    if lo <= 0 <= hi and not has_zero:
        if mode == "coupled" and kern is not None and kern.kernel_dim == 1:
            eig.append(Eigenvalue(0.0, 0.0, "zero", _zero_note(kern)))
        elif mode in ("+", "-") and char_function(problem, 0.0, cfg, mode).D == 0.0:
            eig.append(Eigenvalue(0.0, 0.0, "zero", "constants"))
        eig.sort(key=lambda e: e.lam)
        if any(e.sign_class == "zero" for e in eig):
            warns = [w for w in warns if "lam=0" not in w and not _near_zero(w, step)]
    for a, b in zip(eig, eig[1:]):
        if abs(_sig(b.lam) - _sig(a.lam)) < 2 * step:
            warns.append(f"roots {a.lam:.6g} and {b.lam:.6g} closer than two scan steps")
    for e in eig:
        if e.residual > cfg.tol:
            warns.append(f"residual {e.residual:.2e} above tolerance at lam={e.lam:.6g}")
    return SpectrumReport(eig, (lo, hi), warns, kern, approximate)


def _near_zero(msg, step):
    try:
        lam = float(msg.split("lam=")[1].split()[0])
    except (IndexError, ValueError):
        return False
    return abs(_sig(lam)) <= 2 * step


def _zero_note(kern):
    if kern is None:
        return "zero"
    if kern.chain_length == 2:
        return "kernel dimension 1, Jordan chain of length 2"
    return f"kernel dimension {kern.kernel_dim}, chain length {kern.chain_length}"


def neumann_eigenvalues(problem, window, side="+", cfg=EigenConfig()):
    """Eigenvalues of the decoupled Neumann problem on one side."""
    return eigenvalues(problem, window, cfg, mode=side, with_kernel=False)


# ------------------------------------------------------------ kernel and Jordan chain

_DY_X, _DY_W = np.polynomial.legendre.leggauss(10)
# dyadic panels [2^-k-1, 2^-k] of (0, 1), k < 60
_DY_LO = 0.5 ** np.arange(1, 61)
_DY_T = (1.5 * _DY_LO)[:, None] + (0.5 * _DY_LO)[:, None] * _DY_X[None, :]
_DY_WT = (0.5 * _DY_LO)[:, None] * _DY_W[None, :]


def _tail_by_distance(expr, s, end):
    """int of expr over (end - s, end) for an array of distances s, without forming end - s."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    tau, wt = _DY_T.ravel(), _DY_WT.ravel()
    vals = expr.eval_rev((s[:, None] * tau[None, :]).ravel(), end).reshape(len(s), -1)
    return s * (vals @ wt)


_FAR_PANELS = 200
LN2 = math.log(2.0)


def _far_square_integrable(half: HalfProblem, fn=None):
    """Whether int fn(x)^2 w(x) dx converges toward the endpoint.

    With fn None the r-tail int_x^L r is used, computed from the distance to L.
    """
    L = half.L
    xm = 0.5 * L if L < INF else 1.0
    if fn is not None:
        sq = lambda x: np.array([fn(float(t)) ** 2 for t in np.ravel(x)]).reshape(np.shape(x))
    try:
        with np.errstate(all="ignore"):
            if L == INF:
                if fn is None:
                    fn = lambda t: tail_integral(half.r, t, L)
                    sq = lambda x: np.array([fn(float(t)) ** 2 for t in np.ravel(x)]).reshape(np.shape(x))
                _quad.doubling_tail(lambda x: sq(x) * half.w.evaluate(x), xm, rtol=1e-8)
            else:
                # evaluated in the distance s = L - x to keep w finite near L
                def g(u):
                    u = np.asarray(u, dtype=float)
                    s = np.exp(-u.ravel())
                    f2 = _tail_by_distance(half.r, s, L) ** 2 if fn is None else sq(L - s)
                    return (f2 * half.w.eval_rev(s, L) * s).reshape(u.shape)
                # the u-integrand is exponential up to slow factors; decide from the
                # per-panel decay over s down to about 1e-60 L
                u0 = -math.log(L - xm)
                c = _quad.panels(g, u0 + LN2 * np.arange(_FAR_PANELS + 1), 1e-8)
                if not np.all(np.isfinite(c)):
                    return False
                tail_c = c[-_FAR_PANELS // 2:]
                if np.any(tail_c <= 0.0):
                    return bool(np.all(tail_c == 0.0))
                rate = np.polyfit(np.arange(len(tail_c)), np.log(tail_c), 1)[0]
                return bool(rate < math.log(0.97))
    except (DivergenceError, FloatingPointError):
        return False
    return True


def _side_constraint(half: HalfProblem, sign):
    """Linear constraints on (c, d) for c + d R(x) to lie in the domain on one side.

    Returns a list of row vectors; R on the minus side is negative.
    """
    wi, ri = integrability(half)
    if wi:
        return [(0.0, 1.0)]
    if ri:
        Rb = half.R_end()
        if _far_square_integrable(half):
            return [(1.0, sign * Rb)]
    return [(1.0, 0.0), (0.0, 1.0)]


def _int0(fn, t):
    """int_0^t fn on geometric panels toward 0."""
    if t <= 0:
        return 0.0
    return _quad.tail(lambda u: fn(np.exp(-u)) * np.exp(-u), -math.log(t), rtol=1e-15)


def _chain_half(half: HalfProblem, t0):
    """g(t) = int_0^t R w + R(t) int_t^L w for t >= t0."""
    R = lambda x: np.asarray(antiderivative(half.r, x), dtype=float)
    Rw = lambda x: R(x) * half.w.evaluate(x)
    head = _int0(Rw, t0)

    def g(t):
        if t >= half.L:
            t = half.L
            return head + _quad.integrate(Rw, t0, t, n=4, rtol=1e-15)
        return head + _quad.integrate(Rw, t0, t, n=4, rtol=1e-15) + float(R(t)) * tail_integral(half.w, t, half.L)

    return g


def _d5(fn, x, h):
    return (fn(x - 2 * h) - 8 * fn(x - h) + 8 * fn(x + h) - fn(x + 2 * h)) / (12 * h)


def _chain_step(half: HalfProblem):
    top = half.L if half.L < INF else 10.0
    return 1e-2 * min(top, 1.0), top


def _chain_residual(half: HalfProblem, g, npts=41):
    """sup |A g - 1| on one side via nested five-point stencils."""
    h, top = _chain_step(half)
    xs = np.linspace(5 * h, top - 5 * h, npts)
    r = lambda x: float(half.r.evaluate(np.array(x)))
    w = lambda x: float(half.w.evaluate(np.array(x)))
    res = []
    for x in xs:
        # coefficients singular at 0 vary on the scale of x
        hx = min(h, 0.01 * x)
        g1 = lambda t: _d5(g, t, hx) / r(t)
        res.append(abs(-_d5(g1, x, hx) / w(x) - 1.0))
    res = np.array(res)
    return xs, res


def kernel_analysis(problem, build_chain=True, tol=1e-12):
    hp, hm = problem.half("+"), problem.half("-")
    rows = np.array(_side_constraint(hp, 1) + _side_constraint(hm, -1), dtype=float)
    rank = np.linalg.matrix_rank(rows, tol=1e-12 * max(1.0, np.abs(rows).max()))
    dim = 2 - rank
    if dim == 0:
        return JordanReport(0, 0, note="no admissible kernel element")
    wp, wm = integrability(hp)[0], integrability(hm)[0]
    if not (wp and wm):
        return JordanReport(dim, 1, note="kernel spanned by a non-constant solution")
    ksum = hp.W_end() - hm.W_end()
    if abs(ksum) > tol * (hp.W_end() + hm.W_end()):
        return JordanReport(dim, 1, ksum, note="constants; kernel condition nonzero")
    if not build_chain:
        return JordanReport(dim, 2, ksum, note="constants; kernel condition vanishes (chain not built)")
    gp, gm = _chain_half(hp, _chain_step(hp)[0]), _chain_half(hm, _chain_step(hm)[0])
    xp, rp = _chain_residual(hp, gp)
    xm, rm = _chain_residual(hm, gm)
    resid = float(max(rp.max(), rm.max()))
    x = np.concatenate([-xm[::-1], xp])
    g = np.array([-gm(t) for t in xm[::-1]] + [gp(t) for t in xp])
    length = 2 if resid < 1e-6 else 1
    note = "Jordan chain built" if length == 2 else "chain construction residual too large"
    return JordanReport(dim, length, ksum, x, g, resid, note)


# ------------------------------------------------------------ finite-difference oracle

@dataclass
class FDResult:
    eigenvalues: list
    zero_in_kernel: bool
    zero_multiplicity: int
    nodes: int


def _signed_primitive(half: HalfProblem, expr, t):
    return float(antiderivative(expr, t)) if t < half.L else float(
        half.W_end() if expr is half.w else half.R_end())


def _side_nodes(half: HalfProblem, n, grading, cfg):
    L = half.L
    if not all(integrability(half)):
        if not cfg.force_truncate:
            raise NotApplicable("singular endpoint: the oracle needs force_truncate")
        L = L * (1 - cfg.truncate_frac) if L < INF else cfg.truncate_inf
    if grading == "uniform":
        return np.linspace(0.0, L, n + 1)
    # equal increments of W + R (keeps cells small where w is large)
    total = _signed_primitive(half, half.w, L) + _signed_primitive(half, half.r, L)
    fn = lambda t: float(antiderivative(half.w, t)) + float(antiderivative(half.r, t))
    nodes = [0.0]
    for k in range(1, n):
        y = total * k / n
        nodes.append(invert_monotone(fn, y, nodes[-1], min(L, nodes[-1] + L / n), tol=1e-14, limit=(0.0, L)))
    nodes.append(L)
    return np.array(nodes)


def fd_oracle(problem, n_points=2000, count=10, cfg=EigenConfig(), grading="uniform", lam_max=None):
    """Smallest-|lam| eigenvalues of the lumped finite-difference pencil K u = lam M u."""
    hp, hm = problem.half("+"), problem.half("-")
    np_ = max(2, int(round(n_points * hp.L / (hp.L + hm.L)))) if hp.L < INF and hm.L < INF else n_points // 2
    nm = max(2, n_points - np_)
    tp = _side_nodes(hp, np_, grading, cfg)
    tm = _side_nodes(hm, nm, grading, cfg)
    x = np.concatenate([-tm[::-1], tp[1:]])
    # signed primitives: S of the operator weight (negative on x < 0), Rs of r
    Sp = lambda t: float(antiderivative(hp.w, t))
    Sm = lambda t: float(antiderivative(hm.w, t))
    Rp = lambda t: float(antiderivative(hp.r, t))
    Rm = lambda t: float(antiderivative(hm.r, t))
    S = np.array([Sm(-v) if v < 0 else Sp(v) for v in _mid_edges(x)])
    Rs = np.array([-Rm(-v) if v < 0 else Rp(v) for v in x])
    mass = np.diff(S)
    cond = 1.0 / np.diff(Rs)
    diag = np.concatenate([[0.0], cond]) + np.concatenate([cond, [0.0]])
    off = cond
    ksum = abs(mass.sum())
    zero_mult = 2 if ksum <= 1e-10 * np.abs(mass).sum() else 1

    def sign_det(lams):
        lams = np.asarray(lams, dtype=float)
        d = diag[0] - lams * mass[0]
        sgn = np.sign(d)
        for i in range(1, diag.size):
            d = np.where(d == 0, 1e-300, d)
            d = diag[i] - lams * mass[i] - off[i - 1] ** 2 / d
            sgn = sgn * np.sign(d)
        return sgn

    smax = math.sqrt(lam_max) if lam_max else 8.0
    while True:
        s = np.linspace(-smax, smax, 801)
        s = s[np.abs(s) > 1e-9]
        sg = sign_det(np.sign(s) * s * s)
        idx = np.nonzero(sg[:-1] * sg[1:] < 0)[0]
        if lam_max or np.sum(np.abs(s[idx]) > 1e-3) >= count + 2:
            break
        smax *= 2
    a, b = s[idx], s[idx + 1]
    for _ in range(48):
        mid = 0.5 * (a + b)
        sm = sign_det(np.sign(mid) * mid * mid)
        left = sg[idx] * sm < 0
        b = np.where(left, mid, b)
        a = np.where(left, a, mid)
    found = [float(np.sign(m) * m * m) for m in 0.5 * (a + b)]
    found = [v for v in found if abs(v) > 1e-8]
    found.sort(key=abs)
    rows = diag - np.concatenate([[0.0], off]) - np.concatenate([off, [0.0]])
    zero_in_kernel = bool(np.all(np.abs(rows) <= 1e-12 * diag))
    return FDResult(sorted(found[:count]), zero_in_kernel, zero_mult, x.size)


def _mid_edges(x):
    return np.concatenate([[x[0]], 0.5 * (x[1:] + x[:-1]), [x[-1]]])

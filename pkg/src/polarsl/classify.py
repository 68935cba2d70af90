"""Regularity, discreteness, kernel, Riesz-basis and similarity verdicts.

Each verdict records the route that produced it.  Analytic routes (positive
increase, slow variation plus the Q ratio, integrability cases at 0) come
first; the numeric D-ratio on computed m-functions is the fallback, and can
be run alongside as a cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad, weyl
from .coeffs import (INF, DivergenceError, HalfProblem, NoBracketError, antiderivative,
                     integrability, invert_monotone, side_profile, tail_integral)
from .karamata import (GridPolicy, Handle, PreconditionError, TriVerdict, _windows, is_positively_increasing,
                       is_slowly_varying, log_slope)
from .weyl import NotApplicable

ROUTES = ("positively_increasing", "slowly_varying_Q", "one_sided_asymptotic", "numeric_D_property",
          "integrability_case", "not_covered")


@dataclass(frozen=True)
class ClassifyConfig:
    y_lo: float = 1e2
    y_hi: float = 1e6
    points: int = 17
    verify: bool = False
    policy: GridPolicy = GridPolicy()
    integrator: weyl.IntegratorConfig = weyl.IntegratorConfig()
    kernel_tol: float = 1e-12


@dataclass
class RegularityVerdict:
    point: str
    status: TriVerdict
    route: str
    case: str | None = None
    kernel_equal: bool | None = None
    critical: bool | None = None
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")

    @property
    def regular(self):
        return self.status.status == "holds"

    @property
    def regular_critical(self):
        """0 (or inf) is a critical point and it is not singular."""
        if self.critical is None:
            return None
        return bool(self.critical and self.evidence.get("not_singular", self.regular))

    def as_dict(self):
        return {"point": self.point, "status": self.status.status, "route": self.route,
                "case": self.case, "kernel_equal": self.kernel_equal, "critical": self.critical,
                "note": self.status.note}


@dataclass
class QTrace:
    x: np.ndarray
    q: np.ndarray
    verdict: TriVerdict


@dataclass
class SideDiscreteness:
    side: str
    form: str
    x: np.ndarray | None
    values: np.ndarray | None
    limit_zero: TriVerdict
    sup_finite: TriVerdict


@dataclass
class DiscretenessReport:
    sides: dict
    overall: TriVerdict

    def as_dict(self):
        return {"overall": self.overall.status,
                "sides": {s: {"form": d.form, "limit_zero": d.limit_zero.status,
                              "sup_finite": d.sup_finite.status,
                              "final_value": None if d.values is None else float(d.values[-1])}
                          for s, d in self.sides.items()}}


@dataclass
class SimilarityReport:
    infinity: RegularityVerdict
    zero: RegularityVerdict
    kernel_sum: float | None
    status: TriVerdict
    riesz: TriVerdict
    routes: dict = field(default_factory=dict)

    def as_dict(self):
        return {"status": self.status.status, "riesz": self.riesz.status, "kernel_sum": self.kernel_sum,
                "routes": self.routes, "note": self.status.note}


# ------------------------------------------------------------ boundedness surrogate

def boundedness_verdict(lnt, vals, cap=10.0, hold_slope=0.05, fail_slope=0.3, growth=10.0):
    """Finite-sample reading of vals = O(1) as t grows (lnt = ln t, increasing).

    holds:  final-window sup <= cap * first-window median and log-log slope <= hold_slope.
    fails:  monotone growth over the second half together with a log-log slope
            >= fail_slope, a final/initial ratio >= growth, or a slope >= 0.5 of
            ln(vals) against ln(ln t) (logarithmic growth).
    Infinite samples (vanishing denominators) in the final window fail outright.
    """
    lnt = np.asarray(lnt, dtype=float)
    v = np.abs(np.asarray(vals, dtype=float))
    n = v.size
    fw, pw, half = _windows(n)
    ev = {"lnt": lnt, "values": v}
    if np.any(np.isinf(v[fw])):
        return TriVerdict("fails", ev, None, "denominator vanishes on the final window")
    keep = np.isfinite(v)
    if keep.sum() < 8:
        return TriVerdict("inconclusive", ev, None, "too few valid samples")
    if not keep.all():
        # early vanishing denominators and invalid points drop out of the fits
        lnt, v = lnt[keep], v[keep]
        n = v.size
        fw, pw, half = _windows(n)
    first = float(np.median(v[: max(4, n // 4)]))
    final = float(v[fw].max())
    tt = lnt[half]
    vv = np.maximum(v[half], 1e-300)
    slope = float(np.polyfit(tt, np.log(vv), 1)[0]) if tt.size > 1 else 0.0
    ev.update(first_median=first, final_sup=final, slope=slope)
    if final <= cap * first and slope <= hold_slope:
        return TriVerdict("holds", ev, slope)
    monotone = bool(np.all(np.diff(v[half]) > 0))
    loglog = None
    if np.all(tt > 0):
        loglog = float(np.polyfit(np.log(tt), np.log(vv), 1)[0]) if tt.size > 1 else None
    ev["loglog_slope"] = loglog
    if monotone and (slope >= fail_slope or final >= growth * first or (loglog is not None and loglog >= 0.5)):
        return TriVerdict("fails", ev, slope, "monotone growth")
    return TriVerdict("inconclusive", ev, slope)


# ------------------------------------------------------------ Q ratio

def _g_handles(problem):
    out = {}
    for s in "+-":
        prof = side_profile(problem, s)
        out[s] = (prof, prof.half.G_handle(name=f"G{s}"))
    return out


def q_ratio_trace(profiles, x_grid=None, policy=GridPolicy()):
    """Q(x) = (1 + W-(R-^-1(-x)) / W+(R+^-1(x)))^-1 on x decreasing to 0.

    profiles is a pair of SideProfiles (+, -).  Entries where the two
    profiles agree to 1e-12 carry the +inf marker.
    """
    hp, hm = profiles[0].half, profiles[1].half
    gp, gm = hp.G_handle(), hm.G_handle()
    if x_grid is None:
        base = gp if gp.v_max <= gm.v_max else gm
        v = policy.depths(base)
    else:
        x = np.asarray(x_grid, dtype=float)
        if np.any(x <= 0) or np.any(np.diff(x) >= 0):
            raise ValueError("x grid must be positive and strictly decreasing")
        v = -np.log(x)
    q = np.empty(v.size)
    for k, vk in enumerate(v):
        try:
            d = float(gm.lnf(np.array(vk))) - float(gp.lnf(np.array(vk)))
        except (NoBracketError, DivergenceError):
            q[k] = np.nan
            continue
        # ratio W-/W+ at -x and x is -exp(d)
        den = -math.expm1(d)
        q[k] = math.inf if abs(den) <= 1e-12 else 1.0 / den
    verdict = boundedness_verdict(v, q)
    return QTrace(np.exp(-v), q, verdict)


# ------------------------------------------------------------ D property

def d_property_check(trace_plus, trace_minus, regime="infinity"):
    """Boundedness of max(Im m+, Im m-)/|m+(iy) + m-(-iy)| along a common y grid.

    Returns (TriVerdict, ratio array).  The evidence also carries the
    one-sided checks Im m = O(Re m) per side and the Re m+ Re m- > 0
    precondition.
    """
    y = trace_plus.y
    if trace_minus.y.shape != y.shape or not np.allclose(trace_minus.y, y, rtol=0, atol=0):
        raise ValueError("traces must share the y grid")
    mp, mm = trace_plus.m, trace_minus.m
    ratio = np.maximum(mp.imag, mm.imag) / np.abs(mp + np.conj(mm))
    if regime == "infinity":
        lnt = np.log(y)
    elif regime == "zero":
        lnt = -np.log(y)
        order = np.argsort(lnt)
        lnt, ratio, mp, mm = lnt[order], ratio[order], mp[order], mm[order]
    else:
        raise ValueError(f"unknown regime {regime!r}")
    pre = bool(np.all(mp.real * mm.real > 0))
    verdict = boundedness_verdict(lnt, ratio)
    one_sided = {"+": boundedness_verdict(lnt, mp.imag / mp.real).status,
                 "-": boundedness_verdict(lnt, mm.imag / mm.real).status}
    verdict.evidence.update(precondition_re_product_positive=pre, one_sided=one_sided, ratio=ratio)
    if not pre:
        verdict.note = (verdict.note + "; " if verdict.note else "") + "Re m+ Re m- > 0 violated: integrator failure"
    return verdict, ratio


def d_ratio_traces(problem, cfg=ClassifyConfig(), regime="infinity"):
    if regime == "infinity":
        ys = np.geomspace(cfg.y_lo, cfg.y_hi, cfg.points)
    else:
        ys = np.geomspace(1e-4, 1e-1, cfg.points)
    tp = weyl.m_trace(problem, "+", ys, cfg.integrator)
    tm = weyl.m_trace(problem, "-", ys, cfg.integrator)
    return tp, tm


# ------------------------------------------------------------ regularity at infinity

def _safe(test, handle):
    try:
        return test(handle)
    except (PreconditionError, NoBracketError, DivergenceError) as exc:
        return TriVerdict("inconclusive", {}, None, f"{type(exc).__name__}: {exc}")


def regularity_at_infinity(problem, cfg=ClassifyConfig()):
    hs = _g_handles(problem)
    pi = {s: _safe(lambda h: is_positively_increasing(h, policy=cfg.policy), hs[s][1]) for s in "+-"}
    sv = {s: _safe(lambda h: is_slowly_varying(h, policy=cfg.policy), hs[s][1]) for s in "+-"}
    ev = {"positively_increasing": {s: pi[s].status for s in pi},
          "slowly_varying": {s: sv[s].status for s in sv}}
    numeric = None
    if cfg.verify or not (any(p.holds for p in pi.values()) or all(v.holds for v in sv.values())):
        try:
            tp, tm = d_ratio_traces(problem, cfg)
            numeric, ratio = d_property_check(tp, tm, "infinity")
            ev["numeric_D"] = numeric.status
            ev["d_ratio"] = ratio
            ev["d_y"] = tp.y
        except (weyl.ConvergenceError, NoBracketError, DivergenceError) as exc:
            numeric = TriVerdict("inconclusive", {}, None, f"m-trace failed: {exc}")
            ev["numeric_D"] = "inconclusive"
    if any(p.holds for p in pi.values()):
        side = "+" if pi["+"].holds else "-"
        st = TriVerdict("holds", pi[side].evidence, pi[side].trend, f"W o R^-1 positively increasing on side {side}")
        return RegularityVerdict("infinity", st, "positively_increasing", critical=True, evidence=ev)
    if all(v.holds for v in sv.values()):
        qt = q_ratio_trace((hs["+"][0], hs["-"][0]), policy=cfg.policy)
        ev["q"] = qt.q
        ev["q_x"] = qt.x
        return RegularityVerdict("infinity", qt.verdict, "slowly_varying_Q", critical=True, evidence=ev)
    if numeric is not None:
        one = numeric.evidence.get("one_sided", {})
        if numeric.status != "holds" and "holds" in one.values():
            st = TriVerdict("holds", numeric.evidence, numeric.trend, "Im m = O(Re m) on one side")
            return RegularityVerdict("infinity", st, "one_sided_asymptotic", critical=True, evidence=ev)
        return RegularityVerdict("infinity", numeric, "numeric_D_property", critical=True, evidence=ev)
    return RegularityVerdict("infinity", TriVerdict("inconclusive"), "not_covered", critical=True, evidence=ev)


# ------------------------------------------------------------ endpoint products

def _approach(half: HalfProblem, depth=50):
    L = half.L
    k = np.arange(depth + 1)
    if L == INF:
        return 2.0 ** k, k * math.log(2.0)
    x = L - 0.5 * L * 2.0 ** -k
    keep = x < L
    return x[keep], (k * math.log(2.0))[keep]


def _side_product(half: HalfProblem, form):
    """R(x) * int_x^b w  (form 'R_Wtail') or W(x) * int_x^b r ('W_Rtail') toward b."""
    x, lnt = _approach(half)
    vals = np.empty(x.size)
    for i, xi in enumerate(x):
        if form == "R_Wtail":
            vals[i] = float(antiderivative(half.r, xi)) * half.W_tail(float(xi))
        else:
            vals[i] = float(antiderivative(half.w, xi)) * half.R_tail(float(xi))
    return x, lnt, vals


def _limit_zero_verdict(lnt, vals):
    v = np.abs(vals)
    fw, pw, half = _windows(v.size)
    peak = float(v.max())
    final = float(v[fw].max())
    slope = log_slope(np.exp(lnt[half]), v[half])
    ev = {"values": v, "final": final, "peak": peak}
    if final <= 1e-3 * max(peak, 1e-300) and slope <= -0.05:
        return TriVerdict("holds", ev, slope)
    if np.all(np.diff(v[half]) < 0) and slope <= -0.1 and final <= 0.1 * peak:
        return TriVerdict("holds", ev, slope, "clean power decay")
    if final >= 0.1 * peak or slope > -0.01:
        return TriVerdict("fails", ev, slope, "product does not tend to 0")
    return TriVerdict("inconclusive", ev, slope)


def side_discreteness(problem, side):
    h = problem.half(side)
    wi, ri = integrability(h)
    if wi and ri:
        t = TriVerdict("holds", {}, None, "regular endpoint")
        return SideDiscreteness(side, "regular", None, None, t, TriVerdict("holds", {}, None, "regular endpoint"))
    if wi and not ri:
        form = "R_Wtail"
    elif ri and not wi:
        form = "W_Rtail"
    else:
        t = TriVerdict("inconclusive", {}, None, "neither coefficient integrable: no criterion")
        return SideDiscreteness(side, "none", None, None, t, t)
    x, lnt, vals = _side_product(h, form)
    lim = _limit_zero_verdict(lnt, vals)
    sup = boundedness_verdict(lnt, vals, cap=1e3)
    return SideDiscreteness(side, form, x, vals, lim, sup)


def discreteness(problem):
    sides = {s: side_discreteness(problem, s) for s in "+-"}
    st = [d.limit_zero.status for d in sides.values()]
    if all(s == "holds" for s in st):
        overall = TriVerdict("holds", {}, None, "both sides discrete")
    elif any(s == "fails" for s in st):
        overall = TriVerdict("fails", {}, None, "essential spectrum on some side")
    else:
        overall = TriVerdict("inconclusive")
    return DiscretenessReport(sides, overall)


# ------------------------------------------------------------ kernel and zero

def kernel_condition(problem, tol=1e-12):
    """W+(b+) + W-(b-) (W- negative) and whether it is nonzero."""
    hp, hm = problem.half("+"), problem.half("-")
    if not (hp.w.integrable_at(hp.L) and hm.w.integrable_at(hm.L)):
        raise NotApplicable("the weight is not integrable on both sides")
    wp, wm = hp.W_end(), hm.W_end()
    total = wp - wm
    scale = abs(wp) + abs(wm)
    if abs(total) <= tol * scale:
        return total, TriVerdict("fails", {"W_plus": wp, "W_minus": -wm}, None, "sum vanishes")
    return total, TriVerdict("holds", {"W_plus": wp, "W_minus": -wm}, None)


def _pi_at_infinity(half: HalfProblem, policy):
    """W o R^-1 at +inf on the plain geometric grid."""
    def lnG(v):
        out = []
        for vv in np.ravel(np.asarray(v, dtype=float)):
            # t with R(t) = e^vv, searched in s = ln t
            s = invert_monotone(lambda q: math.log(float(antiderivative(half.r, math.exp(q)))), vv, 0.0, 1.0,
                                tol=1e-13, limit=(-700.0, 700.0))
            out.append(math.log(float(antiderivative(half.w, math.exp(s)))))
        return np.reshape(out, np.shape(v))

    h = Handle("plus_infinity", lnf=lnG, v_max=300.0, name="G_inf", log_capable=False)
    return _safe(lambda hh: is_positively_increasing(hh, policy=GridPolicy(depth=24, mode="geometric")), h)


def _zero_accumulates(problem, side):
    d = side_discreteness(problem, side)
    if d.form == "regular":
        return False
    if d.form == "none":
        return None
    return {"holds": False, "fails": True}.get(d.sup_finite.status)


def regularity_at_zero(problem, cfg=ClassifyConfig()):
    hp, hm = problem.half("+"), problem.half("-")
    wp, rp = integrability(hp)
    wm, rm = integrability(hm)
    ev = {"integrable": {"w+": wp, "r+": rp, "w-": wm, "r-": rm}}
    # constants a = +-1/W(b) of the small-y asymptotics of m
    ev["a_plus"] = 1.0 / hp.W_end() if wp else 0.0
    ev["a_minus"] = 1.0 / hm.W_end() if wm else 0.0
    kernel_sum = None
    kern = kernel_analysis(problem, build_chain=False)
    ev["kernel_dim"] = kern.kernel_dim
    acc = {s: _zero_accumulates(problem, s) for s in "+-"}
    ev["zero_accumulates"] = acc
    not_singular = None
    if not (wp or rp or wm or rm):
        pis = {s: _pi_at_infinity(problem.half(s), cfg.policy) for s in "+-"}
        ev["positively_increasing_at_inf"] = {s: v.status for s, v in pis.items()}
        if any(v.holds for v in pis.values()):
            st, route, case, keq = TriVerdict("holds"), "integrability_case", "i", True
        else:
            st = TriVerdict("inconclusive", {}, None, "no coefficient integrable and no positive increase at inf")
            route, case, keq = "not_covered", "v", None
    elif not wp and not wm:
        st, route, case, keq = TriVerdict("holds"), "integrability_case", "ii", True
    elif wp != wm:
        st, route, case, keq = TriVerdict("holds"), "integrability_case", "iii", True
    else:
        kernel_sum, kv = kernel_condition(problem, cfg.kernel_tol)
        ev["kernel_sum"] = kernel_sum
        if kv.holds:
            st, route, case, keq = TriVerdict("holds"), "integrability_case", "iv", True
        else:
            chain = kernel_analysis(problem)
            keq = False if chain.chain_length == 2 else None
            st = TriVerdict("fails", {}, None, "W+(b+) + W-(b-) = 0: 0 singular or ker A != ker A^2")
            route, case = "integrability_case", "a"
    if st.holds:
        not_singular = True
    elif all(a is False for a in acc.values()):
        # 0 is isolated in the spectrum: the root space there is nondegenerate
        not_singular = True
    ev["not_singular"] = not_singular
    critical = _zero_critical(acc, kern.kernel_dim, kernel_sum, cfg.kernel_tol)
    return RegularityVerdict("zero", st, route, case, keq, critical, ev)


def _zero_critical(acc, kernel_dim, kernel_sum, tol):
    degenerate = kernel_sum is not None and abs(kernel_sum) <= tol * max(1.0, abs(kernel_sum))
    if degenerate:
        return True
    if acc["+"] is True and acc["-"] is True:
        return True
    if (acc["+"] is False or acc["-"] is False) and (kernel_dim == 0 or kernel_sum is not None):
        return False
    return None


# ------------------------------------------------------------ kernel analysis (shared with eigensolver)

def kernel_analysis(problem, build_chain=True):
    from .eigensolver import kernel_analysis as _ka

    return _ka(problem, build_chain=build_chain)


# ------------------------------------------------------------ Riesz and similarity

def riesz_gate(disc: DiscretenessReport):
    return disc.overall


def similarity_and_riesz(problem, cfg=ClassifyConfig(), inf=None, zero=None, disc=None):
    inf = inf or regularity_at_infinity(problem, cfg)
    zero = zero or regularity_at_zero(problem, cfg)
    disc = disc or discreteness(problem)
    gate = riesz_gate(disc)
    if gate.holds:
        riesz = TriVerdict(inf.status.status, {}, inf.status.trend, f"discrete spectrum; route {inf.route}")
    else:
        riesz = TriVerdict("inconclusive", {}, None, f"discreteness precheck {gate.status}")
    routes = {"infinity": inf.route, "zero": f"{zero.route}:{zero.case}" if zero.case else zero.route}
    a, b = inf.status.status, zero.status.status
    if a == "holds" and b == "holds":
        st = TriVerdict("holds", {}, None, "both critical points regular and ker A = ker A^2")
    elif a == "fails" or b == "fails":
        which = [n for n, s in (("infinity", a), ("zero", b)) if s == "fails"]
        st = TriVerdict("fails", {}, None, "fails at " + ", ".join(which))
    else:
        st = TriVerdict("inconclusive")
    ks = zero.evidence.get("kernel_sum")
    return SimilarityReport(inf, zero, ks, st, riesz, routes)


# ------------------------------------------------------------ integral identity

def _vec(fn):
    return lambda x: np.array([fn(float(t)) for t in np.ravel(x)]).reshape(np.shape(x))


def _half_integral(g, half: HalfProblem, rtol=1e-11):
    """int_0^b g over the half interval with geometric panels at both ends."""
    L = half.L
    xm = 0.5 * L if L < INF else 1.0
    near0 = _quad.tail(lambda u: g(np.exp(-u)) * np.exp(-u), -math.log(xm), rtol)
    if L == INF:
        far = _quad.doubling_tail(g, xm, rtol)
    else:
        far = _quad.tail(lambda u: g(L - np.exp(-u)) * np.exp(-u), -math.log(L - xm), rtol)
    return near0 + far


def kac_krein_identity_check(problem, side, tol=1e-6):
    """int R w  against  int (W(b) - W) r  over the side; both by quadrature."""
    h = problem.half(side)
    if not h.w.integrable_at(h.L):
        raise NotApplicable("the weight is not integrable on this side")
    R = lambda x: np.asarray(antiderivative(h.r, x), dtype=float)
    Wt = _vec(lambda t: tail_integral(h.w, t, h.L))
    left = right = None
    try:
        left = _half_integral(lambda x: R(x) * h.w.evaluate(x), h)
    except DivergenceError:
        pass
    try:
        right = _half_integral(lambda x: Wt(x) * h.r.evaluate(x), h)
    except DivergenceError:
        pass
    if left is None and right is None:
        return (math.inf, math.inf), TriVerdict("holds", {}, None, "both integrals diverge")
    if left is None or right is None:
        return (left, right), TriVerdict("fails", {}, None, "only one integral converges")
    rel = abs(left - right) / max(abs(left), abs(right))
    st = "holds" if rel <= tol else "fails"
    return (left, right), TriVerdict(st, {"relative_difference": rel}, None)

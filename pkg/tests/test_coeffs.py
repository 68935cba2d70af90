import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from polarsl.coeffs import (ConstExpr, DomainError, NoBracketError, ParseError, PowerLogTerm, ProblemSpec,
                            ReflectExpr, SumExpr, antiderivative, classify_endpoint, eval_coeff, invert_monotone,
                            parse_problem, side_profile, tail_integral)

ONE = ConstExpr(1.0)
INV_F_AT_100 = 0.0338563014029005  # root of (-ln x)/x = 100, mpmath at 30 digits


def log_weight(alpha):
    return PowerLogTerm(alpha, -1.0, -1.0 - alpha)


def test_eval_constant_and_powerlog():
    assert eval_coeff(ONE, 0.3) == 1.0
    assert eval_coeff(PowerLogTerm(1.0, -1.0, -2.0), math.exp(-1)) == pytest.approx(math.e, rel=1e-14)
    assert eval_coeff(log_weight(1.0), math.exp(-1)) == pytest.approx(math.e, rel=1e-14)


def test_eval_outside_interval_rejected():
    with pytest.raises(DomainError):
        eval_coeff(PowerLogTerm(1.0, -1.0, -2.0), 1.5)


def test_antiderivative_closed_forms():
    assert antiderivative(ONE, 0.3) == pytest.approx(0.3, rel=1e-15)
    assert antiderivative(log_weight(1.0), math.exp(-2)) == pytest.approx(0.5, rel=1e-13)
    assert antiderivative(PowerLogTerm(1.0, 2.0), 0.5) == pytest.approx(1 / 24, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-0.9, 3.0), b=st.floats(-3.0, 3.0), x=st.floats(0.05, 0.9))
def test_antiderivative_matches_incomplete_gamma(a, b, x):
    # t = exp(-u) turns the integral into Gamma(b + 1, (a + 1) U) / (a + 1)^(b + 1), U = -ln x
    U = -math.log(x)
    ref = float(mpmath.gammainc(b + 1, (a + 1) * U) / mpmath.mpf(a + 1) ** (b + 1))
    assert antiderivative(PowerLogTerm(1.0, a, b), x) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("b", [0.5, -1.5, -2.0])
def test_tail_to_interior_end_matches_quadrature(b):
    e = PowerLogTerm(1.0, -1.0, b)
    ref, _ = quad(lambda t: (-math.log(t)) ** b / t, 0.3, 0.6, epsrel=1e-13)
    assert tail_integral(e, 0.3, 0.6) == pytest.approx(ref, rel=1e-10)


def test_sum_and_reflection():
    s = SumExpr([ONE, PowerLogTerm(2.0, 1.0)])
    assert antiderivative(s, 0.5) == pytest.approx(0.5 + 0.25, rel=1e-14)
    r = ReflectExpr(3.0, 2.0, PowerLogTerm(1.0, 1.0))
    assert eval_coeff(r, 0.25) == pytest.approx(3.0 * 0.5)
    # int_0^x alpha (beta t) dt = alpha beta x^2 / 2
    assert antiderivative(r, 0.25) == pytest.approx(3.0 * 2.0 * 0.25 ** 2 / 2, rel=1e-14)


def test_invert_monotone_examples():
    assert invert_monotone(lambda x: x, 0.25, 0.0, 1.0) == pytest.approx(0.25, abs=1e-12)
    W = lambda x: 1.0 / (-math.log(x))
    assert invert_monotone(W, 0.5, 1e-6, 0.9) == pytest.approx(math.exp(-2), rel=1e-10)
    F = lambda x: -(-math.log(x)) / x  # increasing form of the decreasing (-ln x)/x
    assert invert_monotone(F, -100.0, 1e-4, 0.5) == pytest.approx(INV_F_AT_100, rel=1e-10)


def test_invert_monotone_no_bracket():
    with pytest.raises(NoBracketError):
        invert_monotone(lambda x: x, 5.0, 0.0, 1.0, expand=False)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(0.2, 4.0), x=st.floats(1e-3, 0.99))
def test_invert_monotone_round_trip(p, x):
    fn = lambda t: t ** p
    assert invert_monotone(fn, fn(x), 0.0, 1.0) == pytest.approx(x, rel=1e-9)


def test_endpoint_classes():
    unit = ProblemSpec(-1.0, 1.0, ONE, ONE, ONE, ONE)
    c = classify_endpoint(unit, "+")
    assert (c.regularity, c.limit_type) == ("regular", "limit_circle")
    lw = ProblemSpec(-1.0, 1.0, log_weight(0.5), ONE, log_weight(1.0), ONE)
    c = classify_endpoint(lw, "+", probe=False)
    assert (c.w_integrable, c.r_integrable, c.regularity) == (False, True, "singular")
    line = ProblemSpec(-math.inf, math.inf, ONE, ONE, ONE, ONE)
    c = classify_endpoint(line, "+")
    assert (c.regularity, c.limit_type) == ("singular", "limit_point")


def test_constant_profiles():
    p = ProblemSpec(-1.0, 1.0, ONE, ONE, ONE, ONE)
    prof = side_profile(p, "+")
    assert prof.W(0.4) == pytest.approx(0.4)
    assert prof.F(0.4) == pytest.approx(1 / 0.16)
    assert prof.f(100.0) == pytest.approx(0.1, rel=1e-10)
    minus = side_profile(p, "-")
    assert minus.W(-0.4) == pytest.approx(-0.4)
    assert minus.f(100.0) == pytest.approx(-0.1, rel=1e-10)


@pytest.mark.parametrize("ap, am", [(0.5, 1.0), (2.0, 3.0)])
def test_log_weight_g_profile(ap, am):
    p = ProblemSpec(-1.0, 1.0, log_weight(ap), ONE, log_weight(am), ONE)
    gp, gm = side_profile(p, "+"), side_profile(p, "-")
    for x in (1e-1, 1e-3, 1e-8):
        assert gp.G(x) == pytest.approx((-math.log(x)) ** -ap, rel=1e-10)
        assert gm.G(-x) == pytest.approx(-(-math.log(x)) ** -am, rel=1e-10)


def test_log_weight_f_inversion():
    p = ProblemSpec(-1.0, 1.0, log_weight(1.0), ONE, ONE, ONE)
    assert side_profile(p, "+").f(100.0) == pytest.approx(INV_F_AT_100, rel=1e-9)


def test_scaled_reflection_profile_identity():
    al, be = 2.0, 3.0
    w = PowerLogTerm(1.0, 0.5)
    p = ProblemSpec(-1.0 / be, 1.0, w, ONE, ReflectExpr(al, be, w), ReflectExpr(al, be, ONE))
    gp, gm = side_profile(p, "+"), side_profile(p, "-")
    for x in (-0.05, -0.2, -0.5):
        assert gm.G(x) == pytest.approx(-(al / be) * gp.G(-(be / al) * x), rel=1e-10)


PROBLEM_TEXT = """
name = log weight
param.alpha_plus = 0.5
interval.b_minus = -1
interval.b_plus = 1
plus.w = $alpha_plus * x^-1 * neglog(x)^(-1 - $alpha_plus)
plus.r = 1
minus.w = 2 * x^0.5 + 1
minus.r = 1
"""


def test_parse_problem_with_parameters():
    p = parse_problem(PROBLEM_TEXT)
    assert p.name == "log weight"
    assert eval_coeff(p.w_plus, math.exp(-1)) == pytest.approx(0.5 * math.e)
    q = parse_problem(PROBLEM_TEXT, {"alpha_plus": 1.0})
    assert eval_coeff(q.w_plus, math.exp(-1)) == pytest.approx(math.e)
    assert eval_coeff(p.w_minus, 0.25) == pytest.approx(2.0)


def test_parse_reflection_on_minus_side():
    text = PROBLEM_TEXT.replace("minus.w = 2 * x^0.5 + 1", "minus.w = reflect(2, 1)")
    p = parse_problem(text)
    assert eval_coeff(p.w_minus, 0.1) == pytest.approx(2 * eval_coeff(p.w_plus, 0.1))


@pytest.mark.parametrize("bad, line", [
    ("plus.w = x^", 6),
    ("plus.w = reflect(1, 1)", 6),
    ("plus.q = 1", 6),
])
def test_parse_errors_report_line(bad, line):
    lines = PROBLEM_TEXT.splitlines()
    idx = next(i for i, s in enumerate(lines) if s.startswith("plus.w"))
    lines[idx] = bad
    with pytest.raises(ParseError) as info:
        parse_problem("\n".join(lines))
    assert info.value.line == line


def test_parse_missing_key():
    with pytest.raises(ParseError):
        parse_problem("interval.b_plus = 1\n")

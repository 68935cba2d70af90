import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarsl import catalog as K
from polarsl import classify as C
from polarsl import weyl
from polarsl.coeffs import ConstExpr, PowerLogTerm, ProblemSpec, side_profile

ONE = ConstExpr(1.0)


def profiles(p):
    return side_profile(p, "+"), side_profile(p, "-")


def test_q_trace_equal_indices_is_all_markers():
    p = K.get_problem("log-weight", alpha_plus=0.7, alpha_minus=0.7)
    qt = C.q_ratio_trace(profiles(p))
    assert np.all(np.isinf(qt.q))
    assert qt.verdict.status == "fails"


def test_q_trace_closed_form():
    p = K.get_problem("log-weight", alpha_plus=0.5, alpha_minus=1.0)
    x = np.geomspace(1e-2, 1e-200, 30)
    qt = C.q_ratio_trace(profiles(p), x)
    expect = 1.0 / (1.0 - (-np.log(x)) ** -0.5)
    assert qt.q == pytest.approx(expect, rel=1e-9)
    assert qt.verdict.status == "holds"


def test_q_trace_constant_weight_markers(sgn):
    qt = C.q_ratio_trace(profiles(sgn), np.geomspace(0.5, 1e-6, 10))
    assert np.all(np.isinf(qt.q))


def test_q_trace_rejects_increasing_grid(sgn):
    with pytest.raises(ValueError):
        C.q_ratio_trace(profiles(sgn), [0.1, 0.2])


def test_regularity_at_infinity_routes(sgn):
    v = C.regularity_at_infinity(sgn)
    assert (v.status.status, v.route) == ("holds", "positively_increasing")
    v = C.regularity_at_infinity(K.get_problem("log-weight", alpha_plus=0.5, alpha_minus=1.0))
    assert (v.status.status, v.route) == ("holds", "slowly_varying_Q")
    v = C.regularity_at_infinity(K.get_problem("log-weight", alpha_plus=0.5, alpha_minus=0.5))
    assert (v.status.status, v.route) == ("fails", "slowly_varying_Q")


def test_regularity_at_zero_cases(sgn):
    v = C.regularity_at_zero(K.get_problem("log-weight"))
    assert (v.status.status, v.route, v.case) == ("holds", "integrability_case", "ii")
    v = C.regularity_at_zero(sgn)
    assert (v.status.status, v.case, v.kernel_equal) == ("fails", "a", False)
    v = C.regularity_at_zero(K.get_problem("scaled-reflection", alpha=2.0, beta=1.0))
    assert v.status.status == "holds"
    assert v.evidence["kernel_sum"] == pytest.approx((1 - 2.0) / math.log(2), rel=1e-10)


def test_kernel_condition_values(sgn):
    total, v = C.kernel_condition(sgn)
    assert total == 0.0 and v.status == "fails"
    for al, be in ((2.0, 1.0), (0.5, 2.0)):
        total, v = C.kernel_condition(K.get_problem("scaled-reflection", alpha=al, beta=be))
        assert total == pytest.approx((1 - al / be) / math.log(2), rel=1e-10)
        assert v.status == "holds"
    ap, am, bp, bm = 0.5, 1.0, 0.3, -0.6
    total, _ = C.kernel_condition(K.get_problem("log-weight", alpha_plus=ap, alpha_minus=am, b_plus=bp, b_minus=bm))
    assert total == pytest.approx((-math.log(bp)) ** -ap - (-math.log(-bm)) ** -am, rel=1e-10)
    with pytest.raises(weyl.NotApplicable):
        C.kernel_condition(K.get_problem("log-weight"))


def test_discreteness_regular_problem(sgn):
    rep = C.discreteness(sgn)
    assert rep.overall.status == "holds"
    assert {d.form for d in rep.sides.values()} == {"regular"}


@pytest.mark.parametrize("alpha, status", [(0.5, "holds"), (2.0, "fails")])
def test_discreteness_log_weight(alpha, status):
    d = C.side_discreteness(K.get_problem("log-weight", alpha_plus=alpha), "+")
    assert d.form == "W_Rtail"
    assert d.limit_zero.status == status


def test_discreteness_diagnostic_decay_rate():
    # W-tail times R grows like (1 - x)^(1 - alpha) near the endpoint up to a log factor
    d = C.side_discreteness(K.get_problem("log-weight", alpha_plus=0.5), "+")
    s = 1.0 - d.x[-10:]
    slope = np.polyfit(np.log(s), np.log(d.values[-10:]), 1)[0]
    assert 0.4 < slope < 0.6


def test_d_property_constant_weight(sgn):
    cfg = C.ClassifyConfig(points=9)
    tp, tm = C.d_ratio_traces(sgn, cfg)
    v, ratio = C.d_property_check(tp, tm)
    assert v.status == "holds"
    assert v.evidence["one_sided"] == {"+": "holds", "-": "holds"}
    assert v.evidence["precondition_re_product_positive"]


def test_d_property_grid_mismatch(sgn):
    a = weyl.m_trace(sgn, "+", [1.0, 2.0])
    b = weyl.m_trace(sgn, "-", [1.0, 3.0])
    with pytest.raises(ValueError):
        C.d_property_check(a, b)


@pytest.mark.parametrize("params, riesz", [
    ({"alpha_plus": 0.5, "alpha_minus": 0.8}, "holds"),
    ({"alpha_plus": 0.3, "alpha_minus": 0.3}, "fails"),
])
def test_riesz_for_small_indices(params, riesz):
    sim = C.similarity_and_riesz(K.get_problem("log-weight", **params))
    assert sim.riesz.status == riesz


def test_similarity_full_interval_case():
    sim = C.similarity_and_riesz(K.get_problem("log-weight", alpha_plus=2.0, alpha_minus=1.5))
    assert sim.status.status == "holds"


def test_similarity_interior_balanced_fails():
    sim = C.similarity_and_riesz(K.get_problem("log-weight", alpha_plus=1.0, alpha_minus=1.0,
                                               b_plus=0.5, b_minus=-0.5))
    assert sim.status.status == "fails"
    assert sim.zero.case == "a"


def test_kac_krein_examples():
    (l1, r1), v = C.kac_krein_identity_check(ProblemSpec(-1.0, 1.0, ONE, ONE, ONE, ONE), "+")
    assert (l1, r1) == pytest.approx((0.5, 0.5), rel=1e-12) and v.status == "holds"
    (l2, r2), _ = C.kac_krein_identity_check(ProblemSpec(-1.0, 1.0, PowerLogTerm(1.0, -0.5), ONE, ONE, ONE), "+")
    assert (l2, r2) == pytest.approx((2 / 3, 2 / 3), rel=1e-10)


def test_kac_krein_needs_integrable_weight():
    with pytest.raises(weyl.NotApplicable):
        C.kac_krein_identity_check(K.get_problem("log-weight"), "+")


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-0.9, 3.0))
def test_kac_krein_power_weights(a):
    p = ProblemSpec(-1.0, 1.0, PowerLogTerm(1.0, a), ONE, ONE, ONE)
    (left, right), v = C.kac_krein_identity_check(p, "+")
    assert left == pytest.approx(1 / (a + 2), rel=1e-8)
    assert right == pytest.approx(1 / (a + 2), rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(vals=st.lists(st.floats(0.1, 100.0), min_size=12, max_size=40), c=st.floats(1e-3, 1e3))
def test_boundedness_verdict_is_scale_free(vals, c):
    lnt = np.linspace(0.0, 10.0, len(vals))
    v = np.array(vals)
    assert C.boundedness_verdict(lnt, v).status == C.boundedness_verdict(lnt, c * v).status


@settings(max_examples=20, deadline=None)
@given(p=st.floats(0.3, 3.0), n=st.integers(12, 40))
def test_boundedness_verdict_power_growth_fails(p, n):
    lnt = np.linspace(1.0, 12.0, n)
    assert C.boundedness_verdict(lnt, np.exp(p * lnt)).status == "fails"
    assert C.boundedness_verdict(lnt, np.full(n, 3.0)).status == "holds"

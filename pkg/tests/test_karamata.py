
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarsl import karamata as KA
from polarsl.coeffs import ConstExpr, PowerLogTerm
from polarsl.karamata import Handle


def power(a, regime="zero_plus"):
    return Handle.from_expr(PowerLogTerm(1.0, a), regime)


def test_slowly_varying_examples():
    assert KA.is_slowly_varying(KA.neglog_inv_handle()).status == "holds"
    assert KA.is_slowly_varying(power(0.3)).status == "fails"
    assert KA.is_slowly_varying(KA.loglog_cosine_handle()).status == "holds"


def test_positively_increasing_examples():
    assert KA.is_positively_increasing(power(0.5)).status == "holds"
    assert KA.is_positively_increasing(KA.neglog_inv_handle()).status == "fails"
    assert KA.is_positively_increasing(KA.staircase_handle()).status == "fails"


def test_positively_increasing_needs_monotone_input():
    wobble = Handle.from_callable(lambda x: 2.0 + np.sin(1.0 / np.asarray(x)), "zero_plus")
    with pytest.raises(KA.PreconditionError):
        KA.is_positively_increasing(wobble)


@pytest.mark.parametrize("fn, gamma, alpha", [(PowerLogTerm(1.0, 2.0), 1.0, 2.0), (ConstExpr(1.0), 1.0, 0.0)])
def test_rv_index_exact_cases(fn, gamma, alpha):
    est, v = KA.rv_index_estimate(Handle.from_expr(fn, "zero_plus"), gamma)
    assert est == pytest.approx(alpha, abs=1e-9)
    assert v.evidence["L"] == pytest.approx(1.0 / (gamma + alpha), rel=1e-10)


def test_rv_index_slowly_varying_loose():
    est, _ = KA.rv_index_estimate(KA.neglog_inv_handle(), 1.0)
    assert abs(est) < 0.1


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.05, 3.0), g=st.floats(0.2, 3.0))
def test_rv_index_recovers_power(a, g):
    est, v = KA.rv_index_estimate(power(a), g)
    assert est == pytest.approx(a, abs=1e-6)


def test_stieltjes_examples():
    for a in (1.0, 2.0):
        v = KA.stieltjes_condition_check(lambda x, a=a: np.asarray(x, dtype=float) ** a, alpha=a)
        assert v.status == "holds"
        assert v.evidence["limit_estimate"] == pytest.approx(a / (1 + a), abs=1e-9)


def test_stieltjes_slowly_varying_weight_profile():
    # W(x) = (-ln x)^-1/2 against g = R = id: limit 0 (index 0)
    W = lambda x: (-np.log(np.asarray(x, dtype=float))) ** -0.5
    v = KA.stieltjes_condition_check(W, alpha=0.0)
    assert v.status in ("holds", "inconclusive")
    assert abs(v.evidence["limit_estimate"]) < 0.2
    assert np.all(np.diff(np.abs(v.evidence["S"])) < 0)


def test_representation_check():
    assert KA.karamata_rep_check(KA.ln_handle()).status == "holds"
    ident = Handle.from_callable(lambda x: np.asarray(x, dtype=float), "plus_infinity")
    assert KA.karamata_rep_check(ident).status == "fails"
    assert KA.karamata_rep_check(KA.loglog_cosine_handle()).status == "holds"


def test_rep_check_epsilon_is_inverse_log():
    v = KA.karamata_rep_check(KA.ln_handle())
    depth = v.evidence["depth"]
    assert v.evidence["eps"] == pytest.approx(1.0 / depth, rel=1e-12)


def _sq(shift=0.0, scale=1.0):
    return Handle.from_callable(lambda x: scale * np.asarray(x, dtype=float) ** 2 + shift * np.asarray(x), "plus_infinity")


def test_equivalence_search():
    f, g = KA.loglog_sine_pair()
    wit = KA.seq_equivalence_search(f, g)
    assert wit is not None and wit.coord == "loglog"
    # the witnesses sit on multiples of pi, where sin vanishes
    assert np.max(np.abs(np.sin(wit.points))) < 1e-9
    same = KA.seq_equivalence_search(KA.ln_handle(), KA.ln_handle())
    assert same is not None
    lin, dbl = (Handle.from_callable(lambda x, c=c: c * np.asarray(x, dtype=float), "plus_infinity") for c in (1, 2))
    assert KA.seq_equivalence_search(lin, dbl) is None


def test_inverse_equivalence():
    f, g = _sq(), _sq(shift=1.0)
    v = KA.inverse_equivalence_check(f, g, KA.seq_equivalence_search(f, g), 2.0)
    assert v.status == "holds"
    # analytic inverses sqrt(y) and (-1 + sqrt(1 + 4y))/2
    pts = v.evidence["points"]
    s = np.exp(-pts)  # 1/sqrt(y), keeps the ratio finite for huge y
    expect = 2.0 / (np.sqrt(4.0 + s * s) - s)
    assert v.evidence["inverse_ratio"] == pytest.approx(expect, rel=1e-9)
    lin = Handle.from_callable(lambda x: np.asarray(x, dtype=float), "plus_infinity")
    assert KA.inverse_equivalence_check(lin, lin, KA.seq_equivalence_search(lin, lin), 1.0).status == "holds"
    dbl = Handle.from_callable(lambda x: 2 * np.asarray(x, dtype=float), "plus_infinity")
    with pytest.raises(KA.PreconditionError):
        KA.inverse_equivalence_check(lin, dbl, KA.seq_equivalence_search(lin, dbl), 1.0)


def test_staircase_values():
    # flats [n^2, n^2 + n] at n(n+1)/2, unit slope in between
    assert KA.staircase_phi(np.array([0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 7.5, 9.0])).tolist() == \
        [0.0, 1.0, 1.0, 2.0, 3.0, 3.0, 4.5, 6.0]


@settings(max_examples=50, deadline=None)
@given(v=st.integers(1, 10 ** 6), c=st.integers(1, 5))
def test_staircase_increment_matches_direct_difference(v, c):
    direct = KA.staircase_phi(np.array(float(v + c))) - KA.staircase_phi(np.array(float(v)))
    assert KA._staircase_increment(float(v), float(c)) == pytest.approx(float(direct), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.25, 3.0))
def test_pure_power_is_never_slowly_varying(a):
    assert KA.is_slowly_varying(power(a)).status == "fails"
    assert KA.is_positively_increasing(power(a)).status == "holds"

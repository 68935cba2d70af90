import math

import numpy as np
import pytest

from polarsl import catalog as K
from polarsl import eigensolver as E
from polarsl.coeffs import ConstExpr, ProblemSpec
from polarsl.weyl import NotApplicable

ONE = ConstExpr(1.0)
UNIT = ProblemSpec(-1.0, 1.0, ONE, ONE, ONE, ONE)
# smallest positive root of tan t = tanh t, squared (mpmath, 30 digits)
LAM1 = 15.418205716980061


def closed_char(lam):
    k = math.sqrt(lam)
    return k * (math.cos(k) * math.sinh(k) - math.sin(k) * math.cosh(k))


@pytest.fixture(scope="module")
def sgn_spectrum(sgn):
    return E.eigenvalues(sgn, (-100.0, 100.0))


def test_char_function_zeros(sgn):
    assert abs(E.char_function(sgn, LAM1).D) < 1e-6
    assert abs(E.char_function(sgn, 1e-8).D) < 1e-6


def test_char_function_sign_tracks_closed_form(sgn):
    lams = [1.0, 5.0, 14.0, 17.0, 40.0, 80.0, 100.0, 130.0]
    ratios = [E.char_function(sgn, t).D / closed_char(t) for t in lams]
    assert all(r > 0 for r in ratios) or all(r < 0 for r in ratios)


def test_sgn_spectrum_is_symmetric(sgn_spectrum):
    pos = [e.lam for e in sgn_spectrum.positive]
    neg = sorted(-e.lam for e in sgn_spectrum.negative)
    assert pos[0] == pytest.approx(LAM1, rel=1e-9)
    assert pos == pytest.approx(neg, rel=1e-9)
    assert sgn_spectrum.counts["zero"] == 1


def test_sgn_zero_carries_jordan_chain(sgn_spectrum):
    zero = next(e for e in sgn_spectrum.eigenvalues if e.sign_class == "zero")
    assert "length 2" in zero.multiplicity_note
    assert sgn_spectrum.kernel.chain_length == 2


def test_krein_signs(sgn_spectrum):
    for e in sgn_spectrum.eigenvalues:
        if e.sign_class == "positive":
            assert e.krein_norm > 0
        elif e.sign_class == "negative":
            assert e.krein_norm < 0


def test_empty_window(sgn):
    rep = E.eigenvalues(sgn, (1.0, 10.0), with_kernel=False)
    assert rep.eigenvalues == []


def test_neumann_unit_interval():
    rep = E.neumann_eigenvalues(UNIT, (-1.0, 100.0), "+")
    lams = [e.lam for e in rep.eigenvalues]
    assert lams == pytest.approx([0.0, math.pi ** 2, 4 * math.pi ** 2, 9 * math.pi ** 2], abs=1e-8)


def test_fd_oracle_agrees_with_shooting(sgn_spectrum, sgn):
    fd = E.fd_oracle(sgn, n_points=1000, count=6)
    pos = sorted(v for v in fd.eigenvalues if v > 1.0)[:2]
    ref = [e.lam for e in sgn_spectrum.positive][:2]
    assert pos == pytest.approx(ref, rel=1e-3)


@pytest.mark.parametrize("alpha, beta, dim, chain", [(2.0, 1.0, 1, 1), (1.0, 1.0, 1, 2)])
def test_kernel_scaled_reflection(alpha, beta, dim, chain):
    rep = E.kernel_analysis(K.get_problem("scaled-reflection", alpha=alpha, beta=beta))
    assert (rep.kernel_dim, rep.chain_length) == (dim, chain)


def test_kernel_empty_for_log_weight():
    rep = E.kernel_analysis(K.get_problem("log-weight", alpha_plus=1.0, alpha_minus=1.0))
    assert (rep.kernel_dim, rep.chain_length) == (0, 0)


def test_singular_endpoint_needs_truncation():
    p = K.get_problem("log-weight", alpha_plus=1.0, alpha_minus=1.0)
    with pytest.raises(NotApplicable):
        E.char_function(p, 3.0)
    smp = E.char_function(p, 3.0, E.EigenConfig(force_truncate=True))
    assert smp.approximate and np.isfinite(smp.D)

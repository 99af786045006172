from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fsplab import profiles, quadrature as q
from fsplab.errors import AUnbounded, QuadratureDivergent


def _pi_exp_inverse(s: float) -> float:
    # P = exp(-1/s) on (0, 1], tail 1/P(1) = e:  P*I = e^{-1/s} (Ei(1/s) - Ei(1) + e)
    s = mp.mpf(s)
    return float(mp.exp(-1 / s) * (mp.ei(1 / s) - mp.ei(1) + mp.e))


@pytest.mark.parametrize("s", [0.9, 0.5, 0.1, 0.02, 0.005, 1e-3])
def test_pi_exp_inverse_against_exponential_integral(s):
    prof = profiles.exp_inverse(1.0)
    assert q.pi_values(prof, [s])[0] == pytest.approx(_pi_exp_inverse(s), rel=1e-9)


def test_pi_values_order_independent():
    prof = profiles.exp_inverse(1.0)
    s = np.array([0.3, 0.01, 0.7, 0.01, 0.1])
    v = q.pi_values(prof, s)
    assert v[1] == v[3]
    np.testing.assert_allclose(v, [_pi_exp_inverse(x) for x in s], rtol=1e-9)


@given(st.floats(0.2, 3.0), st.floats(1e-4, 0.9))
def test_pi_power_additive_tail(p, s):
    # P = s^p, I = (s^-p - 1)/p + 1  =>  P*I = (1 - s^p)/p + s^p
    prof = profiles.power(p, tail_policy="additive-constant")
    expect = (1.0 - s ** p) / p + s ** p
    assert q.pi_values(prof, [s])[0] == pytest.approx(expect, rel=1e-9)


def test_pi_from_anchor_matches_direct():
    prof = profiles.exp_inverse(1.0)
    b = 0.2
    pb = q.pi_values(prof, [b])[0]
    assert q.pi_from_anchor(prof, 0.05, b, pb) == pytest.approx(_pi_exp_inverse(0.05), rel=1e-9)
    assert q.pi_from_anchor(prof, 0.3, b, pb) == pb


def test_log_cumulative_of_power():
    # int_0^s t^2 dt = s^3/3
    s = np.array([0.1, 0.5, 1.0])
    got = q.log_cumulative(lambda t, k: 2.0 * math.log(t), s)
    np.testing.assert_allclose(got, np.log(s ** 3 / 3.0), rtol=1e-10)
    assert q.log_cumulative(lambda t, k: 0.0, [0.0])[0] == -math.inf


def test_log_cumulative_survives_underflow():
    # integrand exp(-1/t): the value near 1e-3 is ~exp(-1000), far below the double range
    got = q.log_cumulative(lambda t, k: -1.0 / t, [1e-3, 0.5])
    assert np.all(np.isfinite(got))
    # int_0^s e^{-1/t} dt ~ s^2 e^{-1/s} for small s
    assert got[0] == pytest.approx(2 * math.log(1e-3) - 1e3, abs=0.01)


def test_quad_checked_raises():
    with pytest.raises(QuadratureDivergent):
        q.quad_checked(lambda t: 1.0 / t, 0.0, 1.0)
    assert q.quad_checked(math.sin, 1.0, 1.0) == 0.0


def test_limit_at_zero():
    est = q.limit_at_zero(lambda s: 2.0 + 3.0 * np.sqrt(s), 0.5, levels=20)
    assert est.contains(2.0)
    assert not est.contains(2.1)
    const = q.limit_at_zero(lambda s: np.full_like(s, 0.25), 0.5)
    assert const.value == 0.25 and const.band == 0.0
    assert q.limit_at_zero(lambda s: 1.0 / s, 0.5).value == math.inf


def test_sup_on_interval():
    val, arg = q.sup_on_interval(lambda s: -(np.log(s) + 2.0) ** 2, 1e-3, 1.0)
    assert val == pytest.approx(0.0, abs=1e-12)
    assert arg == pytest.approx(math.exp(-2.0), rel=1e-4)
    with pytest.raises(AUnbounded):
        q.sup_on_interval(lambda s: np.full_like(s, np.inf), 0.1, 1.0)

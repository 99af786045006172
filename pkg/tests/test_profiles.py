from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fsplab import profiles
from fsplab.errors import DomainError, NotDegenerate, RatioUnbounded


@given(st.floats(0.1, 4.0), st.floats(1e-6, 1.0))
def test_power_log_P_matches_direct(p, s):
    prof = profiles.power(p)
    assert prof.log_P(s) == pytest.approx(p * math.log(s), rel=1e-14)
    assert prof.elasticity(s) == p


def test_profiles_vanish_at_zero():
    z = profiles.zeta_loglinear(1.0)
    for prof in (profiles.power(0.5), profiles.exp_inverse(1.0), profiles.zeta_bounded(z),
                 profiles.zeta_unbounded(profiles.zeta_loglinear(1.0, 0.5))):
        assert prof.log_P(0.0) == -math.inf
        assert prof.P(0.0) == 0.0


def test_exp_inverse_stays_in_log_domain():
    prof = profiles.exp_inverse(1.0)
    # exp(-1e4) underflows, its log does not
    assert prof.log_P(1e-4) == pytest.approx(-1e4)
    assert prof.P(1e-4) == 0.0
    assert prof.elasticity(0.5) == pytest.approx(2.0)
    prof.validate()


def test_constant_zeta_is_a_power_law():
    z = profiles.zeta_bounded(profiles.zeta_loglinear(1.5), M=2.0)
    s = np.geomspace(1e-5, 2.0, 9)
    np.testing.assert_allclose(z.log_P(s), 1.5 * np.log(s / 2.0), rtol=1e-13, atol=1e-14)
    assert z.meta["zeta_bounds"] == [1.5, 1.5]


def test_loglinear_zeta_integral_against_quadrature():
    z = profiles.zeta_loglinear(0.7, 0.3)
    numeric = profiles.ZetaForm(z.fn).integrate(1e-3, 1.0)
    assert z.integrate(1e-3, 1.0) == pytest.approx(numeric, rel=1e-10)


def test_log_P_drop_consistent():
    for prof in (profiles.power(2.0), profiles.exp_inverse(0.5),
                 profiles.zeta_bounded(profiles.zeta_loglinear(2.0))):
        assert prof.log_P_drop(0.1, 0.4) == pytest.approx(prof.log_P(0.1) - prof.log_P(0.4),
                                                         rel=1e-12)


def test_default_tail_continues_P_linearly():
    prof = profiles.exp_inverse(1.0)
    assert prof.resolved_tail() == pytest.approx(math.e)
    assert profiles.power(1.0, tail_policy="additive-constant", I_tail=2.0).resolved_tail() == 2.0
    assert profiles.power(1.0).resolved_tail() == 0.0


def test_domain_errors():
    prof = profiles.power(1.0, tail_policy="additive-constant")
    with pytest.raises(DomainError):
        prof.log_P(-0.1)
    with pytest.raises(DomainError):
        prof.log_P(1.5)
    with pytest.raises(DomainError):
        profiles.exp_inverse(1.0).elasticity(-1.0)


@pytest.mark.parametrize("kw", [
    dict(kind="nope"),
    dict(kind="power", p=-1.0),
    dict(kind="exp-inverse", gamma=0.0),
    dict(kind="exp-inverse", tail_policy="closed-form"),
    dict(kind="zeta-bounded"),
    dict(kind="power", M=0.0),
    dict(kind="power", I_tail=-1.0),
])
def test_bad_construction(kw):
    with pytest.raises(ValueError):
        profiles.DegeneracyProfile(**kw)


def test_tabulated_validation():
    with pytest.raises(ValueError):
        profiles.tabulated([0.2, 0.1], [1.0, 2.0])
    tab = profiles.tabulated([0.25, 0.5, 1.0], [0.25, 0.5, 1.0])
    # linear interpolation through the origin reproduces P(s) = s
    assert tab.P(0.1) == pytest.approx(0.1)
    assert tab.elasticity(0.7) == pytest.approx(1.0)


def test_validate_checks_upper_bound():
    with pytest.raises(RatioUnbounded):
        profiles.power(1.0, M=4.0).validate(C=2.0)
    profiles.power(1.0, M=4.0).validate(C=4.0)


def test_zeta_unbounded_requires_monotone_zeta0():
    up = profiles.ZetaForm(lambda s: 1.0 + s)
    with pytest.raises(ValueError):
        profiles.zeta_unbounded(up)
    prof = profiles.zeta_unbounded(profiles.zeta_loglinear(1.0, 1.0))
    # s |zeta0'| / zeta0 = d / zeta <= 1 for c = d = 1
    assert prof.meta["C0"] <= 1.0 + 1e-9


def test_reduce_hypothesis():
    s = np.linspace(0.01, 1.0, 50)
    prof = profiles.reduce_hypothesis(lambda v: 2.0, lambda v: 2.0 * v * v, s)
    assert prof.kind == "tabulated"
    assert prof.P(0.5) == pytest.approx(0.25, rel=1e-3)
    with pytest.raises(NotDegenerate):
        profiles.reduce_hypothesis(lambda v: 1.0, lambda v: 1.0 + v, s)
    with pytest.raises(RatioUnbounded):
        profiles.reduce_hypothesis(lambda v: 1.0, lambda v: 5.0 * v, s, C=1.0)
    with pytest.raises(ValueError):
        profiles.reduce_hypothesis(lambda v: 0.0, lambda v: v, s)


def test_calibration_profile():
    prof = profiles.calibration(2.0)
    assert prof.is_calibration
    assert prof.P(0.3) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        profiles.calibration(0.0)

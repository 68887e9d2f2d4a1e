import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradpert.conditions import (ControlPair, Rate, TabulatedF, default_sample_set, estimate_class_P,
                                 kato_class_indicator, kato_functional, split_bound,
                                 time_integrated_hat, to_class_N)
from gradpert.drift import DriftField
from gradpert.kernel import KernelParams

C = DriftField.constant(0.3)
P = KernelParams(1.5)


@pytest.fixture(scope="module")
def class_p():
    return estimate_class_P(C, P, 0.25)


def test_kato_zero_drift():
    assert kato_functional(0.0, 0.0, 1.0, 0.5, DriftField.zero(), P) == 0.0


def test_kato_constant_against_nested_quadrature():
    # scipy quad over z (split at 0, y, +-1, +-10) inside quad over u
    ref = 0.3652435728252883
    assert kato_functional(0.0, 0.0, 0.5, 0.1, C, P) == pytest.approx(ref, rel=1e-5)


def test_kato_self_similar_growth():
    # a = 0, x = y: doubling the horizon multiplies the functional by 2^(1 - 1/alpha)
    k1 = kato_functional(0.0, 0.0, 0.4, 0.0, C, P)
    k2 = kato_functional(0.0, 0.0, 0.8, 0.0, C, P)
    assert k2 / k1 == pytest.approx(2 ** (1 / 3), rel=1e-3)


@given(c=st.floats(0.01, 5.0))
def test_kato_homogeneous_in_drift(c):
    k = kato_functional(0.0, -0.5, 0.3, 0.5, C, P)
    assert kato_functional(0.0, -0.5, 0.3, 0.5, C.scaled(c / 0.3), P) == pytest.approx(c / 0.3 * k, rel=1e-12)


def test_kato_power_law_finite(mixed):
    b = DriftField.power_law(0.1, mixed)
    for x, y in [(0.0, 0.0), (0.0, 0.5), (-0.5, 0.5), (2.0, -2.0)]:
        for t in (1e-3, 1.0):
            v = kato_functional(0.0, x, t, y, b, mixed)
            assert math.isfinite(v) and v > 0


def test_kato_needs_forward_time():
    with pytest.raises(ValueError):
        kato_functional(1.0, 0.0, 1.0, 0.0, C, P)


def test_class_p_zero_drift_capped():
    r = estimate_class_P(DriftField.zero(), P, 0.25)
    assert r.capped and r.found and r.h == r.bracket[1]


def test_class_p_constant(class_p):
    assert class_p.found and not class_p.capped
    assert class_p.functional_at_h <= 0.25
    assert class_p.functional_at_h == pytest.approx(0.25, rel=0.05)
    def worst(h):
        return max(kato_functional(0.0, x, h, y, C, P) for x, y in default_sample_set())
    assert worst(class_p.h) == pytest.approx(class_p.functional_at_h, rel=1e-4)
    assert worst(1.01 * class_p.h) > 0.25


def test_class_n_definition_holds(class_p):
    pair = to_class_N(0.25, class_p.h)
    for t in (0.5 * class_p.h, 3.0 * class_p.h, 0.5):
        for x, y in [(0.0, 0.0), (-0.5, 0.5), (0.5, -2.0)]:
            assert kato_functional(0.0, x, t, y, C, P) <= (pair.eta + pair.Q(0.0, t)) * (1 + 5e-6)


def test_to_class_n():
    assert to_class_N(0.25, 0.5).q_form.rate == 0.5
    assert to_class_N(0.1, 1.0).q_form.rate == pytest.approx(0.1)
    pair = to_class_N(0.25, 0.5)
    assert pair.Q(0.0, 0.3) + pair.Q(0.3, 1.1) == pytest.approx(pair.Q(0.0, 1.1), rel=1e-15)
    with pytest.raises(ValueError):
        to_class_N(0.0, 1.0)


def test_split_bound_constant_closed_form():
    # int_0^h (u^-1/alpha + (h-u)^-1/alpha) |c| du = 2 |c| h^(1/3) / (1/3)
    for h in (0.05, 0.5, 2.0):
        sb = split_bound(0.0, 0.0, h, 0.3, C, P)
        assert sb.value == pytest.approx(2 * 0.3 * 3 * h ** (1 / 3), rel=1e-6)


def test_split_ratio_stable_across_horizons():
    r = [split_bound(0.0, 0.0, h, 0.2, C, P).ratio for h in (0.05, 0.2, 0.8)]
    m = np.mean(r)
    assert all(abs(v / m - 1) < 0.2 for v in r)


def test_split_bound_zero_and_power_law(mixed):
    assert split_bound(0.0, 0.0, 1.0, 0.0, DriftField.zero(), P).value == 0.0
    v = split_bound(0.0, 0.0, 0.5, 0.5, DriftField.power_law(0.1, mixed), mixed)
    assert math.isfinite(v.value) and v.value > v.kato


def test_time_integrated_hat(mixed):
    vals = [time_integrated_hat(t, 1.0, mixed) for t in (0.1, 0.5, 1.0, 4.0)]
    assert np.all(np.diff(vals) > 0)
    assert vals[2] < 1.0
    lo, hi = time_integrated_hat(1.0, 1e-3, mixed), time_integrated_hat(1.0, 1e-2, mixed)
    assert math.log(hi / lo) / math.log(10.0) == pytest.approx(1.5 - 2.0, abs=0.15)
    with pytest.raises(ValueError):
        time_integrated_hat(1.0, 0.0, mixed)
    with pytest.raises(ValueError):
        time_integrated_hat(1.0, 1.0, KernelParams(1.5, 1.2, 2.0))


def test_kato_indicator(mixed):
    assert kato_class_indicator(C, 1.5).decays
    b = DriftField.power_law(0.1, mixed)
    good = kato_class_indicator(b, 1.5)
    bad = kato_class_indicator(b, 1.2)
    assert good.decays and good.slope > 0
    assert not bad.decays
    assert all(np.diff(good.values) <= 0)


def test_rate_and_tabulated():
    assert Rate(0.5).Q(0.0, 2.0) == 1.0
    with pytest.raises(ValueError):
        Rate(-1.0)
    f = TabulatedF((0.0, 0.5, 1.0), (0.0, 0.5, 0.7))
    assert (f.F(0.5), f.left_limit(0.5), f.F(-1.0), f.F(9.0)) == (0.5, 0.0, 0.0, 0.7)
    lin = TabulatedF((0.0, 1.0), (0.0, 2.0), "linear")
    assert lin.F(0.25) == lin.left_limit(0.25) == 0.5
    assert ControlPair(0.2, lin).Q(0.25, 0.75) == pytest.approx(1.0)
    for bad in [((0.0, 0.0), (0.0, 1.0)), ((0.0, 1.0), (1.0, 0.0)), ((0.0,), (0.0, 1.0))]:
        with pytest.raises(ValueError):
            TabulatedF(*bad)
    with pytest.raises(ValueError):
        ControlPair(-0.1, Rate(1.0))


@given(a=st.floats(-1.0, 3.0), b=st.floats(-1.0, 3.0))
def test_tabulated_nondecreasing(a, b):
    f = TabulatedF((0.0, 0.3, 1.0, 2.0), (0.1, 0.2, 0.9, 1.0))
    lo, hi = sorted((a, b))
    assert f.F(lo) <= f.F(hi) and f.left_limit(hi) <= f.F(hi)


def test_default_sample_set():
    s = default_sample_set()
    assert len(s) == 49 and (0.0, 0.0) in s and (2.0, 2.0) in s and (-0.1, 0.5) in s

import numpy as np
import pytest

from gradpert.conditions import kato_functional
from gradpert.drift import DriftField
from gradpert.errors import DivergenceDetected
from gradpert.kernel import KernelParams, SpaceTimeArg, eval_gradient
from gradpert.quadrature import GridSpec
from gradpert.series import check_ck, check_order_ck, series_sum, series_term
from gradpert.table import get_table

G = GridSpec(n_time=16, n_space=201, L=10.0, tol=1e-6)
C = DriftField.constant(0.3)
P = KernelParams(1.5)


def test_order_zero_is_base_density():
    y = np.array([-1.0, 0.0, 0.4])
    np.testing.assert_array_equal(series_term(0, 0.2, 0.1, 0.7, y, C, P, G),
                                  get_table(P).density(0.5, y - 0.1))


@pytest.mark.parametrize("x,y", [(0.0, 0.3), (-0.5, 0.5), (0.5, -1.0)])
def test_first_order_constant_drift(x, y):
    # p_1 = -c (t - s) d/dw p(t - s, y - x)
    ref = -0.3 * 0.5 * eval_gradient(P, SpaceTimeArg(0.5, y - x))[0]
    assert series_term(1, 0.0, x, 0.5, y, C, P, G) == pytest.approx(ref, rel=1e-3)


def test_first_order_sign_follows_translation():
    # y - x aligned with c: the translated kernel grows there, so p_1 > 0
    assert series_term(1, 0.0, 0.0, 0.5, 0.4, C, P, G) > 0
    assert series_term(1, 0.0, 0.0, 0.5, -0.4, C, P, G) < 0


def test_zero_drift():
    r = series_sum(5, 0.0, 0.0, 1.0, np.array([-0.5, 0.5]), DriftField.zero(), P, G)
    np.testing.assert_array_equal(r.value, get_table(P).density(1.0, np.array([-0.5, 0.5])))
    assert all(np.all(t == 0) for t in r.terms[1:])
    assert r.tail_ratio == 0.0 and r.converged
    assert series_term(3, 0.0, 0.0, 1.0, 0.2, DriftField.zero(), P, G) == 0.0


@pytest.mark.parametrize("beta,a", [(None, 0.0), (1.2, 1.0)])
def test_constant_drift_is_translation(beta, a):
    p = KernelParams(1.5, beta, a)
    y = np.array([-1.0, -0.3, 0.0, 0.3, 1.0])
    r = series_sum(8, 0.0, 0.0, 0.5, y, C, p, G)
    exact = get_table(p).density(0.5, y - 0.15)
    np.testing.assert_allclose(r.value, exact, rtol=1e-3)
    assert r.tail_ratio < 0.5


def test_tail_ratio_below_measured_eta():
    r = series_sum(8, 0.0, 0.0, 0.5, 0.0, C, P, G)
    eta = max(kato_functional(0.0, x, 0.5, y, C, P) for x in (-0.5, 0.0, 0.5) for y in (-0.5, 0.0, 0.5))
    assert r.tail_ratio <= eta + 0.05


def test_first_order_consistency_in_drift_strength():
    # (p~[c b] - p) / c -> p_1[b]
    b = DriftField.power_law(0.1, P)
    y = np.array([-0.6, 0.25, 0.9])
    small = b.scaled(1e-3)
    diff = (series_sum(6, 0.0, 0.0, 0.4, y, small, P, G).value - get_table(P).density(0.4, y)) / 1e-3
    np.testing.assert_allclose(diff, series_term(1, 0.0, 0.0, 0.4, y, b, P, G), rtol=1e-2)


def test_terms_scale_with_drift_power():
    b = DriftField.power_law(0.1, P)
    for n in (1, 2, 3):
        a = series_term(n, 0.0, 0.0, 0.4, 0.5, b.scaled(0.5), P, G)
        assert a == pytest.approx(0.5**n * series_term(n, 0.0, 0.0, 0.4, 0.5, b, P, G), rel=1e-9)


def test_order_ck_residuals():
    assert check_order_ck(0, 0.0, 0.2, 0.5, 0.0, 0.3, C, P, G) < 1e-4 * get_table(P).density(0.5, 0.3)
    p1 = abs(series_term(1, 0.0, 0.0, 0.5, 0.3, C, P, G))
    assert check_order_ck(1, 0.0, 0.2, 0.5, 0.0, 0.3, C, P, G) <= 1e-3 * p1
    assert check_order_ck(2, 0.0, 0.2, 0.5, 0.0, 0.3, DriftField.zero(), P, G) == 0.0
    with pytest.raises(ValueError):
        check_order_ck(1, 0.0, 0.6, 0.5, 0.0, 0.3, C, P, G)


def test_full_ck():
    p = get_table(P).density(0.5, 0.3)
    base = check_ck(0.0, 0.2, 0.5, 0.0, 0.3, DriftField.zero(), P, G, 4)
    assert base < 1e-6 * p
    assert check_ck(0.0, 0.2, 0.5, 0.0, 0.3, C, P, G, 0) == pytest.approx(base, abs=1e-15)
    tab = get_table(P)
    oracle = lambda a, xa, b, yb: tab.density(b - a, np.asarray(yb) - np.asarray(xa) - 0.3 * (b - a))
    assert check_ck(0.0, 0.2, 0.5, 0.0, 0.3, C, P, G, 8, kernel=oracle) <= 2e-3 * p
    assert check_ck(0.0, 0.2, 0.5, 0.0, 0.3, C, P, G, 8) <= 2e-3 * p


def test_power_law_series_off_singularity():
    b = DriftField.power_law(0.1, P)
    y = np.array([-0.7, 0.4, 1.2])
    # the drift singularity slows spatial convergence; compare against a fine lattice
    vals = [series_sum(6, 0.0, 0.3, 0.3, y, b, P, GridSpec(n_time=16, n_space=n, L=10.0)).value
            for n in (801, 1601, 3201)]
    assert all(np.all(np.isfinite(v)) for v in vals)
    np.testing.assert_allclose(vals[0], vals[2], rtol=3e-4)
    np.testing.assert_allclose(vals[1], vals[2], rtol=2e-4)


def test_divergence_detected():
    with pytest.raises(DivergenceDetected):
        series_sum(12, 0.0, 0.0, 1.0, 0.0, DriftField.power_law(0.1, P).scaled(40.0), P, G)


def test_series_preconditions():
    with pytest.raises(ValueError):
        series_term(-1, 0.0, 0.0, 1.0, 0.0, C, P, G)
    with pytest.raises(ValueError):
        series_sum(2, 0.0, 0.0, 1.0, 0.0, C, KernelParams(0.8), G)
    with pytest.raises(ValueError):
        series_term(1, 0.0, 0.0, 0.5, 50.0, C, P, G)

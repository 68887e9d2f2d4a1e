import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import levy_stable

from gradpert.inequalities import (ScanGrid, envelope_ratio, factor_inequality_check, gradient_ratio,
                                   php_ratio, scan_3p_hat, scan_3p_plain, scan_envelope,
                                   scan_gradient_bound, scan_php, three_p_hat_ratio,
                                   three_p_plain_ratio)
from gradpert.kernel import KernelParams, envelope

SMALL = ScanGrid(t_range=(1e-2, 1e2), x_range=(1e-2, 50.0), levels=(9, 17), pair_levels=(3, 5))


def _stable0(alpha, t):
    return levy_stable.pdf(0.0, alpha, 0.0, scale=t ** (1 / alpha))


@pytest.mark.parametrize("u", [0.01, 1.0, 30.0])
def test_diagonal_three_p(pure, u):
    plain = _stable0(1.5, u) / _stable0(1.5, 2 * u)
    assert three_p_plain_ratio(pure, u, 0.0, u, 0.0) == pytest.approx(plain, rel=1e-6)
    assert plain == pytest.approx(2 ** (1 / 1.5), rel=1e-6)
    assert three_p_hat_ratio(pure, u, 0.0, u, 0.0) == pytest.approx(2 ** (2 / 1.5), rel=1e-6)
    assert php_ratio(pure, u, 0.0, u, 0.0) == pytest.approx(2 ** (1 / 1.5) / 2, rel=1e-6)


def test_gradient_ratio_vanishes_at_origin(pure, mixed):
    for p in (pure, mixed):
        assert gradient_ratio(p, 0.7, 0.0) == pytest.approx(0.0, abs=1e-10)


@given(t=st.floats(1e-2, 1e2), x=st.floats(-30.0, 30.0), lam=st.floats(0.3, 3.0))
def test_gradient_ratio_scale_invariant(pure, t, x, lam):
    a = gradient_ratio(pure, t, x)
    b = gradient_ratio(pure, lam**1.5 * t, lam * x)
    assert b == pytest.approx(a, rel=1e-5, abs=1e-9)


@given(t=st.floats(1e-2, 1e1), x=st.floats(-20.0, 20.0))
def test_envelope_ratio_scaling_in_a(t, x):
    # p^a(t, x) and its envelope transform alike under a -> 1
    p2 = KernelParams(1.5, 1.2, 2.0)
    p1 = KernelParams(1.5, 1.2, 1.0)
    lam = 2.0 ** (1.2 / 0.3)
    assert envelope_ratio(p2, t, x) == pytest.approx(envelope_ratio(p1, lam**1.5 * t, lam * x), rel=1e-6)


def test_envelope_continuous_in_a(pure):
    tiny = KernelParams(1.5, 1.2, 1e-6)
    t = np.geomspace(1e-2, 1e2, 7)[:, None]
    x = np.array([0.0, 0.1, 1.0, 10.0])[None, :]
    assert np.allclose(envelope(tiny, t, x), envelope(pure, t, x), rtol=1e-5)


def test_scans_pure(pure):
    g = scan_gradient_bound(pure, SMALL)
    assert g.stable and 0 < g.sup_ratio < np.inf
    assert g.sup_ratio >= max(g.refinement_history[0], float(np.max(gradient_ratio(pure, 1.0, np.linspace(-5, 5, 101)))) * (1 - 1e-9))
    e = scan_envelope(pure, SMALL)
    assert e.stable and 0 < e.inf_ratio <= e.sup_ratio < np.inf
    h = scan_3p_hat(pure, SMALL)
    assert h.sup_ratio >= 2 ** (2 / 1.5) * (1 - 1e-6)
    assert np.isfinite(scan_3p_plain(pure, SMALL).sup_ratio)
    php = scan_php(pure, SMALL)
    assert np.isfinite(php.sup_ratio) and set(php.details) == {"forward", "swapped"}
    assert php.as_dict()["name"] == "php"


def test_scans_mixed(mixed):
    for fn in (scan_gradient_bound, scan_envelope):
        r = fn(mixed, SMALL)
        assert r.stable and np.isfinite(r.sup_ratio)


def test_factor_inequality(pure, mixed):
    for p in (pure, mixed, KernelParams(1.8, 1.2, 1.0)):
        holds, worst = factor_inequality_check(p, SMALL)
        assert holds and 0.0 < worst <= 1.0 + 1e-12

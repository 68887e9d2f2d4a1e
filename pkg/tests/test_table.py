import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import levy_stable

from gradpert.kernel import KernelParams, SpaceTimeArg, eval_density, eval_gradient, kernel_width
from gradpert.table import KernelTable, ScaledTable, get_table


@given(t=st.floats(1e-6, 1e4), v=st.floats(-1e3, 1e3))
def test_pure_table_matches_scipy(pure, t, v):
    x = v * t ** (1 / 1.5)
    ref = levy_stable.pdf(x, 1.5, 0.0, scale=t ** (1 / 1.5))
    assert get_table(pure).density(t, x) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("beta", [1.2, 0.8])
def test_mixed_table_in_range(beta):
    p = KernelParams(1.5, beta, 1.0)
    tab = get_table(p)
    rng = np.random.default_rng(11)
    for _ in range(25):
        t = 10 ** rng.uniform(-8, 3)
        x = rng.normal() * 10 ** rng.uniform(-2, 2) * kernel_width(p, t)
        arg = SpaceTimeArg(t, x)
        assert tab.density(t, x) == pytest.approx(eval_density(p, arg), rel=1e-6)
        assert tab.gradient(t, x) == pytest.approx(eval_gradient(p, arg)[0], rel=1e-6, abs=1e-300)


@pytest.mark.parametrize("t", [1e-18, 1e-13, 3e-9])
@pytest.mark.parametrize("v", [0.0, 0.8, 5.0, 200.0])
def test_mixed_small_time_extrapolation(mixed, t, v):
    x = v * t ** (1 / 1.5)
    arg = SpaceTimeArg(t, x)
    tab = get_table(mixed)
    assert tab.density(t, x) == pytest.approx(eval_density(mixed, arg), rel=1e-4)
    if v:
        assert tab.gradient(t, x) == pytest.approx(eval_gradient(mixed, arg)[0], rel=5e-4)


def test_beyond_tau_max_falls_back_to_quadrature(mixed):
    tab = get_table(mixed)
    for x in (0.0, 300.0):
        assert tab.density(5e3, x) == pytest.approx(eval_density(mixed, SpaceTimeArg(5e3, x)), rel=1e-9)


def test_scaled_view(mixed):
    p2 = KernelParams(1.5, 1.2, 2.0)
    tab = get_table(p2)
    assert isinstance(tab, ScaledTable) and tab.base is get_table(mixed)
    for t, x in [(0.05, 0.1), (1.0, -2.0), (20.0, 40.0)]:
        assert tab.density(t, x) == pytest.approx(eval_density(p2, SpaceTimeArg(t, x)), rel=1e-6)


def test_tables_are_shared(pure):
    assert get_table(pure) is get_table(KernelParams(1.5, dim=3))
    with pytest.raises(ValueError):
        KernelTable(KernelParams(1.5, dim=2))


@given(t=st.floats(1e-3, 1e2), a=st.floats(-50, 50), b=st.floats(-50, 50))
def test_cdf_monotone_and_symmetric(mixed, t, a, b):
    tab = get_table(mixed)
    lo, hi = sorted((a, b))
    assert tab.cdf(t, lo) <= tab.cdf(t, hi) + 1e-15
    assert tab.cdf(t, a) + tab.cdf(t, -a) == pytest.approx(1.0, abs=1e-12)


def test_cdf_edges(pure):
    tab = get_table(pure)
    assert tab.cdf(1.0, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert tab.cdf(1.0, 1e6) > 1 - 1e-8
    np.testing.assert_array_equal(tab.cdf(0.0, np.array([-1.0, 0.0, 2.0])), [0.0, 0.5, 1.0])


def test_cdf_difference_integrates_density(mixed):
    from scipy import integrate
    tab = get_table(mixed)
    mass = integrate.quad(lambda x: tab.density(0.4, x), 0.2, 1.7, epsrel=1e-12)[0]
    assert tab.cdf(0.4, 1.7) - tab.cdf(0.4, 0.2) == pytest.approx(mass, rel=1e-7)

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradpert.errors import NumericalNonConvergence, TruncationWarning
from gradpert.kernel import KernelParams
from gradpert.quadrature import (GridSpec, SingularWeight, integrate_1d, integrate_line,
                                 integrate_spacetime, line_rule, time_rule, truncation_radius)
from gradpert.table import get_table


def test_integrate_1d_examples():
    assert integrate_1d(lambda x: x * x, 0, 1)[0] == pytest.approx(1 / 3, rel=1e-13)
    assert integrate_1d(math.sin, 0, math.pi)[0] == pytest.approx(2.0, rel=1e-13)
    v, _ = integrate_1d(lambda x: x**-0.5, 0, 1, weight=SingularWeight(0.5))
    assert v == pytest.approx(2.0, rel=1e-10)


def test_integrate_1d_reports_failure():
    with pytest.raises(NumericalNonConvergence):
        integrate_1d(lambda x: 1.0 / x, 0, 1, max_refine=20)


def test_singular_weight_range():
    with pytest.raises(ValueError):
        SingularWeight(1.0)
    assert SingularWeight(0.75).grading() == pytest.approx(4.0)


@given(k=st.integers(0, 11))
def test_time_rule_polynomials(k):
    u, w = time_rule(0.5, 2.0, 3)
    assert np.dot(w, u**k) == pytest.approx((2.0 ** (k + 1) - 0.5 ** (k + 1)) / (k + 1), rel=1e-12)


@pytest.mark.parametrize("sigma", [0.3, 0.5, 2 / 3, 0.75])
def test_time_rule_endpoint_singularity(sigma):
    # the grading turns u^-sigma du into a polynomial in v
    u, w = time_rule(0.0, 1.0, 6, SingularWeight(sigma), ends="left")
    assert np.dot(w, u**-sigma) == pytest.approx(1 / (1 - sigma), rel=1e-12)
    # the two-ended map is smooth but not polynomial in the middle
    u, w = time_rule(0.0, 1.0, 6, SingularWeight(sigma), ends="both")
    assert np.dot(w, u**-sigma) == pytest.approx(1 / (1 - sigma), rel=1e-7)


def test_time_rule_grading_cap():
    # sigma = 0.9 asks for q = 10; the default is capped at 8
    u, w = time_rule(0.0, 1.0, 6, SingularWeight(0.9), ends="left")
    assert np.dot(w, u**-0.9) == pytest.approx(10.0, rel=5e-3)
    u, w = time_rule(0.0, 1.0, 6, SingularWeight(0.9), grading=10.0, ends="left")
    assert np.dot(w, u**-0.9) == pytest.approx(10.0, rel=1e-12)


def test_time_rule_right_end():
    u, w = time_rule(0.0, 2.0, 6, SingularWeight(0.5), ends="right")
    assert np.dot(w, (2.0 - u) ** -0.5) == pytest.approx(2 * math.sqrt(2.0), rel=1e-10)
    assert np.all((u > 0) & (u < 2))


def test_line_rule_narrow_bump_and_tail():
    # a bump 1e-4 wide off-centre plus an algebraic tail beyond L
    w = 1e-4
    f = lambda z: np.exp(-(((z - 0.3) / w) ** 2)) + 1.0 / (1.0 + z * z) ** 2
    val = integrate_line(f, 5.0, centers=(0.3,), widths=(w,))
    assert val == pytest.approx(w * math.sqrt(math.pi) + math.pi / 2, rel=1e-9)


def test_line_rule_weights_positive():
    z, wz = line_rule(3.0, centers=(-1.0, 0.0, 2.0), widths=(1e-6, 0.1, 1.0), tail=False)
    assert np.all(wz > 0)
    assert wz.sum() == pytest.approx(6.0, rel=1e-13)
    assert z.min() > -3.0 and z.max() < 3.0


def test_spacetime_constant_and_singular():
    g = GridSpec(n_time=8, n_space=41, L=1.0, tol=1e-8)
    assert integrate_spacetime(lambda u, z: np.ones(np.broadcast(u, z).shape), 0, 1, g) == pytest.approx(2.0)
    f = lambda u, z: (1.0 - u) ** -0.5 * np.ones(np.broadcast(u, z).shape)
    assert integrate_spacetime(f, 0, 1, g, SingularWeight(0.5)) == pytest.approx(4.0, rel=1e-8)


def test_spacetime_kernel_gradient_product():
    # reference: nested scipy quad, inner over z split at 1 and 10, outer over u split at 1/2
    ref = 0.43762258346038274
    tab = get_table(KernelParams(1.5))
    f = lambda u, z: tab.density(u, z) * np.abs(tab.gradient(1 - u, -z))
    g = GridSpec(n_time=8, n_space=201, L=30.0, tol=1e-6)
    v = integrate_spacetime(f, 0, 1, g, SingularWeight(2 / 3), centers=(0.0,),
                            widths=lambda u: [min(u, 1 - u) ** (1 / 1.5)])
    assert v == pytest.approx(ref, rel=1e-3)
    # the signed product is odd in z
    h = lambda u, z: tab.density(u, z) * tab.gradient(1 - u, -z)
    assert abs(integrate_spacetime(h, 0, 1, g, SingularWeight(2 / 3), centers=(0.0,),
                                   widths=lambda u: [min(u, 1 - u) ** (1 / 1.5)])) < 1e-10


def test_spacetime_nonconvergence():
    # an undeclared endpoint singularity keeps moving under time refinement
    g = GridSpec(n_time=4, n_space=5, L=1.0, tol=1e-10, max_refine=2)
    with pytest.raises(NumericalNonConvergence):
        integrate_spacetime(lambda u, z: u**-0.95 + 0 * z, 0, 1, g)


def test_truncation_warning():
    p = KernelParams(1.5)
    with pytest.warns(TruncationWarning):
        integrate_spacetime(lambda u, z: 0 * u * z, 0, 1, GridSpec(L=1.0), params=p)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate_spacetime(lambda u, z: 0 * u * z, 0, 1, GridSpec(L=1e4, tol=1e-6), params=p)


@given(t=st.floats(1e-3, 10.0), tol=st.floats(1e-10, 1e-2))
def test_truncation_radius_meets_tolerance(t, tol):
    p = KernelParams(1.5, 1.2, 1.0)
    L = truncation_radius(p, t, tol)
    assert t / L**2.5 + t / L**2.2 < tol


def test_gridspec():
    g = GridSpec(n_time=8, n_space=101, L=5.0)
    assert g.h == pytest.approx(0.1)
    r = g.refine()
    assert (r.n_time, r.n_space, r.h) == (16, 201, pytest.approx(0.05))
    for bad in (dict(n_time=2), dict(L=0.0), dict(tol=-1.0), dict(grading_exponent=0.0)):
        with pytest.raises(ValueError):
            GridSpec(**bad)

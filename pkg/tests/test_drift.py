import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradpert.drift import DriftField
from gradpert.kernel import KernelParams, SpaceTimeArg, eval_density


def test_zero_and_constant():
    z = np.linspace(-3, 3, 7)
    np.testing.assert_array_equal(DriftField.zero()(0.5, z), 0.0)
    np.testing.assert_array_equal(DriftField.constant(-0.3)(np.array([[0.1], [2.0]]), z), -0.3)
    assert DriftField.constant(0.3).homogeneous and not DriftField.constant(0.3).time_dependent


@given(z=st.floats(-1e3, 1e3).filter(lambda v: v != 0))
def test_power_law_magnitude_and_direction(mixed, z):
    # |b(z)| = |z|^(1 - alpha + eps) pointing at the origin
    b = DriftField.power_law(0.1, mixed)
    assert b.magnitude(0.0, z) == pytest.approx(abs(z) ** (1 - 1.5 + 0.1), rel=1e-13)
    assert np.sign(b(0.0, z)) == -np.sign(z)
    out = DriftField.power_law(0.1, mixed, direction="outward")
    assert out(0.0, z) == pytest.approx(-b(0.0, z))


def test_power_law_properties(mixed):
    b = DriftField.power_law(0.1, mixed)
    assert b(1.0, 0.0) == 0.0
    assert b.singular_points == (0.0,)
    assert b.singular_order == pytest.approx(0.4)
    assert b.even_magnitude and not b.homogeneous


@pytest.mark.parametrize("eps", [0.0, 0.31, -0.1])
def test_power_law_epsilon_range(mixed, eps):
    with pytest.raises(ValueError):
        DriftField.power_law(eps, mixed)


def test_power_law_pure_range(pure):
    # without the beta part only eps < alpha is needed
    DriftField.power_law(1.0, pure)
    with pytest.raises(ValueError):
        DriftField.power_law(1.5, pure)


def test_kernel_power(mixed):
    b = DriftField.kernel_power(mixed)
    for u, z in [(0.3, 0.7), (2.0, -1.5)]:
        ref = eval_density(mixed, SpaceTimeArg(u, z)) ** 0.5
        assert abs(b(u, z)) == pytest.approx(ref, rel=1e-6)
        assert np.sign(b(u, z)) == -np.sign(z)
    assert b(1.0, 0.0) == 0.0
    assert b.time_dependent


def test_tabulated_space_and_time():
    b = DriftField.tabulated([-1.0, 0.0, 1.0], [2.0, 0.0, 4.0])
    np.testing.assert_allclose(b(0.0, [-2.0, -0.5, 0.5, 5.0]), [0.0, 1.0, 2.0, 0.0])
    bt = DriftField.tabulated([0.0, 1.0], [[0.0, 1.0], [2.0, 3.0]], u_grid=[0.0, 1.0])
    assert bt(0.5, 0.5) == pytest.approx(1.5)
    assert bt.time_dependent and not bt.even_magnitude
    with pytest.raises(ValueError):
        DriftField.tabulated([0.0, 1.0], [1.0, 2.0, 3.0])


def test_scaled_and_describe(mixed):
    b = DriftField.power_law(0.1, mixed).scaled(3.0)
    assert b(0.0, 2.0) == pytest.approx(-3.0 * 2.0 ** -0.4)
    assert b.describe() == {"family": "PowerLaw", "scale": 3.0, "epsilon": 0.1, "direction": "inward"}
    assert DriftField.constant(0.3).describe() == {"family": "Constant", "scale": 1.0, "c": 0.3}


def test_validation():
    with pytest.raises(ValueError):
        DriftField("Quadratic")
    with pytest.raises(ValueError):
        DriftField("Constant", direction="up")
    with pytest.raises(ValueError):
        DriftField("PowerLaw", epsilon=0.1)
    with pytest.raises(ValueError):
        DriftField("Zero", dim=2)

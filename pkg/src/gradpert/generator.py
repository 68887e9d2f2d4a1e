"""Bump test functions, the fractional Laplacian, and the weak generator identity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

from .drift import DriftField
from .kernel import KernelParams
from .quadrature import GridSpec
from .table import get_table

__all__ = ["TestFunction", "frac_constant", "fractional_laplacian", "weak_generator_residual"]


@dataclass(frozen=True)
class TestFunction:
    """``amplitude * exp(-1 / (1 - rho^2))`` for ``rho < 1``, zero outside.

    ``rho^2 = ((u - t0) / rt)^2 + ((z - z0) / rz)^2`` with
    ``center = (t0, z0)`` and ``radius = (rt, rz)`` (a scalar is used for both).
    """

    __test__ = False  # not a pytest class

    center: tuple
    radius: tuple | float
    amplitude: float = 1.0

    def __post_init__(self):
        r = self.radius
        rt, rz = (r, r) if np.isscalar(r) else r
        if rt <= 0 or rz <= 0:
            raise ValueError("radii must be positive")
        object.__setattr__(self, "radius", (float(rt), float(rz)))
        t0, z0 = self.center
        object.__setattr__(self, "center", (float(t0), float(z0)))

    @property
    def sup_norm(self) -> float:
        return abs(self.amplitude) * math.exp(-1.0)

    @property
    def time_support(self):
        t0, rt = self.center[0], self.radius[0]
        return t0 - rt, t0 + rt

    def space_radius(self, u):
        """Half-width of the spatial support at time ``u`` (0 outside)."""
        t0, rt = self.center[0], self.radius[0]
        a = 1.0 - ((np.asarray(u, dtype=float) - t0) / rt) ** 2
        return self.radius[1] * np.sqrt(np.clip(a, 0.0, None))

    def _parts(self, u, z):
        t0, z0 = self.center
        rt, rz = self.radius
        a = (np.asarray(u, dtype=float) - t0) / rt
        b = (np.asarray(z, dtype=float) - z0) / rz
        rho2 = a * a + b * b
        inside = rho2 < 1.0
        one = np.where(inside, 1.0 - rho2, 1.0)
        val = np.where(inside, self.amplitude * np.exp(-1.0 / one), 0.0)
        return a, b, one, val

    def __call__(self, u, z):
        return self._parts(u, z)[3]

    def du(self, u, z):
        a, _, one, val = self._parts(u, z)
        return val * (-2.0 * a / self.radius[0]) / one**2

    def dz(self, u, z):
        _, b, one, val = self._parts(u, z)
        return val * (-2.0 * b / self.radius[1]) / one**2

    def dzz(self, u, z):
        _, b, one, val = self._parts(u, z)
        rz = self.radius[1]
        g1 = -2.0 * b / rz / one**2
        # d/dz of (-2 b / rz) / one^2
        g1p = (-2.0 / rz**2) / one**2 + (-2.0 * b / rz) * (4.0 * b / rz) / one**3
        return val * (g1 * g1 + g1p)


def frac_constant(d, gamma):
    """Normalising constant of ``Δ^{γ/2}`` as a singular integral in ``d`` dimensions."""
    return _gamma((d + gamma) / 2.0) / (2.0**-gamma * math.pi ** (d / 2.0) * abs(_gamma(-gamma / 2.0)))


def _log_rule(n_panels=24, n_gauss=8):
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    e = np.linspace(0.0, 1.0, n_panels + 1)
    a, b = e[:-1], e[1:]
    s = (a[:, None] + 0.5 * (b - a)[:, None] * (x + 1.0)[None, :]).ravel()
    ws = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    return s, ws


_LOG_RULE = _log_rule()
_LIN_RULE = _log_rule(16, 8)


def fractional_laplacian(phi: TestFunction, gamma, at, eps_rel=1e-4):
    """``Δ^{γ/2} phi(u, ·)`` evaluated at ``at = (u, z)``; broadcasts over arrays.

    Symmetric principal value ``∫_0^∞ (phi(z+y) + phi(z-y) - 2 phi(z)) y^{-1-γ} dy``
    times the normalising constant.  The ball ``y < eps`` uses the Taylor term
    ``phi'' eps^{2-γ} / (2-γ)`` and the range beyond the support is integrated
    in closed form.
    """
    if not 0.0 < gamma < 2.0:
        raise ValueError(f"gamma must lie in (0, 2), got {gamma}")
    u, z = np.broadcast_arrays(np.asarray(at[0], dtype=float), np.asarray(at[1], dtype=float))
    shape = u.shape
    u = u.ravel()
    z = z.ravel()
    R = phi.space_radius(u)
    z0 = phi.center[1]
    live = R > 0
    out = np.zeros(u.shape)
    if not np.any(live):
        return out.reshape(shape)
    u, z, R = u[live], z[live], R[live]
    eps = eps_rel * R
    dist = np.abs(z - z0)
    Y = dist + R
    # split at the nearer support edge: log-spaced below it, linear above
    b1 = np.clip(np.abs(dist - R), 2.0 * eps, None)
    b1 = np.minimum(b1, 0.5 * Y)
    s, ws = _LOG_RULE
    ratio = np.log(b1 / eps)
    ya = eps[:, None] * np.exp(s[None, :] * ratio[:, None])
    ja = ya * ratio[:, None] * ws[None, :]
    sl, wl = _LIN_RULE
    yb = b1[:, None] + (Y - b1)[:, None] * sl[None, :]
    jb = (Y - b1)[:, None] * wl[None, :]
    y = np.concatenate([ya, yb], axis=1)
    jac = np.concatenate([ja, jb], axis=1)
    f0 = phi(u, z)
    num = phi(u[:, None], z[:, None] + y) + phi(u[:, None], z[:, None] - y) - 2.0 * f0[:, None]
    body = np.sum(num * y ** (-1.0 - gamma) * jac, axis=1)
    inner = phi.dzz(u, z) * eps ** (2.0 - gamma) / (2.0 - gamma)
    tail = -2.0 * f0 * Y**-gamma / gamma
    out[live] = frac_constant(1, gamma) * (body + inner + tail)
    return out.reshape(shape)


def _generator_applied(phi, u, z, params: KernelParams, drift: DriftField):
    U, Z = np.broadcast_arrays(u[:, None], z[None, :])
    val = phi.du(U, Z) + fractional_laplacian(phi, params.alpha, (U, Z))
    if params.mixed:
        val = val + params.a**params.beta * fractional_laplacian(phi, params.beta, (U, Z))
    if drift.family != "Zero":
        val = val + drift(U, Z) * phi.dz(U, Z)
    return val


def weak_generator_residual(s, x, phi: TestFunction, drift: DriftField, params: KernelParams,
                            grid: GridSpec = GridSpec(), N=8, kernel=None, n_time=24):
    """``∫_s^∞ ∫ p̃_N(s,x,u,z) (∂_u + L + b·∂_z) phi dz du + phi(s, x)``.

    ``kernel(u, z)``, taking absolute time and position, may replace
    ``p̃_N``, for instance by the translated kernel of a constant drift.  The spatial integral covers ``x ± L``
    because ``L phi`` is not compactly supported.
    """
    from .quadrature import line_rule, time_rule
    from .series import _second_diff, get_solver

    if params.dim != 1:
        raise ValueError("the weak identity is checked in one space dimension")
    ta, tb = phi.time_support
    phi_sx = float(phi(s, x))
    if tb <= s:
        return abs(phi_sx)
    if ta <= s:
        # the kernel starts as a point mass inside the support: grade toward s
        u, wu = time_rule(s, tb, max(4, n_time // 3), grading=3.0, ends="left")
    else:
        xg, wg = np.polynomial.legendre.leggauss(n_time)
        u = ta + 0.5 * (tb - ta) * (xg + 1.0)
        wu = 0.5 * (tb - ta) * wg
    if kernel is None and not (drift.family == "Zero" or N == 0):
        sol = get_solver(params, drift, s, x, float(u[-1]), grid, extra_times=tuple(u))
        sol.ensure(N)
        off = sol.s - s
        rows = [sol.time_index(ui + off) for ui in u]
        A = sum(sol.A[n][rows] for n in range(N + 1))
        z = sol.z + (x - sol.x)
        G = _generator_applied(phi, u, z, params, drift)
        G = G - _second_diff(G) / 12.0
        val = float(wu @ np.sum(A * G, axis=1))
        return abs(val + phi_sx)
    if kernel is None:
        tab = get_table(params)

        def kernel(uu, zz):
            return tab.density(uu - s, zz - x)

    val = 0.0
    z0, rz = phi.center[1] - x, phi.radius[1]
    for ui, wi in zip(u, wu):
        width = (ui - s) ** (1.0 / params.alpha)
        if params.mixed:
            width = max(width, (params.a**params.beta * (ui - s)) ** (1.0 / params.beta))
        zz, wz = line_rule(grid.L, centers=(0.0, z0 - rz, z0, z0 + rz),
                           widths=(width, rz, rz, rz), n_uniform=16, tail=False)
        z = x + zz
        G = _generator_applied(phi, np.array([ui]), z, params, drift)[0]
        val += wi * float(np.dot(wz, kernel(ui, z) * G))
    return abs(val + phi_sx)

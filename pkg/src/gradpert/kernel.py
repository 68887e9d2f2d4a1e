"""Mixed-stable transition density and the quantities derived from it.

The density of the convolution semigroup with symbol
``psi(xi) = |xi|**alpha + a**beta * |xi|**beta`` is obtained by radial
Fourier inversion.  Instead of integrating the oscillatory integrand on
the real half-line, the integration ray is rotated into the upper half
plane, ``s = exp(1j*phi) * u``.  Along the rotated ray the oscillator
``exp(1j*r*s)`` decays exponentially and ``exp(-t*psi(s))`` still decays
as long as ``alpha*phi < pi/2``, so the integrand is smooth and
non-oscillatory up to a bounded number of periods.  In the far field the
constant part of ``exp(-t*psi)`` is subtracted analytically, which keeps
full relative accuracy in the polynomial tails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import DegenerateScaling, NumericalNonConvergence

__all__ = [
    "KernelParams",
    "SpaceTimeArg",
    "radial_density",
    "radial_tail",
    "eval_density",
    "eval_gradient",
    "gradient_1d",
    "envelope",
    "hat_factor",
    "hat_kernel",
    "scale_to_unit",
    "kernel_width",
]

DENSITY_FLOOR = 1e-300

# exp(-_CUT) is below double precision relative to O(1) integrands.
_CUT = 37.0
_CHUNK = 4096


@dataclass(frozen=True)
class KernelParams:
    """Parameters of ``Delta^{alpha/2} + a^beta Delta^{beta/2}`` in ``dim`` dimensions.

    ``beta_index`` is only consulted when ``a > 0``.  With
    ``perturbation_grade=True`` the stricter range ``1 < beta < alpha < 2``
    (or ``a == 0`` and ``1 < alpha < 2``) is enforced.
    """

    alpha: float
    beta_index: float | None = None
    a: float = 0.0
    dim: int = 1
    perturbation_grade: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.a < 0 or not math.isfinite(self.a):
            raise ValueError(f"mixture weight must be finite and >= 0, got {self.a}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.a > 0:
            if self.beta_index is None or not 0.0 < self.beta_index < self.alpha:
                raise ValueError(
                    f"need 0 < beta < alpha when a > 0, got beta={self.beta_index}"
                )
        if self.perturbation_grade:
            if self.alpha <= 1.0:
                raise ValueError("perturbation-grade parameters need alpha > 1")
            if self.a > 0 and self.beta_index <= 1.0:
                raise ValueError("perturbation-grade parameters need beta > 1")

    @property
    def mixed(self) -> bool:
        return self.a > 0

    @property
    def beta(self) -> float:
        return self.beta_index if self.beta_index is not None else self.alpha

    def is_perturbation_grade(self) -> bool:
        """``1 < beta < alpha < 2``, or ``a == 0`` and ``1 < alpha < 2``."""
        return self.alpha > 1.0 and (not self.mixed or self.beta > 1.0)

    def with_dim(self, dim: int) -> "KernelParams":
        return replace(self, dim=dim, perturbation_grade=False)

    def with_a(self, a: float) -> "KernelParams":
        return replace(self, a=a)

    def symbol(self, xi):
        xi = np.abs(np.asarray(xi, dtype=float))
        out = xi**self.alpha
        if self.mixed:
            out = out + self.a**self.beta * xi**self.beta
        return out


@dataclass(frozen=True)
class SpaceTimeArg:
    """Elapsed time ``t`` and displacement ``x`` (scalar allowed for dim 1)."""

    t: float
    x: object = 0.0

    @property
    def xvec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.x, dtype=float))

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.xvec))


@lru_cache(maxsize=8)
def _reference_rule(n_gl: int):
    """Nodes/weights on [0, 1]: geometric panels toward 0, uniform above 1/16."""
    g, gw = np.polynomial.legendre.leggauss(n_gl)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    edges = [0.0]
    edges += [2.0 ** (-k) / 16.0 for k in range(44, -1, -1)]
    edges += [i / 16.0 for i in range(2, 17)]
    edges = np.asarray(edges)
    lo, hi = edges[:-1], edges[1:]
    x = (lo[:, None] + (hi - lo)[:, None] * g[None, :]).ravel()
    w = ((hi - lo)[:, None] * gw[None, :]).ravel()
    return x, w


def _phases(params: KernelParams):
    near = min(math.pi / (4.0 * params.alpha), 0.4 * math.pi)
    far = 0.9 * min(0.5 * math.pi, 0.5 * math.pi / params.alpha)
    return near, far


def _kernel_cutoff(params: KernelParams, t, phi):
    """Ray length beyond which |exp(-t psi)| < exp(-_CUT)."""
    u = (_CUT / (t * math.cos(params.alpha * phi))) ** (1.0 / params.alpha)
    if params.mixed:
        b = params.beta
        ub = (_CUT / (t * params.a**b * math.cos(b * phi))) ** (1.0 / b)
        u = np.minimum(u, ub)
    return u


def _psi_on_ray(params: KernelParams, u, phi):
    out = u**params.alpha * np.exp(1j * params.alpha * phi)
    if params.mixed:
        b = params.beta
        out = out + params.a**b * u**b * np.exp(1j * b * phi)
    return out


def _ray_sum(kind, params, t, r, phi, U, far, n_gl):
    """Evaluate one family of ray integrals for flattened (t, r) arrays."""
    xi, w = _reference_rule(n_gl)
    u = U[:, None] * xi[None, :]
    phase = np.exp(1j * phi)[:, None]
    s = phase * u
    tpsi = t[:, None] * _psi_on_ray(params, u, phi[:, None])
    farm = far[:, None]
    kern = np.where(farm, np.expm1(-tpsi), np.exp(-tpsi))
    rr = r[:, None]
    if kind == "p1":
        f = kern * np.exp(1j * rr * s)
    elif kind == "p3":
        small = (rr * U[:, None] * np.sin(phi)[:, None] <= 1.0) & ~farm
        with np.errstate(invalid="ignore", divide="ignore"):
            sinc = np.where(rr > 0, np.sin(rr * s) / np.where(rr > 0, rr, 1.0), s)
        f = np.where(small, kern * s * sinc, kern * s * np.exp(1j * rr * s))
    elif kind == "tail":
        f = np.where(
            farm,
            kern * np.exp(1j * rr * s) / s,
            kern * np.expm1(1j * rr * s) / s,
        )
    else:  # pragma: no cover - internal
        raise ValueError(kind)
    return (phase * f) @ w * U


def _radial_raw(kind, params: KernelParams, t, r, n_gl):
    t = np.asarray(t, dtype=float)
    r = np.abs(np.asarray(r, dtype=float))
    t, r = np.broadcast_arrays(t, r)
    shape = t.shape
    t = t.ravel()
    r = r.ravel()
    out = np.zeros(t.shape)
    pos = t > 0
    if not np.any(pos):
        return out.reshape(shape)
    near_phi, far_phi = _phases(params)
    idx = np.nonzero(pos)[0]
    tt, rv = t[idx], r[idx]
    uk = _kernel_cutoff(params, tt, near_phi)
    with np.errstate(divide="ignore"):
        uof = np.where(rv > 0, _CUT / (rv * math.sin(far_phi)), np.inf)
        uon = np.where(rv > 0, _CUT / (rv * math.sin(near_phi)), np.inf)
    far = uof < uk
    phi = np.where(far, far_phi, near_phi)
    if kind == "tail":
        U = np.where(far, uof, uk)
    else:
        U = np.where(far, uof, np.minimum(uk, uon))
    vals = np.empty(idx.shape)
    for lo in range(0, idx.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        I = _ray_sum(kind, params, tt[sl], rv[sl], phi[sl], U[sl], far[sl], n_gl)
        if kind == "p1":
            v = I.real / math.pi
        elif kind == "p3":
            rs = rv[sl]
            small = (rs * U[sl] * np.sin(phi[sl]) <= 1.0) & ~far[sl]
            with np.errstate(invalid="ignore", divide="ignore"):
                v = np.where(small, I.real, I.imag / np.where(rs > 0, rs, 1.0))
            v = v / (2.0 * math.pi**2)
        else:
            rs = rv[sl]
            v = np.where(far[sl], -I.imag / math.pi, 0.5 - I.imag / math.pi)
            v = np.where(rs > 0, v, 0.5)
        vals[sl] = v
    out[idx] = vals
    return out.reshape(shape)


def _radial_checked(kind, params, t, r, tol, max_refine):
    levels = [16, 24, 32, 48][: max(2, max_refine + 1)]
    prev = _radial_raw(kind, params, t, r, levels[0])
    for n in levels[1:]:
        cur = _radial_raw(kind, params, t, r, n)
        scale = np.maximum(np.abs(cur), 1e-300)
        err = np.abs(cur - prev)
        if np.all((err <= tol * scale) | (err <= 1e-15 * np.abs(cur).max(initial=0.0))):
            return cur
        prev = cur
    raise NumericalNonConvergence(
        f"radial {kind} quadrature did not reach rel. tol {tol:g}; "
        f"max rel. change {float(np.max(err / scale)):.3g}"
    )


def radial_density(params: KernelParams, t, r, dim=None, tol=1e-9, max_refine=3, check=True):
    """Vectorised density as a function of elapsed time and radius.

    Only ``dim`` 1 and 3 are supported.  Values below ``1e-300`` are
    clamped to zero and ``t <= 0`` gives zero.
    """
    dim = params.dim if dim is None else dim
    if dim not in (1, 3):
        raise NotImplementedError("only dimensions 1 and 3 are supported")
    kind = "p1" if dim == 1 else "p3"
    if check:
        val = _radial_checked(kind, params, t, r, tol, max_refine)
    else:
        val = _radial_raw(kind, params, t, r, 16)
    return np.where(val < DENSITY_FLOOR, 0.0, val)


def radial_tail(params: KernelParams, t, w, tol=1e-9, max_refine=3, check=True):
    """One-dimensional tail mass ``P(X_t > |w|)``; equals 1/2 at ``w == 0``."""
    if check:
        val = _radial_checked("tail", params, t, w, tol, max_refine)
    else:
        val = _radial_raw("tail", params, t, w, 16)
    return np.clip(val, 0.0, 0.5)


def eval_density(params: KernelParams, arg: SpaceTimeArg, tol=1e-9) -> float:
    if arg.xvec.size != params.dim:
        raise ValueError(f"displacement has {arg.xvec.size} components, dim={params.dim}")
    if arg.t <= 0:
        return 0.0
    return float(radial_density(params, arg.t, arg.r, tol=tol))


def eval_gradient(params: KernelParams, arg: SpaceTimeArg, tol=1e-9) -> np.ndarray:
    """Spatial gradient via the dimension-shift identity ``-2 pi x p_{d+2}``."""
    x = arg.xvec
    if x.size != params.dim:
        raise ValueError(f"displacement has {x.size} components, dim={params.dim}")
    if arg.t <= 0:
        return np.zeros_like(x)
    p_up = radial_density(params, arg.t, arg.r, dim=params.dim + 2, tol=tol)
    return -2.0 * math.pi * x * float(p_up)


def gradient_1d(params: KernelParams, t, x, **kw):
    """Vectorised derivative in dimension 1."""
    x = np.asarray(x, dtype=float)
    return -2.0 * math.pi * x * radial_density(params, t, np.abs(x), dim=3, **kw)


def _time_factor(params: KernelParams, t, power):
    """``t^{-power/alpha} ∧ (a^beta t)^{-power/beta}``; the second term is +inf for a=0."""
    t = np.asarray(t, dtype=float)
    out = t ** (-power / params.alpha)
    if params.mixed:
        b = params.beta
        out = np.minimum(out, (params.a**b * t) ** (-power / b))
    return out


def kernel_width(params: KernelParams, t):
    """Spatial scale ``t^{1/alpha} ∨ (a^beta t)^{1/beta}``."""
    return 1.0 / _time_factor(params, t, 1.0)


def envelope(params: KernelParams, t, x):
    """Two-sided comparability profile of the density (vectorised in t, |x|)."""
    t = np.asarray(t, dtype=float)
    r = np.abs(np.asarray(x, dtype=float))
    if np.ndim(x) and params.dim > 1 and np.shape(x)[-1] == params.dim:
        r = np.linalg.norm(x, axis=-1)
    d = params.dim
    ondiag = _time_factor(params, t, d)
    with np.errstate(divide="ignore"):
        tailterm = t / r ** (d + params.alpha)
        if params.mixed:
            b = params.beta
            tailterm = tailterm + params.a**b * t / r ** (d + b)
    return np.minimum(ondiag, tailterm)


def hat_factor(params: KernelParams, t):
    return _time_factor(params, t, 1.0)


def hat_kernel(params: KernelParams, arg: SpaceTimeArg, tol=1e-9) -> float:
    if arg.t <= 0:
        return 0.0
    return float(hat_factor(params, arg.t)) * eval_density(params, arg, tol=tol)


def scale_to_unit(params: KernelParams, arg: SpaceTimeArg):
    """Map ``(a, t, x)`` to ``(1, t', x')`` with ``p^a(t,x) = c * p^1(t',x')``.

    Returns ``(unit_params, unit_arg, prefactor)``.
    """
    if not params.mixed:
        raise DegenerateScaling("scaling to unit weight needs a > 0")
    al, be, d = params.alpha, params.beta, params.dim
    lam = params.a ** (be / (al - be))
    unit = replace(params, a=1.0)
    new_arg = SpaceTimeArg(arg.t * lam**al, arg.xvec * lam if d > 1 else float(arg.xvec[0]) * lam)
    return unit, new_arg, lam**d

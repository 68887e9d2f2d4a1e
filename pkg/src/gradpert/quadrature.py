"""Integration engines: adaptive 1-D, graded space-time rules, line rules.

All rules are deterministic.  Time rules cluster nodes like
``distance**grading`` toward the singular endpoints through a smooth change
of variable, so integrands of the form ``(u-s)**(-sigma) * smooth`` become
smooth before Gauss-Legendre is applied.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate as _si

from .errors import NumericalNonConvergence, TruncationWarning

__all__ = [
    "GridSpec",
    "SingularWeight",
    "integrate_1d",
    "time_rule",
    "line_rule",
    "integrate_line",
    "integrate_spacetime",
    "truncation_radius",
]


@dataclass(frozen=True)
class GridSpec:
    """Discretisation controls shared by the space-time engines.

    ``n_space`` counts lattice nodes on ``[-L, L]`` (odd, so the centre is a
    node).  ``grading_exponent=None`` lets each engine derive it from the
    singular weight.
    """

    n_time: int = 32
    n_space: int = 401
    L: float = 10.0
    grading_exponent: float | None = None
    tol: float = 1e-6
    max_refine: int = 3

    def __post_init__(self):
        if self.n_time < 4 or self.n_space < 4:
            raise ValueError("n_time and n_space must be >= 4")
        if self.L <= 0 or self.tol <= 0:
            raise ValueError("L and tol must be positive")
        if self.grading_exponent is not None and self.grading_exponent <= 0:
            raise ValueError("grading exponent must be positive")

    def refine(self) -> "GridSpec":
        return replace(self, n_time=2 * self.n_time, n_space=2 * self.n_space - 1)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n_space - 1)


@dataclass(frozen=True)
class SingularWeight:
    """Integrable endpoint singularity ``distance**(-exponent)``."""

    exponent: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.exponent < 1.0:
            raise ValueError(f"singular exponent must lie in [0, 1), got {self.exponent}")

    def grading(self) -> float:
        return 1.0 / (1.0 - self.exponent)


def integrate_1d(f, a, b, tol=1e-10, weight: SingularWeight | None = None, max_refine=200):
    """Adaptive Gauss-Kronrod (QUADPACK) with a relative-first criterion.

    ``weight`` is informational: QUADPACK's extrapolation already handles
    integrable algebraic endpoint singularities, so ``f`` should include
    the singular factor.  Returns ``(value, error_estimate)``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("error", _si.IntegrationWarning)
        try:
            val, err = _si.quad(f, a, b, epsabs=1e-14, epsrel=tol, limit=max_refine)
        except _si.IntegrationWarning as exc:
            raise NumericalNonConvergence(str(exc)) from exc
    return val, err


@lru_cache(maxsize=64)
def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _grading_map(v, q, ends):
    """Map [0,1] -> [0,1] behaving like ``v**q`` at each singular end; returns (M, M')."""
    if ends == "left":
        return v**q, q * v ** (q - 1)
    if ends == "right":
        return 1.0 - (1.0 - v) ** q, q * (1.0 - v) ** (q - 1)
    if ends == "both":
        a, b = v**q, (1.0 - v) ** q
        den = a + b
        return a / den, q * v ** (q - 1) * (1.0 - v) ** (q - 1) / den**2
    return v, np.ones_like(v)


def time_rule(s, t, n_panels, weight: SingularWeight = SingularWeight(0.0),
              grading=None, ends="both", n_gauss=6):
    """Nodes/weights on (s, t) for integrands singular like ``distance**(-sigma)``.

    Composite Gauss-Legendre in a variable ``v`` with ``u - s ~ v**q`` at each
    singular end.  The default is ``q = m / (1 - sigma)`` with the smallest
    integer ``m`` giving ``q >= 2``: the singular factor then becomes the
    polynomial ``v**(m-1)``.  ``q`` is capped at 8 to keep nodes resolvable.
    """
    sigma = weight.exponent
    if grading is not None:
        q = float(grading)
    elif sigma > 0:
        m = math.ceil(2.0 * (1.0 - sigma) - 1e-12)
        q = min(m / (1.0 - sigma), 8.0)
    else:
        q = 1.0
    if q == 1.0:
        ends = "none"
    gx, gw = _gauss(n_gauss)
    e = np.linspace(0.0, 1.0, n_panels + 1)
    a, b = e[:-1], e[1:]
    v = (a[:, None] + 0.5 * (b - a)[:, None] * (gx + 1.0)[None, :]).ravel()
    wv = (0.5 * (b - a)[:, None] * gw[None, :]).ravel()
    m, dm = _grading_map(v, q, ends)
    u = np.clip(s + (t - s) * m, np.nextafter(s, t), np.nextafter(t, s))
    return u, (t - s) * wv * dm


def line_rule(L, centers=(), widths=(), levels=24, n_gauss=6, n_uniform=8, tail=True):
    """Composite rule on the real line resolving bumps of given widths.

    Breakpoints are ``centers`` and ``±L``; between breakpoints panels shrink
    geometrically toward each breakpoint down to ``0.02 * width``.  With
    ``tail=True`` the half-lines beyond ``±L`` are added through the map
    ``z = L / xi**2``, exact for integrands decaying like ``|z|**-3`` or faster.
    """
    gx, gw = _gauss(n_gauss)
    c = [float(v) for v in centers]
    wd = list(widths) if len(widths) else [L] * len(c)
    pts = sorted(set([-L, L] + [v for v in c if -L < v < L]))
    scale = {}
    for v, w in zip(c, wd):
        scale[v] = min(scale.get(v, np.inf), max(float(w), 1e-14))
    nodes, weights = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= 0:
            continue
        mid = 0.5 * (lo + hi)
        edges = []
        for end, sign in ((lo, 1.0), (hi, -1.0)):
            half = mid - lo
            w = scale.get(end)
            if w is None or w >= half:
                k = np.linspace(0.0, 1.0, n_uniform // 2 + 1)
                edges.append(end + sign * half * k)
                continue
            # at least `levels` panels, and never shrinking by more than 4x per panel
            n_lev = max(levels, int(math.ceil(math.log(half / (0.02 * w)) / math.log(4.0))))
            ratio = min((0.02 * w / half) ** (1.0 / n_lev), 0.5)
            geo = half * ratio ** np.arange(n_lev, -1, -1)
            geo = geo[geo > 0.02 * w * 0.999] if np.any(geo > 0.02 * w * 0.999) else geo[-1:]
            edges.append(end + sign * np.concatenate([[0.0], geo]))
        e = np.unique(np.concatenate(edges))
        a, b = e[:-1], e[1:]
        nodes.append((a[:, None] + 0.5 * (b - a)[:, None] * (gx + 1.0)[None, :]).ravel())
        weights.append((0.5 * (b - a)[:, None] * gw[None, :]).ravel())
    if tail:
        # z = L / xi^2, xi in (0, 1]: dz = 2 L / xi^3 dxi
        x = 0.5 * (gx + 1.0)
        w = 0.5 * gw
        edges = 2.0 ** -np.arange(0, 12)[::-1]
        edges = np.concatenate([[0.0], edges])
        a, b = edges[:-1], edges[1:]
        xi = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
        wx = ((b - a)[:, None] * w[None, :]).ravel()
        z = L / xi**2
        wz = wx * 2.0 * L / xi**3
        nodes += [z, -z]
        weights += [wz, wz]
    return np.concatenate(nodes), np.concatenate(weights)


def integrate_line(f, L, centers=(), widths=(), levels=24, n_gauss=6, tail=True):
    z, w = line_rule(L, centers, widths, levels=levels, n_gauss=n_gauss, tail=tail)
    return float(np.dot(w, f(z)))


def truncation_radius(params, t, tol, length=1.0):
    """Smallest L with envelope tail bound ``(t/L^{d+a} + a^b t/L^{d+b}) * length < tol``."""
    d = params.dim
    L = 1.0
    for _ in range(200):
        est = t / L ** (d + params.alpha)
        if params.mixed:
            est += params.a**params.beta * t / L ** (d + params.beta)
        if est * length < tol:
            return L
        L *= 1.25
    return L


def _spacetime_once(f, s, t, grid, weight, centers, widths):
    q = grid.grading_exponent
    u, wu = time_rule(s, t, grid.n_time, weight, grading=q, ends="both")
    total = 0.0
    n_gauss = 6
    per_panel = max(2, (grid.n_space - 1) // (4 * n_gauss))
    if not centers:
        z, wz = line_rule(grid.L, (), (), n_gauss=n_gauss, n_uniform=2 * per_panel, tail=False)
        vals = f(u[:, None], z[None, :])
        return float(wu @ (vals @ wz))
    levels = max(8, int(round(math.log2(grid.n_space))) * 2)
    for ui, wi in zip(u, wu):
        wd = widths(ui) if widths is not None else [grid.L] * len(centers)
        z, wz = line_rule(grid.L, centers, wd, levels=levels, n_gauss=n_gauss,
                          n_uniform=2 * per_panel, tail=False)
        total += wi * float(np.dot(wz, f(np.full_like(z, ui), z)))
    return total


def integrate_spacetime(f, s, t, grid: GridSpec, weight: SingularWeight = SingularWeight(0.0),
                        centers=(), widths=None, params=None):
    """``∫_s^t ∫_{-L}^{L} f(u, z) dz du`` on a graded mesh, refined until stable.

    ``f`` must accept broadcastable arrays.  ``centers`` lists spatial points
    where the integrand concentrates; ``widths(u)`` returns the current
    concentration scale at each centre.  Passing ``params`` enables the
    envelope-based truncation check.
    """
    if params is not None:
        d = params.dim
        est = (t / grid.L ** (d + params.alpha))
        if params.mixed:
            est += params.a**params.beta * t / grid.L ** (d + params.beta)
        if est * (t - s) > grid.tol:
            warnings.warn(
                f"mass outside [-L, L] estimated at {est * (t - s):.3g} > tol {grid.tol:g}",
                TruncationWarning,
                stacklevel=2,
            )
    g = grid
    prev = _spacetime_once(f, s, t, g, weight, tuple(centers), widths)
    for _ in range(g.max_refine):
        g = g.refine()
        cur = _spacetime_once(f, s, t, g, weight, tuple(centers), widths)
        change = abs(cur - prev)
        if change <= g.tol * abs(cur) + 1e-14:
            return cur
        prev = cur
    raise NumericalNonConvergence(
        f"space-time quadrature: last refinement changed the value by "
        f"{change:.3g} (value {cur:.6g}, tol {g.tol:g})"
    )

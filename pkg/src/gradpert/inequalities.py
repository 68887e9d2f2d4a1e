"""Grid scans for the constants of the pointwise kernel inequalities.

Each scan evaluates a ratio on a log-spaced grid, polishes the best grid
points with a bounded Nelder-Mead search inside the grid box, refines the
grid, and reports the supremum per level.  A report is stable when the last
two levels agree within 5%.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .kernel import KernelParams, envelope, hat_factor
from .table import get_table

__all__ = [
    "ScanGrid",
    "RatioScanReport",
    "gradient_ratio",
    "three_p_hat_ratio",
    "three_p_plain_ratio",
    "php_ratio",
    "envelope_ratio",
    "scan_gradient_bound",
    "scan_3p_hat",
    "scan_3p_plain",
    "scan_php",
    "scan_envelope",
    "factor_inequality_check",
]

STABLE_TOL = 0.05


@dataclass(frozen=True)
class ScanGrid:
    """Log grid in ``t`` and signed log grid in ``x`` (plus ``x = 0``).

    ``levels`` lists the number of log points per axis at each refinement
    level; pair scans use ``pair_levels`` to stay under 10^6 evaluations.
    """

    t_range: tuple = (1e-2, 1e2)
    x_range: tuple = (1e-2, 50.0)
    levels: tuple = (17, 33, 65)
    pair_levels: tuple = (5, 9, 17)

    def times(self, n):
        return np.geomspace(*self.t_range, n)

    def positions(self, n):
        r = np.geomspace(*self.x_range, n)
        return np.concatenate([-r[::-1], [0.0], r])


@dataclass
class RatioScanReport:
    name: str
    sup_ratio: float
    argmax: tuple
    refinement_history: list
    stable: bool
    inf_ratio: float | None = None
    arginf: tuple | None = None
    inf_history: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name,
            "sup_ratio": self.sup_ratio,
            "argmax": list(self.argmax),
            "refinement_history": list(self.refinement_history),
            "stable": self.stable,
            "inf_ratio": self.inf_ratio,
            "arginf": None if self.arginf is None else list(self.arginf),
            "inf_history": list(self.inf_history),
            "details": self.details,
        }


def _p(params, t, x):
    return get_table(params).density(t, x)


def _phat(params, t, x):
    return hat_factor(params, t) * _p(params, t, x)


def gradient_ratio(params: KernelParams, t, x):
    """``|d/dx p(t, x)| / p_hat(t, x)``."""
    return np.abs(get_table(params).gradient(t, x)) / _phat(params, t, x)


def three_p_hat_ratio(params: KernelParams, u, x, r, y):
    return np.minimum(_phat(params, u, x), _phat(params, r, y)) / _phat(params, u + r, x + y)


def three_p_plain_ratio(params: KernelParams, u, x, r, y):
    return np.minimum(_p(params, u, x), _p(params, r, y)) / _p(params, u + r, x + y)


def php_ratio(params: KernelParams, u, x, r, y):
    """``p(u,x) p_hat(r,y) / (p(u+r,x+y) (p_hat(u,x) + p_hat(r,y)))``."""
    num = _p(params, u, x) * _phat(params, r, y)
    den = _p(params, u + r, x + y) * (_phat(params, u, x) + _phat(params, r, y))
    return num / den


def envelope_ratio(params: KernelParams, t, x):
    return _p(params, t, x) / envelope(params, t, x)


def _stable(hist):
    if len(hist) < 2:
        return False
    a, b = hist[-2], hist[-1]
    return bool(np.isfinite(a) and np.isfinite(b) and abs(b - a) <= STABLE_TOL * max(abs(a), abs(b)))


def _extreme(vals, axes, fn):
    # ties go to the lexicographically first grid index
    i = int(fn(vals))
    idx = np.unravel_index(i, vals.shape)
    return float(vals[idx]), tuple(float(ax[j]) for ax, j in zip(axes, idx))


def _coords(kinds, grid):
    """Maps between grid points and unconstrained polishing coordinates."""
    x0 = grid.x_range[0]

    def fwd(pt):
        return np.array([math.log(v) if k == "t" else math.asinh(v / x0) for k, v in zip(kinds, pt)])

    def back(c):
        return tuple(math.exp(v) if k == "t" else x0 * math.sinh(v) for k, v in zip(kinds, c))

    lo = fwd([grid.t_range[0] if k == "t" else -grid.x_range[1] for k in kinds])
    hi = fwd([grid.t_range[1] if k == "t" else grid.x_range[1] for k in kinds])
    return fwd, back, list(zip(lo, hi))


def _polish(ratio, seeds, kinds, grid, sign):
    """Bounded Nelder-Mead from each seed; returns the best ``(value, point)``."""
    fwd, back, bounds = _coords(kinds, grid)

    def obj(c):
        v = float(np.asarray(ratio(*back(c)), dtype=float))
        return -sign * v if math.isfinite(v) else math.inf

    best = None
    for pt in seeds:
        res = minimize(obj, fwd(pt), method="Nelder-Mead", bounds=bounds,
                       options={"xatol": 1e-7, "fatol": 1e-12, "maxfev": 800})
        val = -sign * float(res.fun)
        if math.isfinite(val) and (best is None or sign * val > sign * best[0]):
            best = (val, back(res.x))
    return best


def _top(vals, axes, k, sign):
    flat = np.argsort(-sign * vals, axis=None, kind="stable")[:k]
    return [tuple(float(ax[j]) for ax, j in zip(axes, np.unravel_index(i, vals.shape))) for i in flat]


def _scan(name, ratio, axes_at, levels, kinds, grid, two_sided=False, seeds=6):
    """Grid supremum per level, each polished locally from the best grid points."""
    sups, infs = [], []
    best = worst = None
    for n in levels:
        axes = axes_at(n)
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(ratio(*mesh), dtype=float)
        finite = np.isfinite(vals)
        if not np.any(finite):
            raise ValueError(f"{name}: no finite ratios on the grid")
        hi_vals = np.where(finite, vals, -np.inf)
        best = _extreme(hi_vals, axes, np.argmax)
        pol = _polish(ratio, _top(hi_vals, axes, seeds, 1.0), kinds, grid, 1.0)
        if pol is not None and pol[0] > best[0]:
            best = pol
        sups.append(best[0])
        if two_sided:
            lo_vals = np.where(finite, vals, np.inf)
            worst = _extreme(lo_vals, axes, np.argmin)
            pol = _polish(ratio, _top(lo_vals, axes, seeds, -1.0), kinds, grid, -1.0)
            if pol is not None and pol[0] < worst[0]:
                worst = pol
            infs.append(worst[0])
    stable = _stable(sups) and (not two_sided or _stable(infs))
    rep = RatioScanReport(name, best[0], tuple(best[1]), sups, stable)
    if two_sided:
        rep.inf_ratio, rep.arginf, rep.inf_history = worst[0], tuple(worst[1]), infs
    return rep


def scan_gradient_bound(params: KernelParams, grid: ScanGrid = ScanGrid()) -> RatioScanReport:
    """Largest ``|grad p| / p_hat`` over the ``(t, x)`` grid."""
    return _scan("gradient_bound", lambda t, x: gradient_ratio(params, t, x),
                 lambda n: (grid.times(n), grid.positions(n)), grid.levels, "tx", grid)


def _pair_axes(grid):
    def axes(n):
        t, x = grid.times(n), grid.positions(n)
        return t, x, t, x
    return axes


def scan_3p_hat(params: KernelParams, grid: ScanGrid = ScanGrid()) -> RatioScanReport:
    """Largest ``(p_hat(u,x) ∧ p_hat(r,y)) / p_hat(u+r, x+y)``."""
    return _scan("3p_hat", lambda u, x, r, y: three_p_hat_ratio(params, u, x, r, y),
                 _pair_axes(grid), grid.pair_levels, "txtx", grid)


def scan_3p_plain(params: KernelParams, grid: ScanGrid = ScanGrid()) -> RatioScanReport:
    """Largest ``(p(u,x) ∧ p(r,y)) / p(u+r, x+y)``; any ``0 < beta < alpha`` is allowed."""
    return _scan("3p_plain", lambda u, x, r, y: three_p_plain_ratio(params, u, x, r, y),
                 _pair_axes(grid), grid.pair_levels, "txtx", grid)


def scan_php(params: KernelParams, grid: ScanGrid = ScanGrid()) -> RatioScanReport:
    """Product inequality in both orientations; the report carries the larger sup."""
    fwd = _scan("php", lambda u, x, r, y: php_ratio(params, u, x, r, y), _pair_axes(grid),
                grid.pair_levels, "txtx", grid)
    rev = _scan("php_swapped", lambda u, x, r, y: php_ratio(params, r, y, u, x), _pair_axes(grid),
                grid.pair_levels, "txtx", grid)
    out = fwd if fwd.sup_ratio >= rev.sup_ratio else rev
    hist = [max(a, b) for a, b in zip(fwd.refinement_history, rev.refinement_history)]
    return RatioScanReport("php", out.sup_ratio, out.argmax, hist, fwd.stable and rev.stable,
                           details={"forward": fwd.as_dict(), "swapped": rev.as_dict()})


def scan_envelope(params: KernelParams, grid: ScanGrid = ScanGrid()) -> RatioScanReport:
    """Two-sided: sup and inf of ``p / envelope``."""
    return _scan("envelope", lambda t, x: envelope_ratio(params, t, x),
                 lambda n: (grid.times(n), grid.positions(n)), grid.levels, "tx", grid, two_sided=True)


def factor_inequality_check(params: KernelParams, grid: ScanGrid = ScanGrid()):
    """``|x| (A^2 ∧ |x|^-2) <= A`` with ``A = t^{-1/alpha} ∧ t^{-1/beta}`` on the finest grid.

    Returns ``(holds, largest lhs/rhs)``.
    """
    n = grid.levels[-1]
    t, x = np.meshgrid(grid.times(n), grid.positions(n), indexing="ij")
    A = t ** (-1.0 / params.alpha)
    if params.mixed:
        A = np.minimum(A, t ** (-1.0 / params.beta))
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        lhs = ax * np.minimum(A * A, np.where(ax > 0, ax**-2.0, np.inf))
    lhs = np.where(ax > 0, lhs, 0.0)
    worst = float(np.max(lhs / A))
    return bool(np.all(lhs <= A * (1.0 + 1e-12))), worst


def scan_all(configs, grid: ScanGrid = ScanGrid()):
    """Run every scan over ``configs``; yields ``(params, report)``."""
    scans = (scan_gradient_bound, scan_3p_hat, scan_3p_plain, scan_php, scan_envelope)
    for params, fn in itertools.product(configs, scans):
        yield params, fn(params, grid)

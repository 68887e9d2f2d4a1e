"""Interval partitions of a control, two-sided bound factors, and their verification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .conditions import ControlPair, Rate, TabulatedF
from .errors import BoundViolation, EtaOutOfRange, JumpTooLarge

__all__ = [
    "ControlF",
    "PartitionResult",
    "BoundVerdict",
    "control_to_F",
    "greedy_partition",
    "upper_bound_factor",
    "lower_bound_factor",
    "classP_bounds",
    "binomial_term_bound",
    "verify_bounds",
]

_SLACK = 64 * np.finfo(float).eps
# rounding of interpolated sup points on steep linear pieces
_JUMP_SLACK = 1e-9


@dataclass(frozen=True)
class ControlF:
    """``F(u) = Q(s0, u)`` for ``u > s0`` and ``0`` otherwise."""

    control: ControlPair
    s0: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        q = np.asarray(self.control.Q(self.s0, np.maximum(u, self.s0)), dtype=float)
        out = np.where(u > self.s0, q, 0.0)
        return out if out.ndim else float(out)

    def left_limit(self, u):
        form = self.control.q_form
        if isinstance(form, TabulatedF) and u > self.s0:
            return float(form.left_limit(u) - form.F(self.s0))
        return float(self(u))

    def right_limit(self, u):
        return float(self(max(u, self.s0)))


@dataclass
class PartitionResult:
    points: list
    m: int
    k: int
    theta: float
    jumps: list = field(default_factory=list)


@dataclass
class BoundVerdict:
    passed: bool
    lower: float
    upper: float
    ratios: list
    margins: list
    worst: int


def control_to_F(control: ControlPair, s0) -> ControlF:
    return ControlF(control, float(s0))


def _limits(F):
    left = getattr(F, "left_limit", None) or F
    right = getattr(F, "right_limit", None) or F
    return (lambda u: float(left(u))), (lambda u: float(right(u)))


def _sup_level(F, s, t, level):
    """``sup{u in (s, t): F(u) <= level}`` for nondecreasing ``F``."""
    ctl = getattr(F, "control", None)
    form = getattr(ctl, "q_form", None)
    if isinstance(form, Rate):
        # F(u) = rate (u - s0) on u > s0
        if form.rate == 0:
            return t
        return min(t, max(s, F.s0 + level / form.rate))
    if isinstance(form, TabulatedF):
        return _sup_tabulated(form, F.s0, s, t, level)
    if isinstance(F, TabulatedF):
        return _sup_tabulated(F, None, s, t, level)
    lo, hi = s, t
    if float(F(np.nextafter(t, s))) <= level:
        return t
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if float(F(mid)) <= level:
            lo = mid
        else:
            hi = mid
    return lo


def _sup_tabulated(form: TabulatedF, s0, s, t, level):
    k = np.asarray(form.knots)
    v = np.asarray(form.values)
    base = 0.0 if s0 is None else float(form.F(s0))
    target = level + base
    if float(form.left_limit(t)) <= target:
        return t
    if form.kind == "step":
        # right-continuous steps: the set {F <= target} ends at the first knot above it
        j = int(np.searchsorted(v, target, side="right"))
        u = k[j] if j < k.size else t
        return min(t, max(s, float(u)))
    j = int(np.searchsorted(v, target, side="right"))
    if j == 0:
        return s
    if j >= k.size:
        return t
    k0, k1, v0, v1 = k[j - 1], k[j], v[j - 1], v[j]
    u = k0 + (target - v0) / (v1 - v0) * (k1 - k0) if v1 > v0 else k1
    return min(t, max(s, float(u)))


def greedy_partition(F, s, t, theta) -> PartitionResult:
    """Sup-construction ``r_i = sup{u in (s,t): F(u) - F(s+) <= i theta}``.

    ``F`` is any nondecreasing callable; ``ControlF`` and ``TabulatedF``
    are handled exactly, other callables by bisection.  One-sided limits are
    read through ``left_limit``/``right_limit`` when ``F`` provides them.
    Part variations are certified up to a relative slack of ``1e-9``.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not t > s:
        raise ValueError("need s < t")
    left, right = _limits(F)
    if isinstance(F, TabulatedF):
        left, right = (lambda u: float(F.left_limit(u))), (lambda u: float(F.F(u)))
    f_s = right(s)
    var = left(t) - f_s
    if not math.isfinite(var):
        raise ValueError("F(t-) - F(s+) must be finite")
    k = max(0, math.ceil(var / theta * (1.0 - _SLACK))) if var > 0 else 0
    ell = max(k, 1)
    pts = [float(s)]
    for i in range(1, ell):
        pts.append(_sup_level(F, s, t, f_s + i * theta))
    pts.append(float(t))
    pts = sorted(set(pts))
    jumps = [left(b) - right(a) for a, b in zip(pts[:-1], pts[1:])]
    scale = max(1.0, abs(f_s), abs(left(t)))
    bad = [j for j in jumps if j > theta + _JUMP_SLACK * scale]
    if bad:
        raise JumpTooLarge(f"part variation {max(bad):.6g} exceeds theta {theta:.6g}")
    return PartitionResult(pts, len(pts) - 1, max(k, 1), float(theta), jumps)


def _check_eta(eta, strict_zero=False):
    if not (0.0 < eta < 0.5 if strict_zero else 0.0 <= eta < 0.5):
        raise EtaOutOfRange(f"eta must lie in {'(0' if strict_zero else '[0'}, 1/2), got {eta}")


def upper_bound_factor(eta, q_value):
    """``(1/(1-2 eta))**(1 + q/eta)``, and ``e**q`` for ``eta = 0``."""
    _check_eta(eta)
    if q_value < 0:
        raise ValueError("q_value must be non-negative")
    if eta == 0:
        return math.exp(q_value)
    return math.exp(-(1.0 + q_value / eta) * math.log1p(-2.0 * eta))


def _golden_max(f, a, b, iterations=60):
    # bounded golden-section search for a unimodal f on [a, b]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    best = max((fc, c), (fd, d), (f(a), a), (f(b), b))
    return best[1], best[0]


def lower_bound_factor(eta, q_value):
    """``max_delta (4 delta/(1+2 delta))**(1 + q/(1/2 - eta - delta))``."""
    _check_eta(eta)
    if q_value < 0:
        raise ValueError("q_value must be non-negative")
    hi = 0.5 - eta - 1e-6
    lo = 1e-6
    if hi <= lo:
        return 0.0

    def logf(delta):
        return (1.0 + q_value / (0.5 - eta - delta)) * math.log(4.0 * delta / (1.0 + 2.0 * delta))

    _, val = _golden_max(logf, lo, hi)
    return math.exp(val)


def classP_bounds(eta, rate, elapsed):
    """``(((1-2 eta)/(1-eta))**e, (1/(1-eta))**e)`` with ``e = 1 + rate*elapsed/eta``."""
    _check_eta(eta, strict_zero=True)
    if rate < 0 or elapsed <= 0:
        raise ValueError("need rate >= 0 and elapsed > 0")
    e = 1.0 + rate * elapsed / eta
    upper = math.exp(-e * math.log1p(-eta))
    lower = math.exp(e * (math.log1p(-2.0 * eta) - math.log1p(-eta)))
    return lower, upper


def binomial_term_bound(n, k, theta):
    """``C(n+k-1, k-1) theta**n`` evaluated in log space."""
    if n < 0 or k < 1 or theta < 0:
        raise ValueError("need n >= 0, k >= 1, theta >= 0")
    if n == 0:
        return 1.0
    if theta == 0:
        return 0.0
    logc = gammaln(n + k) - gammaln(k) - gammaln(n + 1)
    return float(math.exp(logc + n * math.log(theta)))


def verify_bounds(series, base_density, eta, q_value, mode="P-class", tol=1e-6, points=None) -> BoundVerdict:
    """Check ``lower * p <= p_tilde <= upper * p`` at every sample.

    ``series`` is a ``SeriesResult`` (its ``value``) or an array of
    ``p_tilde`` values matching ``base_density``.  In ``"P-class"`` mode
    ``q_value`` is ``rate * (t - s)``; in ``"N-class"`` mode it is
    ``Q(s, t)``.  The factors are widened by ``1 ± 5 tol``.  Raises
    ``BoundViolation`` with the worst sample otherwise.
    """
    val = getattr(series, "value", series)
    pt = np.atleast_1d(np.asarray(val, dtype=float))
    p = np.atleast_1d(np.asarray(base_density, dtype=float))
    if pt.shape != p.shape:
        raise ValueError("series values and base density must have the same shape")
    if mode == "P-class":
        lower, upper = classP_bounds(eta, q_value, 1.0)
    elif mode == "N-class":
        lower, upper = lower_bound_factor(eta, q_value), upper_bound_factor(eta, q_value)
    else:
        raise ValueError("mode must be 'P-class' or 'N-class'")
    lo, hi = lower * (1.0 - 5.0 * tol), upper * (1.0 + 5.0 * tol)
    ratios = pt / p
    margins = np.minimum(ratios - lo, hi - ratios)
    worst = int(np.argmin(margins))
    verdict = BoundVerdict(bool(np.all(margins >= 0)), lower, upper, ratios.tolist(), margins.tolist(), worst)
    if not verdict.passed:
        info = {"index": worst, "ratio": float(ratios[worst]), "lower": lo, "upper": hi}
        if points is not None:
            info["point"] = tuple(points[worst])
        raise BoundViolation(
            f"p_tilde/p = {ratios[worst]:.6g} outside [{lo:.6g}, {hi:.6g}] at sample {worst}", worst=info
        )
    return verdict

"""Drift functionals: the Kato-type ratio, class P/N certification, split bound, Kato class."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _si

from .drift import DriftField
from .errors import NumericalNonConvergence
from .kernel import KernelParams, hat_factor, kernel_width
from .quadrature import GridSpec, _gauss, time_rule
from .table import get_table

__all__ = [
    "Rate",
    "TabulatedF",
    "ControlPair",
    "ClassPResult",
    "SplitBound",
    "KatoIndicator",
    "default_sample_set",
    "kato_functional",
    "estimate_class_P",
    "to_class_N",
    "split_bound",
    "time_integrated_hat",
    "kato_class_indicator",
]

CONDITIONS_GRID = GridSpec(n_time=8, n_space=201, L=20.0, tol=1e-4, max_refine=3)


@dataclass(frozen=True)
class Rate:
    """``Q(s, t) = rate * (t - s)``."""

    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be non-negative")

    def Q(self, s, t):
        return self.rate * (t - s)


@dataclass(frozen=True)
class TabulatedF:
    """``Q(s, t) = F(t) - F(s)`` for a nondecreasing right-continuous step/linear table.

    ``kind="step"`` reads ``F`` as right-continuous steps at ``knots``;
    ``kind="linear"`` interpolates linearly (constant outside).
    """

    knots: tuple
    values: tuple
    kind: str = "step"

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size == 0:
            raise ValueError("knots and values must be 1-D of equal length")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.diff(v) < 0):
            raise ValueError("F must be nondecreasing")
        if self.kind not in ("step", "linear"):
            raise ValueError("kind must be 'step' or 'linear'")
        object.__setattr__(self, "knots", tuple(k.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))

    def F(self, u):
        """Right-continuous value; flat extension left of the first knot."""
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        u = np.asarray(u, dtype=float)
        if self.kind == "linear":
            return np.interp(u, k, v)
        i = np.searchsorted(k, u, side="right") - 1
        return v[np.clip(i, 0, None)]

    def left_limit(self, u):
        """``F(u^-)``."""
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        u = np.asarray(u, dtype=float)
        if self.kind == "linear":
            return np.interp(u, k, v)
        i = np.searchsorted(k, u, side="left") - 1
        return v[np.clip(i, 0, None)]

    def Q(self, s, t):
        return self.F(t) - self.F(s)


@dataclass(frozen=True)
class ControlPair:
    """``(eta, Q)`` with ``Q`` in rate or tabulated form."""

    eta: float
    q_form: Rate | TabulatedF

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")

    def Q(self, s, t):
        return self.q_form.Q(s, t)


@dataclass
class ClassPResult:
    h: float | None
    found: bool
    capped: bool
    functional_at_h: float | None
    eta_target: float
    iterations: int
    bracket: tuple
    history: list = field(default_factory=list)


@dataclass
class SplitBound:
    value: float
    kato: float
    ratio: float

    def __float__(self):
        return float(self.value)


@dataclass
class KatoIndicator:
    gamma: float
    radii: list
    values: list
    decays: bool
    slope: float
    reason: str


def default_sample_set(span=2.0):
    """7x7 (x, y) grid spanning near and far regimes; includes the diagonal."""
    pts = [-span, -0.25 * span, -0.05 * span, 0.0, 0.05 * span, 0.25 * span, span]
    return [(x, y) for x in pts for y in pts]


def kato_functional(s, x, t, y, drift: DriftField, params: KernelParams, grid: GridSpec = CONDITIONS_GRID):
    """``∫_s^t ∫ p(s,x,u,z) |b(u,z)| |∂_z p(u,z,t,y)| dz du / p(s,x,t,y)``."""
    if not t > s:
        raise ValueError("need s < t")
    if drift.family == "Zero":
        return 0.0
    tab = get_table(params)
    ref = float(tab.density(t - s, y - x))

    def f(tl, tr, zx, yz, z):
        return tab.density(tl, zx) * drift.magnitude(s + tl, z) * np.abs(tab.gradient(tr, yz))

    val = _functional(f, s, t, x, y, drift, params, grid, base=(0.0, 1.0 / params.alpha))
    return val / ref


def _anchored_rule(L, scales, levels, n_uniform, n_gauss=6):
    """Line rule as ``(anchor, offset, weight)`` so that ``z - anchor`` stays exact.

    ``scales`` maps breakpoints to the width of the feature sitting there;
    panels shrink geometrically toward each breakpoint down to ``0.02 * width``.
    The half-lines beyond ``±L`` use ``z = L / xi**2``.
    """
    gx, gw = _gauss(n_gauss)
    pts = sorted(set([-L, L] + [c for c in scales if -L < c < L]))
    anchors, offsets, weights = [], [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        half = 0.5 * (hi - lo)
        for end, sign in ((lo, 1.0), (hi, -1.0)):
            w = scales.get(end)
            if w is None or w >= half:
                e = half * np.linspace(0.0, 1.0, n_uniform + 1)
            else:
                n_lev = max(levels, int(math.ceil(math.log(half / (0.02 * w)) / math.log(4.0))))
                ratio = min((0.02 * w / half) ** (1.0 / n_lev), 0.5)
                e = np.concatenate([[0.0], half * ratio ** np.arange(n_lev, -1, -1)])
            a, b = e[:-1], e[1:]
            d = (a[:, None] + 0.5 * (b - a)[:, None] * (gx + 1.0)[None, :]).ravel()
            anchors.append(np.full(d.size, end))
            offsets.append(sign * d)
            weights.append((0.5 * (b - a)[:, None] * gw[None, :]).ravel())
    xe = 2.0 ** -np.arange(0, 12)[::-1]
    a, b = np.concatenate([[0.0], xe[:-1]]), xe
    xi = (a[:, None] + 0.5 * (b - a)[:, None] * (gx + 1.0)[None, :]).ravel()
    wx = (0.5 * (b - a)[:, None] * gw[None, :]).ravel()
    z = L / xi**2
    wz = wx * 2.0 * L / xi**3
    anchors += [z, -z]
    offsets += [np.zeros_like(z)] * 2
    weights += [wz, wz]
    return np.concatenate(anchors), np.concatenate(offsets), np.concatenate(weights)


def _grading(sigma):
    # u ~ v**q turns distance**(-sigma) into the polynomial v**(m-1)
    if sigma <= 0:
        return 1.0
    m = math.ceil(2.0 * (1.0 - sigma) - 1e-12)
    return m / (1.0 - sigma)


def _end_exponents(s, x, y, drift, params, base):
    kappa = drift.singular_order
    on = [any(abs(p - c) <= 1e-12 * (1.0 + abs(c)) for c in drift.singular_points) for p in (x, y)]
    sl = base[0] + (kappa / params.alpha if on[0] else 0.0)
    sr = base[1] + (kappa / params.alpha if on[1] else 0.0)
    if drift.family == "KernelPower" and s <= 0.0:
        # sup_z |b(u, z)| ~ u**(-(alpha-1)/alpha) as u -> 0
        sl = max(sl, base[0] + (params.alpha - 1.0) / params.alpha)
    return min(sl, 0.999), min(sr, 0.999)


def _functional_once(f, s, t, x, y, drift, params, L, n_time, levels, n_uniform, sig):
    H = t - s
    sp = [float(c) for c in drift.singular_points]
    TL, TR, ZX, YZ, Z, W = [], [], [], [], [], []
    for side, sg in ((0, sig[0]), (1, sig[1])):
        d, wd = time_rule(0.0, 0.5 * H, n_time, grading=_grading(sg), ends="left")
        near, far = d, H - d
        tls, trs = (near, far) if side == 0 else (far, near)
        for tl, tr, wt in zip(tls, trs, wd):
            wl, wr = float(kernel_width(params, tl)), float(kernel_width(params, tr))
            scales = {}
            for c, w in [(x, wl), (y, wr)] + [(c, 1e-6 * min(wl, wr, 1.0)) for c in sp]:
                scales[c] = min(scales.get(c, math.inf), w)
            anc, off, wz = _anchored_rule(L, scales, levels, n_uniform)
            TL.append(np.full(anc.size, tl))
            TR.append(np.full(anc.size, tr))
            ZX.append((anc - x) + off)
            YZ.append((y - anc) - off)
            Z.append(anc + off)
            W.append(wt * wz)
    vals = f(*(np.concatenate(v) for v in (TL, TR, ZX, YZ, Z)))
    return float(np.dot(np.concatenate(W), vals))


def _functional(f, s, t, x, y, drift, params, grid, base):
    """``∫_s^t ∫_R f dz du`` for integrands singular at both time ends.

    Each half of ``(s, t)`` is integrated in the distance to its endpoint, so
    nodes far closer to an end than the rounding of ``t`` remain distinct.
    ``f(tl, tr, zx, yz, z)`` receives ``u - s``, ``t - u``, ``z - x``, ``y - z``
    and ``z``.  ``base`` holds the endpoint exponents of the integrand for a
    bounded drift; singular points of the drift add to them.
    """
    sig = _end_exponents(s, x, y, drift, params, base)
    L = max(grid.L, 4.0 * max([abs(x), abs(y)] + [abs(c) for c in drift.singular_points]) + 1.0)
    n_time, levels, n_uniform = max(2, grid.n_time // 2), 8, max(2, grid.n_space // 50)
    prev = _functional_once(f, s, t, x, y, drift, params, L, n_time, levels, n_uniform, sig)
    change = math.inf
    for _ in range(grid.max_refine):
        n_time, levels, n_uniform = 2 * n_time, levels + 4, 2 * n_uniform
        cur = _functional_once(f, s, t, x, y, drift, params, L, n_time, levels, n_uniform, sig)
        change = abs(cur - prev)
        if change <= grid.tol * abs(cur) + 1e-300:
            return cur
        prev = cur
    raise NumericalNonConvergence(
        f"drift functional: last refinement changed the value by {change:.3g} "
        f"(value {prev:.6g}, tol {grid.tol:g})"
    )


def _reduce_samples(drift, samples, anchors):
    if drift.homogeneous:
        # depends on y - x and on h only
        seen = {}
        for x, y in samples:
            seen.setdefault(round(y - x, 14), (x, y))
        return list(seen.values()), list(anchors)[:1]
    if drift.even_magnitude and not drift.time_dependent:
        # the functional only sees |b|, which is even: (x, y) ~ (-x, -y)
        seen = {}
        for x, y in samples:
            key = max((x, y), (-x, -y))
            seen.setdefault((round(key[0], 14), round(key[1], 14)), (x, y))
        return list(seen.values()), list(anchors)
    return list(samples), list(anchors)


def _worst(drift, params, h, samples, anchors, grid, eta=None, last=None):
    """Largest sampled functional at window ``h``.

    With ``eta`` set, stops at the first sample above it; ``last`` (a dict of
    earlier values) orders the samples so the likely worst goes first.
    """
    keys = [(s, x, y) for s in anchors for x, y in samples]
    if last:
        keys.sort(key=lambda k: -last.get(k, math.inf))
    best = 0.0
    for k in keys:
        s, x, y = k
        v = kato_functional(s, x, s + h, y, drift, params, grid)
        if last is not None:
            last[k] = v
        best = max(best, v)
        if eta is not None and v > eta:
            break
    return best


def estimate_class_P(drift: DriftField, params: KernelParams, eta_target, sample_set=None,
                     grid: GridSpec = CONDITIONS_GRID, anchors=(0.0,), bracket=(1e-4, 1e2),
                     iterations=40, rel_tol=1e-3, floor=1e-60) -> ClassPResult:
    """Largest window ``h`` whose worst sampled functional is ``<= eta_target``.

    Bisection in ``log h``, assuming the worst-case functional grows with
    ``h``.  Stops after ``iterations`` steps or once the bracket is resolved
    to ``rel_tol``.  When the lower bracket end fails, it is pushed down by
    factors of ``1e4`` until it passes or drops below ``floor``; drifts whose
    functional vanishes only like a small power of ``h`` need this.
    ``found=False`` when even the smallest probed window fails;
    ``capped=True`` when the upper end already passes (e.g. zero drift).
    """
    if eta_target <= 0:
        raise ValueError("eta_target must be positive")
    samples = list(sample_set) if sample_set is not None else default_sample_set()
    samples, anchors = _reduce_samples(drift, samples, anchors)
    lo, hi = map(float, bracket)
    hist = []
    last = {}
    f_hi = _worst(drift, params, hi, samples, anchors, grid, eta_target, last)
    hist.append((hi, f_hi))
    if f_hi <= eta_target:
        return ClassPResult(hi, True, True, f_hi, eta_target, 0, (lo, hi), hist)
    while True:
        f_lo = _worst(drift, params, lo, samples, anchors, grid, eta_target, last)
        hist.append((lo, f_lo))
        if f_lo <= eta_target:
            break
        if lo * 1e-4 < floor:
            return ClassPResult(None, False, False, f_lo, eta_target, 0, (lo, hi), hist)
        lo, hi = lo * 1e-4, lo
    low_end = lo
    # samples already below eta at the failing end stay below it on the whole bracket
    full = {}
    _worst(drift, params, hi, samples, anchors, grid, None, full)
    keep = {k for k, v in full.items() if v > eta_target}
    samples = sorted({(x, y) for _, x, y in keep})
    anchors = sorted({s for s, _, _ in keep})
    best = (lo, f_lo)
    it = 0
    for it in range(1, iterations + 1):
        mid = math.sqrt(lo * hi)
        fm = _worst(drift, params, mid, samples, anchors, grid, eta_target, last)
        hist.append((mid, fm))
        if fm <= eta_target:
            lo, best = mid, (mid, fm)
        else:
            hi = mid
        if hi / lo - 1.0 < rel_tol:
            break
    return ClassPResult(best[0], True, False, best[1], eta_target, it, (low_end, float(bracket[1])), hist)


def to_class_N(eta, h) -> ControlPair:
    """Class-P window ``h`` at level ``eta`` gives the linear control ``Q = (eta/h)(t-s)``."""
    if eta <= 0 or h <= 0:
        raise ValueError("eta and h must be positive")
    return ControlPair(eta, Rate(eta / h))


def split_bound(s, x, t, y, drift: DriftField, params: KernelParams, grid: GridSpec = CONDITIONS_GRID):
    """``∫∫ (p̂(s,x,u,z) + p̂(u,z,t,y)) |b(u,z)| dz du`` with the empirical Kato/split ratio."""
    if not t > s:
        raise ValueError("need s < t")
    if drift.family == "Zero":
        return SplitBound(0.0, 0.0, math.nan)
    tab = get_table(params)

    def f(tl, tr, zx, yz, z):
        left = hat_factor(params, tl) * tab.density(tl, zx)
        right = hat_factor(params, tr) * tab.density(tr, yz)
        return (left + right) * drift.magnitude(s + tl, z)

    val = _functional(f, s, t, x, y, drift, params, grid, base=(1.0 / params.alpha, 1.0 / params.alpha))
    kato = kato_functional(s, x, t, y, drift, params, grid)
    return SplitBound(val, kato, kato / val if val > 0 else math.nan)


def time_integrated_hat(t, x, params: KernelParams, tol=1e-8):
    """``∫_0^t p̂(u, x) du`` for the unit-weight kernel."""
    if t <= 0 or x == 0:
        raise ValueError("need t > 0 and x != 0")
    if params.mixed and params.a != 1.0:
        raise ValueError("time_integrated_hat is defined for a = 1")
    tab = get_table(params)
    r = abs(float(x))

    def f(u):
        return float(hat_factor(params, u) * tab.density(u, r)) if u > 0 else 0.0

    # the integrand peaks near the time the kernel width reaches |x|
    knee = min(t, r**params.alpha)
    pts = [p for p in (knee * 1e-3, knee, min(t, 10 * knee)) if 0 < p < t]
    edges = [0.0] + sorted(set(pts)) + [t]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", _si.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            try:
                total += _si.quad(f, a, b, epsabs=0.0, epsrel=tol, limit=200)[0]
            except _si.IntegrationWarning as exc:
                raise NumericalNonConvergence(f"time_integrated_hat on [{a}, {b}]: {exc}") from exc
    return total


def _ball_integral(drift, x, eps, gamma, levels=14):
    """``∫_{|z-x|<eps} |b(z)| |z-x|^{gamma-2} dz`` with a divergence test.

    The ball is cut into dyadic shells toward ``x``; a convergent integral
    has shell contributions that eventually shrink geometrically.  Returns
    ``inf`` when the innermost shells stop shrinking.
    """
    expo = gamma - 2.0
    sp = [c for c in drift.singular_points if abs(c - x) < eps and c != x]

    def g(z):
        return float(drift.magnitude(0.0, z)) * abs(z - x) ** expo

    def piece(a, b):
        pts = [c for c in sp if a < c < b]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", _si.IntegrationWarning)
            return _si.quad(g, a, b, points=pts or None, limit=200, epsabs=0.0, epsrel=1e-10)[0]

    total = 0.0
    shells = []
    for k in range(levels):
        r_out = eps * 2.0**-k
        r_in = eps * 2.0 ** -(k + 1)
        v = piece(x + r_in, x + r_out) + piece(x - r_out, x - r_in)
        shells.append(v)
        total += v
    tail = shells[-4:]
    ratios = [tail[i + 1] / tail[i] for i in range(3) if tail[i] > 0]
    if ratios and min(ratios) >= 0.97:
        return math.inf
    # geometric remainder inside the last shell
    q = max(ratios) if ratios else 0.0
    return total + (shells[-1] * q / (1.0 - q) if q < 1 else 0.0)


def kato_class_indicator(drift: DriftField, gamma, probe_radii=(1.0, 0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4),
                         x_probes=None, d=1) -> KatoIndicator:
    """Small-ball functional ``sup_x ∫_{|z-x|<eps} |b(z)||z-x|^{gamma-(d+1)} dz`` against ``eps``.

    ``decays`` is true when every value is finite, the sequence is
    nonincreasing and its log-log slope over the probe radii is positive.
    """
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    if d != 1:
        raise ValueError("the indicator is implemented for d = 1")
    if drift.time_dependent:
        raise ValueError("the Kato-class indicator needs a spatial-only drift")
    radii = sorted((float(r) for r in probe_radii), reverse=True)
    if x_probes is None:
        x_probes = sorted(set(list(drift.singular_points) + [-1.0, -0.1, 0.05, 0.5, 1.0]))
    vals = []
    for eps in radii:
        xs = set(x_probes)
        for c in drift.singular_points:
            xs.update((c + 0.5 * eps, c - 0.5 * eps, c + 0.1 * eps))
        vals.append(max(_ball_integral(drift, x, eps, gamma) for x in sorted(xs)))
    if not all(math.isfinite(v) for v in vals):
        return KatoIndicator(gamma, radii, vals, False, math.nan, "small-ball integral diverges")
    if vals[0] == 0.0:
        return KatoIndicator(gamma, radii, vals, True, math.inf, "drift vanishes on the probes")
    lr = np.log(radii)
    lv = np.log(np.maximum(vals, 1e-300))
    slope = float(np.polyfit(lr, lv, 1)[0])
    mono = all(vals[i + 1] <= vals[i] * (1 + 1e-9) for i in range(len(vals) - 1))
    ok = mono and slope > 0
    reason = "decays" if ok else ("not monotone" if not mono else "no decay")
    return KatoIndicator(gamma, radii, vals, ok, slope, reason)

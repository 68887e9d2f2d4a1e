"""The twelve acceptance checks, shared by ``kp verify`` and the test suite.

Every check returns a ``CriterionResult``; none raises on a failed
comparison.  Kernel tables are built once per ``(alpha, beta)`` and cached
on disk, so ``warm_tables`` is timed separately from the checks.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import (binomial_term_bound, classP_bounds, control_to_F, greedy_partition,
                     verify_bounds)
from .conditions import (ControlPair, Rate, TabulatedF, estimate_class_P, kato_class_indicator,
                         kato_functional, time_integrated_hat)
from .drift import DriftField
from .errors import BoundViolation
from .generator import TestFunction, weak_generator_residual
from .inequalities import (ScanGrid, factor_inequality_check, scan_3p_hat, scan_3p_plain,
                           scan_envelope, scan_gradient_bound, scan_php)
from .kernel import KernelParams, SpaceTimeArg, eval_density, eval_gradient, kernel_width, scale_to_unit
from .quadrature import GridSpec, integrate_1d, integrate_line
from .series import check_order_ck, get_solver, series_sum
from .table import get_table

__all__ = ["CriterionResult", "CRITERIA", "BASE_CONFIGS", "warm_tables", "run_criteria", "sample_pairs"]

ALPHA, BETA = 1.5, 1.2
P0 = KernelParams(ALPHA)
P1 = KernelParams(ALPHA, BETA, 1.0)
# alpha = 1.2 cannot take beta = 1.2; it is paired with beta = 1.1
BASE_CONFIGS = [KernelParams(al) for al in (1.2, 1.5, 1.8)] + [
    KernelParams(1.2, 1.1, 1.0), KernelParams(1.5, 1.2, 1.0), KernelParams(1.8, 1.2, 1.0)]
SERIES_GRID = GridSpec(n_time=16, n_space=201, L=10.0, tol=1e-6)
DRIFT_C = 0.3
HORIZON = 0.5


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    runtime: float = 0.0
    budget: float = math.inf
    metrics: dict = field(default_factory=dict)

    @property
    def within_budget(self):
        return self.runtime <= self.budget

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] criterion {self.number:2d} {self.name}: {self.detail} "
                f"({self.runtime:.1f}s, budget {self.budget:g}s)")


def sample_pairs():
    """The 15 ``(x, y)`` pairs of the series checks."""
    return [(x, x + d) for x in (-0.5, 0.0, 0.5) for d in (-1.0, -0.3, 0.0, 0.3, 1.0)]


def warm_tables():
    for p in BASE_CONFIGS + [KernelParams(1.5, 0.8, 1.0)]:
        get_table(p)


def _rel(a, b):
    return abs(a - b) / abs(b)


# 1 --------------------------------------------------------------------
def c1_cauchy():
    p = KernelParams(1.0)
    worst = 0.0
    for t in (0.5, 1.0, 2.0):
        for x in np.linspace(-10.0, 10.0, 41):
            exact = t / (math.pi * (t * t + x * x))
            worst = max(worst, _rel(eval_density(p, SpaceTimeArg(t, x)), exact))
    return worst <= 1e-6, f"max rel err {worst:.2e} (tol 1e-6)", {"max_rel_err": worst}


# 2 --------------------------------------------------------------------
def _mass(p, t):
    w = float(get_table(p).density(t, 0.0)) ** -1

    def f(x):
        return 2.0 * eval_density(p, SpaceTimeArg(t, x))

    a = integrate_1d(f, 0.0, w, tol=1e-10)[0]
    b = integrate_1d(f, w, 20 * w, tol=1e-10)[0]
    c = integrate_1d(f, 20 * w, math.inf, tol=1e-10)[0]
    return a + b + c


def _ck_residual(p, s, u, t, x, y):
    tab = get_table(p)
    wl, wr = float(kernel_width(p, u - s)), float(kernel_width(p, t - u))

    def f(z):
        return tab.density(u - s, z - x) * tab.density(t - u, y - z)

    val = integrate_line(f, 20.0, centers=(x, y), widths=(wl, wr), levels=24, tail=True)
    ref = float(tab.density(t - s, y - x))
    return abs(val - ref) / ref


def c2_normalization_ck():
    worst_mass, worst_ck = 0.0, 0.0
    triples = [(0.0, 0.2, 0.5), (0.1, 0.6, 1.5), (0.0, 1.0, 3.0)]
    xs, ys = (-0.7, 0.0, 1.3), (-1.0, 0.2, 2.5)
    for p in BASE_CONFIGS:
        for t in (0.1, 1.0, 10.0):
            worst_mass = max(worst_mass, abs(_mass(p, t) - 1.0))
        for s, u, t in triples:
            for x in xs:
                for y in ys:
                    worst_ck = max(worst_ck, _ck_residual(p, s, u, t, x, y))
    ok = worst_mass <= 1e-6 and worst_ck <= 1e-4
    return ok, f"mass err {worst_mass:.2e} (1e-6), CK rel residual {worst_ck:.2e} (1e-4)", {
        "mass_err": worst_mass, "ck_rel": worst_ck}


# 3 --------------------------------------------------------------------
def c3_gradient():
    rng = np.random.default_rng(3)
    worst = 0.0
    h = 1e-4
    for p in BASE_CONFIGS:
        for _ in range(20):
            t = float(10 ** rng.uniform(-1, 1))
            x = float(rng.uniform(-3, 3))
            if abs(x) < 0.05:
                x += 0.3
            g = float(eval_gradient(p, SpaceTimeArg(t, x))[0])
            fd = (eval_density(p, SpaceTimeArg(t, x + h)) - eval_density(p, SpaceTimeArg(t, x - h))) / (2 * h)
            worst = max(worst, _rel(g, fd))
    return worst <= 1e-5, f"max rel err vs central difference {worst:.2e} (tol 1e-5)", {"max_rel_err": worst}


# 4 --------------------------------------------------------------------
def c4_scaling():
    rng = np.random.default_rng(4)
    p = KernelParams(ALPHA, BETA, 2.0)
    worst = 0.0
    for _ in range(50):
        arg = SpaceTimeArg(float(10 ** rng.uniform(-2, 1)), float(rng.uniform(-5, 5)))
        unit, uarg, c = scale_to_unit(p, arg)
        worst = max(worst, _rel(c * eval_density(unit, uarg), eval_density(p, arg)))
    return worst <= 1e-8, f"max round-trip rel err {worst:.2e} (tol 1e-8)", {"max_rel_err": worst}


# 5 --------------------------------------------------------------------
@functools.lru_cache(maxsize=None)
def _constant_series(T=HORIZON, N=8):
    drift = DriftField.constant(DRIFT_C)
    tab = get_table(P0)
    out = []
    for x, y in sample_pairs():
        res = series_sum(N, 0.0, x, T, y, drift, P0, SERIES_GRID)
        out.append((x, y, res, float(tab.density(T, y - x))))
    return out


def c5_constant_series():
    tab = get_table(P0)
    worst, ratio = 0.0, 0.0
    for x, y, res, _ in _constant_series():
        exact = float(tab.density(HORIZON, y - x - DRIFT_C * HORIZON))
        worst = max(worst, _rel(float(res.value), exact))
        ratio = max(ratio, res.tail_ratio)
    ok = worst <= 1e-3 and ratio < 0.5
    return ok, f"max rel err {worst:.2e} (1e-3), tail_ratio {ratio:.3f} (< 0.5)", {
        "max_rel_err": worst, "tail_ratio": ratio}


# 6 --------------------------------------------------------------------
def c6_order_ck():
    drift = DriftField.constant(DRIFT_C)
    worst = 0.0
    for n in range(4):
        for s, u, t in [(0.0, 0.2, 0.5), (0.0, 0.35, 0.5)]:
            for x, y in [(0.0, 0.3), (-0.5, 0.5), (0.5, -0.3)]:
                sol = get_solver(P0, drift, s, x, t, SERIES_GRID)
                sol.ensure(n)
                scale = float(np.max(np.abs(sol.nodal(n)[-1])))
                worst = max(worst, check_order_ck(n, s, u, t, x, y, drift, P0, SERIES_GRID) / scale)
    return worst <= 1e-3, f"max residual / sup|p_n| {worst:.2e} (tol 1e-3)", {"max_rel": worst}


# 7 --------------------------------------------------------------------
ETA = 0.25


@functools.lru_cache(maxsize=None)
def _class_p_constant():
    return estimate_class_P(DriftField.constant(DRIFT_C), P0, ETA)


def c7_classP_bounds():
    cp = _class_p_constant()
    h = cp.h
    tol = 5e-5
    rows = _constant_series()
    pt = np.array([float(r[2].value) for r in rows])
    p = np.array([r[3] for r in rows])
    pts = [(r[0], r[1]) for r in rows]
    try:
        v = verify_bounds(pt, p, ETA, ETA / h * HORIZON, "P-class", tol=tol, points=pts)
        positive = True
        lo, hi = v.lower, v.upper
    except BoundViolation as exc:
        positive, lo, hi = False, math.nan, math.nan
        print(exc)
    half = ETA / 2
    try:
        verify_bounds(pt, p, half, half / h * HORIZON, "P-class", tol=tol, points=pts)
        negative = False
    except BoundViolation:
        negative = True
    ratios = pt / p
    lo2, hi2 = classP_bounds(half, half / h, HORIZON)
    detail = (f"h={h:.4g}, factors [{lo:.3g}, {hi:.3g}] hold: {positive}; "
              f"p~/p in [{ratios.min():.3f}, {ratios.max():.3f}]; "
              f"eta/2 factors [{lo2:.3g}, {hi2:.3g}] raise BoundViolation: {negative}")
    return positive and negative, detail, {"h": h, "positive": positive, "negative": negative}


# 8 --------------------------------------------------------------------
def c8_binomial_chain():
    cp = _class_p_constant()
    h = cp.h
    eps = ETA
    theta = ETA + eps
    T = 2.5 * h
    part = greedy_partition(control_to_F(ControlPair(ETA, Rate(ETA / h)), 0.0), 0.0, T, eps)
    m = part.m
    drift = DriftField.constant(DRIFT_C)
    tab = get_table(P0)
    tol = SERIES_GRID.tol
    worst = 0.0
    for x, y in sample_pairs():
        res = series_sum(6, 0.0, x, T, y, drift, P0, SERIES_GRID, tol=0.0)
        p = float(tab.density(T, y - x))
        for n, term in enumerate(res.terms[:7]):
            bound = binomial_term_bound(n, m, theta) * p * (1 + 5 * tol)
            worst = max(worst, abs(float(term)) / bound)
    # measured functional per part stays below theta
    kmax = max(kato_functional(a, 0.0, b, 0.0, drift, P0) for a, b in zip(part.points[:-1], part.points[1:]))
    ok = m == 3 and worst <= 1.0 and kmax <= theta
    return ok, f"m={m}, theta={theta}, max |p_n|/bound {worst:.6f} (<= 1), max part functional {kmax:.3g}", {
        "m": m, "max_ratio": worst, "part_functional": kmax}


# 9 --------------------------------------------------------------------
def c9_partition():
    msgs = []
    r = greedy_partition(TabulatedF((0.0, 1.0), (0.0, 1.0), "linear"), 0.0, 1.0, 0.4)
    ok1 = r.points == [0.0, 0.4, 0.8, 1.0] and r.m == 3 and r.theta == 0.4
    r = greedy_partition(lambda u: 0.0, 0.0, 1.0, 0.4)
    ok2 = r.points == [0.0, 1.0] and r.m == 1
    r = greedy_partition(TabulatedF((0.0, 0.5), (0.0, 0.5), "step"), 0.0, 1.0, 0.6)
    ok3 = r.points == [0.0, 1.0] and r.m == 1 and r.theta == 0.6
    msgs.append(f"examples {ok1}/{ok2}/{ok3}")
    rng = np.random.default_rng(9)
    bad = 0
    for i in range(100):
        knots = np.sort(rng.uniform(0.0, 1.0, rng.integers(1, 8)))
        values = np.cumsum(rng.exponential(0.3, knots.size))
        F = TabulatedF(tuple(knots), tuple(values), "step" if i % 2 else "linear")
        theta = float(rng.uniform(0.05, 0.5))
        r = greedy_partition(F, 0.0, 1.0, theta)
        lim = [F.left_limit(b) - F.F(a) for a, b in zip(r.points[:-1], r.points[1:])]
        if r.m > r.k or max(lim) > theta * (1 + 1e-9) or np.any(np.diff(r.points) <= 0):
            bad += 1
    msgs.append(f"random cases failing {bad}/100")
    return ok1 and ok2 and ok3 and bad == 0, ", ".join(msgs), {"random_failures": bad}


# 10 -------------------------------------------------------------------
def c10_scans():
    grid = ScanGrid()
    reports = []
    for p in (P0, P1):
        for fn in (scan_gradient_bound, scan_3p_hat, scan_3p_plain, scan_php, scan_envelope):
            reports.append((p, fn(p, grid)))
    reports.append((KernelParams(ALPHA, 0.8, 1.0), scan_3p_plain(KernelParams(ALPHA, 0.8, 1.0), grid)))
    bad = [f"{r.name}(a={p.a})" for p, r in reports if not (r.stable and math.isfinite(r.sup_ratio))]
    holds, worst = factor_inequality_check(P1, grid)
    ok = not bad and holds
    return ok, f"{len(reports)} scans, unstable/infinite: {bad or 'none'}; factor inequality holds: {holds}", {
        "sups": {f"{r.name}|a={p.a}|beta={p.beta if p.mixed else None}": r.sup_ratio for p, r in reports}}


# 11 -------------------------------------------------------------------
def c11_power_law():
    pl = DriftField.power_law(0.1, P1)
    kα = kato_class_indicator(pl, ALPHA)
    kβ = kato_class_indicator(pl, BETA)
    cp = estimate_class_P(pl, P1, 0.25)
    x1, x2 = 1e-3, 1e-2
    slope = math.log(time_integrated_hat(1.0, x2, P1) / time_integrated_hat(1.0, x1, P1)) / math.log(x2 / x1)
    target = ALPHA - 2.0
    ok = kα.decays and not kβ.decays and cp.found and abs(slope - target) <= 0.15
    return ok, (f"indicator gamma=alpha decays {kα.decays}, gamma=beta decays {kβ.decays}; "
                f"class-P h={cp.h} (found {cp.found}); hat slope {slope:.3f} vs {target}"), {
        "h": cp.h, "slope": slope}


# 12 -------------------------------------------------------------------
def c12_weak_residual():
    phis = [TestFunction((1.0, 0.3), (0.5, 0.8)), TestFunction((0.6, -0.4), (0.4, 1.2), 2.0)]
    tab = get_table(P0)
    c = DriftField.constant(DRIFT_C)
    worst = 0.0
    for phi in phis:
        r0 = weak_generator_residual(0.0, 0.0, phi, DriftField.zero(), P0)

        def kern(u, z):
            return tab.density(u, z - DRIFT_C * u)

        r1 = weak_generator_residual(0.0, 0.0, phi, c, P0, kernel=kern)
        worst = max(worst, r0 / phi.sup_norm, r1 / phi.sup_norm)
    return worst <= 1e-3, f"max residual / sup|phi| {worst:.2e} (tol 1e-3)", {"max_rel": worst}


CRITERIA = {
    1: ("Cauchy oracle", c1_cauchy, 5),
    2: ("normalization and CK", c2_normalization_ck, 60),
    3: ("gradient vs finite differences", c3_gradient, 30),
    4: ("scaling identity", c4_scaling, 10),
    5: ("constant-drift series", c5_constant_series, 300),
    6: ("order-wise CK", c6_order_ck, 300),
    7: ("class-P bounds", c7_classP_bounds, 120),
    8: ("binomial chain", c8_binomial_chain, 120),
    9: ("partition algorithm", c9_partition, 1),
    10: ("inequality scans", c10_scans, 180),
    11: ("power-law drift pipeline", c11_power_law, 120),
    12: ("weak generator residual", c12_weak_residual, 180),
}


def run_criterion(number) -> CriterionResult:
    name, fn, budget = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail, metrics = fn()
    return CriterionResult(number, name, bool(ok), detail, time.perf_counter() - t0, budget, metrics)


def run_criteria(numbers=None):
    for n in numbers or sorted(CRITERIA):
        yield run_criterion(n)

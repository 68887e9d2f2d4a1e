"""Perturbation series for the kernel of ``L + b·∇`` in one space dimension.

Each order is represented by its projections onto hat functions
``phi_j`` of a uniform lattice ``z_j = x + (j - J) h``::

    A_n(u)_j = ∫ phi_j(z) p_n(s, x, u, z) dz

The recursion ``p_n = ∫∫ p_{n-1} b ∂_z p`` then becomes, exactly up to the
replacement of ``b * p_{n-1}`` by lattice point masses,

    A_n(t)_i = ∫_s^t Σ_j b(u, z_j) A_{n-1}(u)_j W_{i-j}(t-u) du

with ``W_k(tau) = ∫ phi_0(v) (-∂p)(tau, kh + v) dv``.  Because ``W`` is the
hat-smoothed kernel gradient it stays bounded as ``tau -> 0``, so the only
time singularity left is the ``(u-s)`` end, handled by a graded mesh.  Spatial
sums are linear convolutions done by FFT.  Point values are recovered with
the fourth-order deconvolution ``A/h - Δ²A/(12h)``.
"""
from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _si
from scipy.fft import irfft, next_fast_len, rfft

from .drift import DriftField
from .errors import DivergenceDetected, NumericalNonConvergence
from .kernel import KernelParams
from .quadrature import GridSpec
from .table import get_table

__all__ = [
    "SeriesResult",
    "SeriesSolver",
    "get_solver",
    "series_term",
    "series_sum",
    "check_order_ck",
    "check_ck",
]

log = logging.getLogger(__name__)

_GL6 = np.polynomial.legendre.leggauss(6)
_GL4 = np.polynomial.legendre.leggauss(4)


def _hat_rule():
    x, w = np.polynomial.legendre.leggauss(8)
    v = 0.5 * (x + 1.0)
    # (1 - |v|) on [-1, 0] and [0, 1]
    nodes = np.concatenate([v - 1.0, v])
    weights = np.concatenate([0.5 * w * v, 0.5 * w * (1.0 - v)])
    return nodes, weights


_HAT_RULE = _hat_rule()


@dataclass
class SeriesResult:
    """Terms and partial sums of the series at one query point."""

    terms: list
    partial_sums: list
    tail_ratio: float
    converged: bool
    tail_estimate: float
    term_norms: list = field(default_factory=list)
    bound_check: dict | None = None

    @property
    def value(self):
        return self.partial_sums[-1]


def _second_diff(a):
    out = np.empty_like(a)
    out[..., 1:-1] = a[..., 2:] - 2.0 * a[..., 1:-1] + a[..., :-2]
    out[..., 0] = out[..., 1]
    out[..., -1] = out[..., -2]
    return out


def _graded_unit_rule(levels):
    """Rule on [0, 1] with geometric panels toward both ends."""
    x, w = _GL4
    half = 0.5 * 2.0 ** -np.arange(levels + 1)
    edges = np.concatenate([[0.0], half[::-1], 1.0 - half[1:]])
    edges = np.unique(np.concatenate([edges, [1.0]]))
    a, b = edges[:-1], edges[1:]
    nodes = (a[:, None] + 0.5 * (b - a)[:, None] * (x + 1.0)[None, :]).ravel()
    weights = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights


class SeriesSolver:
    """All orders of the series started from ``(s, x)`` up to time ``T``.

    Orders are computed lazily and cached, so asking for order 8 after
    order 3 costs five more sweeps.  ``extra_times`` are added to the time
    mesh so projections there are exact mesh values rather than
    interpolants.
    """

    def __init__(self, params: KernelParams, drift: DriftField, s, x, T, grid: GridSpec = GridSpec(n_time=32, n_space=401),
                 extra_times=(), smooth_wide=10.0):
        if params.dim != 1:
            raise ValueError("the series is computed in one space dimension")
        if not params.is_perturbation_grade():
            raise ValueError(f"parameters {params} are not perturbation-grade")
        if not T > s:
            raise ValueError("need T > s")
        self.params, self.drift = params, drift
        self.s, self.x, self.T = float(s), float(x), float(T)
        self.grid = grid
        self.table = get_table(params)
        if grid.n_space % 2 == 0:
            raise ValueError("n_space must be odd so x is a lattice node")
        self.J = (grid.n_space - 1) // 2
        self.h = grid.h
        self.z = self.x + self.h * (np.arange(2 * self.J + 1) - self.J)
        self.ell = np.arange(-2 * self.J, 2 * self.J + 1)
        self.nfft = next_fast_len(6 * self.J + 1, real=True)
        self._wide = smooth_wide
        # time at which the kernel width equals h
        self._tau_h = self._time_for_width(self.h)

        q = grid.grading_exponent or params.alpha / (params.alpha - 1.0)
        q = min(q, 8.0)
        self.q = q
        M = grid.n_time
        base = self.s + (self.T - self.s) * (np.arange(M + 1) / M) ** q
        extra = [float(e) for e in extra_times if self.s < e <= self.T]
        self.times = np.unique(np.concatenate([base, extra]))
        self.kappa = M * ((self.times - self.s) / (self.T - self.s)) ** (1.0 / q)
        self._build_rules()
        self._w_fft = {}
        self._b_static = None
        self.A = [self._order0()]
        self.norms = [float(np.max(np.abs(self.nodal(0)[-1])))]

    # kernel pieces ---------------------------------------------------
    def _width(self, tau):
        p = self.params
        w = tau ** (1.0 / p.alpha)
        if p.mixed:
            w = np.maximum(w, (p.a**p.beta * tau) ** (1.0 / p.beta))
        return w

    def _time_for_width(self, width):
        p = self.params
        t = width**p.alpha
        if p.mixed:
            t = min(t, width**p.beta / p.a**p.beta)
        return t

    def _project_kernel(self, tau, ell):
        """``∫ phi_0(v) p(tau, l h + v) dv`` for lattice offsets ``ell``."""
        h = self.h
        if tau <= 0:
            return (ell == 0).astype(float)
        tab = self.table
        if self._width(tau) > self._wide * h:
            pts = np.arange(ell[0] - 1, ell[-1] + 2) * h
            pv = tab.density(tau, pts)
            return h * (pv[1:-1] + (pv[2:] - 2 * pv[1:-1] + pv[:-2]) / 12.0)
        levels = int(min(40, max(4, math.ceil(math.log2(20.0 * h / self._width(tau))))))
        v, w = _graded_unit_rule(levels)
        w0 = ell[:, None] * h
        vh = v[None, :] * h
        cp = tab.cdf(tau, w0 + vh)
        cm = tab.cdf(tau, w0 - vh)
        return (cp - cm) @ w

    def _project_gradient(self, tau):
        """``W_l(tau) = ∫ phi_0(v) (-∂p)(tau, l h + v) dv`` for all offsets."""
        h = self.h
        tab = self.table
        ell = self.ell
        if self._width(tau) > self._wide * h:
            pts = np.arange(ell[0] - 1, ell[-1] + 2) * h
            g = -tab.gradient(tau, pts)
            W = h * (g[1:-1] + (g[2:] - 2 * g[1:-1] + g[:-2]) / 12.0)
        else:
            pts = np.arange(ell[0] - 1, ell[-1] + 2) * h
            c = tab.cdf(tau, pts)
            W = -(c[2:] - 2 * c[1:-1] + c[:-2]) / h
        # undo the hat smoothing applied a second time by the lattice sum
        return W - _second_diff(W) / 12.0

    def _gradient_fft(self, tau):
        key = float(tau)
        f = self._w_fft.get(key)
        if f is None:
            f = rfft(self._project_gradient(tau), self.nfft)
            self._w_fft[key] = f
        return f

    # time rules --------------------------------------------------------
    def _build_rules(self):
        u = self.times
        x6, w6 = _GL6
        self.panel_nodes = [u[m] + 0.5 * (u[m + 1] - u[m]) * (x6 + 1.0) for m in range(len(u) - 1)]
        self.panel_weights = [0.5 * (u[m + 1] - u[m]) * w6 for m in range(len(u) - 1)]
        x4, w4 = _GL4
        self.last_rules = [None]
        floor = 0.01 * self._tau_h
        for k in range(1, len(u)):
            lo, hi = u[k - 1], u[k]
            d = hi - lo
            n = int(min(40, max(0, math.ceil(math.log2(d / floor)))))
            edges = hi - d * 2.0 ** -np.arange(n + 1)
            edges = np.concatenate([edges, [hi]])
            a, b = edges[:-1], edges[1:]
            nodes = (a[:, None] + 0.5 * (b - a)[:, None] * (x4 + 1.0)[None, :]).ravel()
            weights = (0.5 * (b - a)[:, None] * w4[None, :]).ravel()
            self.last_rules.append((nodes, weights))

    def _interp_weights(self, u):
        """Cubic Lagrange stencils in the graded index variable."""
        kap = self.kappa
        M = self.grid.n_time
        kq = M * ((np.asarray(u) - self.s) / (self.T - self.s)) ** (1.0 / self.q)
        i0 = np.clip(np.searchsorted(kap, kq) - 2, 0, len(kap) - 4)
        idx = i0[:, None] + np.arange(4)[None, :]
        xs = kap[idx]
        L = np.ones((len(kq), 4))
        for a in range(4):
            for b in range(4):
                if a != b:
                    L[:, a] *= (kq - xs[:, b]) / (xs[:, a] - xs[:, b])
        return idx, L

    def _order0_at(self, u):
        ell = np.arange(-self.J, self.J + 1)
        return np.array([self._project_kernel(float(v) - self.s, ell) for v in np.atleast_1d(u)])

    def _order0(self):
        return self._order0_at(self.times)

    # recursion ----------------------------------------------------------
    def _samples(self, n, u):
        """``A_n`` at arbitrary times by interpolation over the mesh."""
        idx, L = self._interp_weights(u)
        A = self.A[n]
        return np.einsum("qk,qkj->qj", L, A[idx])

    def _drift_values(self, u):
        """Hat-weighted averages ``(1/h) ∫ phi_j b(u, .)`` at each time in ``u``."""
        d = self.drift
        if d.homogeneous:
            return d(u[:, None], self.z[None, :])
        if not d.time_dependent:
            if self._b_static is None:
                self._b_static = self._hat_average(lambda z: d(0.0, z))[None, :]
            return np.broadcast_to(self._b_static, (len(u), self.z.size))
        return np.array([self._hat_average(lambda z, uu=uu: d(uu, z)) for uu in u])

    def _hat_average(self, f):
        h = self.h
        v, w = _HAT_RULE
        vals = f(self.z[:, None] + h * v[None, :]) @ w
        for c in self.drift.singular_points:
            j0 = int(np.floor((c - self.z[0]) / h))
            for j in range(j0 - 1, j0 + 3):
                if 0 <= j < self.z.size:
                    zj = self.z[j]

                    def g(t, zj=zj):
                        return (1.0 - abs(t - zj) / h) * float(f(np.array(t)))

                    pts = sorted({zj, c} & {p for p in (zj, c) if zj - h < p < zj + h})
                    val = 0.0
                    edges = [zj - h] + pts + [zj + h]
                    for a, b in zip(edges[:-1], edges[1:]):
                        if b > a:
                            val += _si.quad(g, a, b, limit=200, epsabs=1e-13, epsrel=1e-10)[0]
                    vals[j] = val / h
        return vals

    def _drift_fft(self, u, A):
        B = self._drift_values(np.asarray(u, dtype=float))
        return rfft(B * A, self.nfft, axis=-1)

    def _next_order(self):
        n = len(self.A)
        prev = n - 1
        K = len(self.times)
        shared_u = np.concatenate(self.panel_nodes) if K > 1 else np.empty(0)
        if prev == 0:
            shared_A = self._order0_at(shared_u)
        else:
            shared_A = self._samples(prev, shared_u)
        g = len(_GL6[0])
        shared_F = self._drift_fft(shared_u, shared_A).reshape(K - 1, g, -1)
        out = np.zeros_like(self.A[0])
        lo = 2 * self.J
        for k in range(1, K):
            tk = self.times[k]
            acc = np.zeros(self.nfft // 2 + 1, dtype=complex)
            for m in range(k - 1):
                for uq, wq, Fq in zip(self.panel_nodes[m], self.panel_weights[m], shared_F[m]):
                    acc += wq * Fq * self._gradient_fft(tk - uq)
            nodes, weights = self.last_rules[k]
            Fl = self._drift_fft(nodes, self._samples(prev, nodes))
            for uq, wq, Fq in zip(nodes, weights, Fl):
                acc += wq * Fq * self._gradient_fft(tk - uq)
            full = irfft(acc, self.nfft)
            out[k] = full[lo: lo + 2 * self.J + 1]
        return out

    def ensure(self, N):
        """Compute orders up to ``N``; raises DivergenceDetected on sustained growth."""
        while len(self.A) <= N:
            if self.drift.family == "Zero":
                self.A.append(np.zeros_like(self.A[0]))
            else:
                self.A.append(self._next_order())
            n = len(self.A) - 1
            self.norms.append(float(np.max(np.abs(self.nodal(n)[-1]))))
            log.debug("order %d sup-norm %.3e", n, self.norms[-1])
            nm = self.norms
            if n >= 4 and nm[n] > nm[n - 1] > nm[n - 2] > nm[n - 3] > 0:
                raise DivergenceDetected(
                    f"term sup-norms grew for three consecutive orders: "
                    f"{nm[n - 3]:.3e} -> {nm[n]:.3e}"
                )
        return self

    # read-out -------------------------------------------------------------
    def nodal(self, n):
        """Point values of ``p_n`` at every mesh time and lattice node."""
        A = self.A[n]
        return A / self.h - _second_diff(A) / (12.0 * self.h)

    def time_index(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the mesh; pass it in extra_times")
        return k

    def values(self, n, t, y):
        """``p_n(s, x, t, y)`` with cubic interpolation between lattice nodes."""
        self.ensure(n)
        k = self.time_index(t)
        row = self.nodal(n)[k]
        return _interp_lattice(row, self.z, y, self.grid.L)

    def projections(self, n, t):
        self.ensure(n)
        return self.A[n][self.time_index(t)]


def _interp_lattice(row, z, y, L):
    y = np.asarray(y, dtype=float)
    h = z[1] - z[0]
    f = (y - z[0]) / h
    if np.any(f < 1) or np.any(f > len(z) - 2):
        raise ValueError(f"query point outside the lattice window (half-width {L})")
    i0 = np.clip(np.floor(f).astype(int) - 1, 0, len(z) - 4)
    t = f - i0
    out = np.zeros(np.shape(y))
    for a in range(4):
        wa = np.ones(np.shape(y))
        for b in range(4):
            if a != b:
                wa = wa * (t - b) / (a - b)
        out = out + wa * row[i0 + a]
    return out


_SOLVERS: OrderedDict = OrderedDict()
_MAX_SOLVERS = 8


def get_solver(params, drift, s, x, t, grid, extra_times=()):
    """Shared solver; spatially homogeneous drifts reuse one solver per elapsed time."""
    extra = tuple(sorted(float(e) for e in extra_times))
    if drift.homogeneous and not drift.time_dependent:
        key = (params, id(drift), 0.0, 0.0, float(t) - float(s), grid,
               tuple(e - float(s) for e in extra))
    else:
        key = (params, id(drift), float(s), float(x), float(t), grid, extra)
    sol = _SOLVERS.get(key)
    if sol is None:
        if drift.homogeneous and not drift.time_dependent:
            sol = SeriesSolver(params, drift, 0.0, 0.0, float(t) - float(s), grid,
                               extra_times=key[-1])
        else:
            sol = SeriesSolver(params, drift, s, x, t, grid, extra_times=extra)
        sol._drift_ref = drift  # keep id() stable while cached
        _SOLVERS[key] = sol
        while len(_SOLVERS) > _MAX_SOLVERS:
            _SOLVERS.popitem(last=False)
    else:
        _SOLVERS.move_to_end(key)
    return sol


def _shifted(sol, s, x, t, y):
    if sol.s == 0.0 and sol.x == 0.0 and (sol.s, sol.x) != (s, x):
        return t - s, np.asarray(y, dtype=float) - x
    return t, y


def series_term(n, s, x, t, y, drift: DriftField, params: KernelParams, grid: GridSpec):
    """``p_n(s, x, t, y)``; order 0 is the base density."""
    if n < 0:
        raise ValueError("order must be non-negative")
    if n == 0:
        return get_table(params).density(t - s, np.asarray(y, dtype=float) - x)
    if drift.family == "Zero":
        return np.zeros(np.shape(y)) if np.ndim(y) else 0.0
    sol = get_solver(params, drift, s, x, t, grid)
    tt, yy = _shifted(sol, s, x, t, y)
    return sol.values(n, tt, yy)


def series_sum(N, s, x, t, y, drift: DriftField, params: KernelParams, grid: GridSpec, tol=None):
    """Terms ``0..N`` at ``(s, x, t, y)`` with convergence diagnostics.

    Stops early once two consecutive terms fall below ``tol`` relative to the
    partial sum (sup-norms over the lattice).  ``tail_ratio`` is the largest
    ratio of consecutive term sup-norms from order 1 on.
    """
    tol = grid.tol if tol is None else tol
    if drift.family == "Zero":
        p = series_term(0, s, x, t, y, drift, params, grid)
        terms = [p] + [0.0 * p] * N
        sums = [p] * (N + 1)
        return SeriesResult(terms, sums, 0.0, True, 0.0, [1.0] + [0.0] * N)
    sol = get_solver(params, drift, s, x, t, grid)
    tt, yy = _shifted(sol, s, x, t, y)
    terms, norms = [], []
    small = 0
    for n in range(N + 1):
        sol.ensure(n)
        # order 0 is known exactly; the lattice only carries it for the recursion
        terms.append(series_term(0, s, x, t, y, drift, params, grid) if n == 0 else sol.values(n, tt, yy))
        norms.append(sol.norms[n])
        total_norm = float(np.max(np.abs(sum(sol.nodal(m)[-1] for m in range(n + 1)))))
        if n >= 1 and norms[-1] < tol * total_norm:
            small += 1
            if small >= 2:
                break
        else:
            small = 0
    sums = list(np.cumsum(np.array(terms, dtype=float), axis=0))
    ratios = [norms[i + 1] / norms[i] for i in range(1, len(norms) - 1) if norms[i] > 0]
    r = max(ratios) if ratios else 0.0
    est = norms[-1] * r / (1.0 - r) if r < 1 else math.inf
    return SeriesResult(terms, sums, r, r < 1, est, norms)


def check_order_ck(n, s, u, t, x, y, drift, params, grid):
    """``|Σ_m ∫ p_m(s,x,u,z) p_{n-m}(u,z,t,y) dz - p_n(s,x,t,y)|``.

    The left factor enters as lattice projections and the right one as point
    values corrected by ``-Δ²/12``, which pairs them to fourth order.
    """
    if not s < u < t:
        raise ValueError("need s < u < t")
    if drift.family == "Zero" and n > 0:
        return 0.0
    left = get_solver(params, drift, s, x, t, grid, extra_times=(u,))
    ul, _ = _shifted(left, s, x, u, 0.0)
    left.ensure(n)
    z = left.z + (x if (left.s, left.x) != (s, x) else 0.0)
    kl = left.time_index(ul)
    total = 0.0
    for m in range(n + 1):
        right = _right_factor(n - m, u, z, t, y, drift, params, grid)
        right = right - _second_diff(right) / 12.0
        total += float(np.dot(left.A[m][kl], right))
    target = float(series_term(n, s, x, t, y, drift, params, grid))
    return abs(total - target)


def _right_factor(k, u, z, t, y, drift, params, grid):
    """``p_k(u, z_j, t, y)`` for every lattice node ``z_j`` (zero outside the window)."""
    if k == 0:
        return get_table(params).density(t - u, y - z)
    if drift.family == "Zero":
        return np.zeros_like(z)
    if drift.homogeneous and not drift.time_dependent:
        sol = get_solver(params, drift, u, 0.0, t, grid)
        row = sol.ensure(k).nodal(k)[sol.time_index(t - u)]
        d = y - z
        inside = np.abs(d) <= grid.L - 2.0 * grid.h
        out = np.zeros_like(z)
        out[inside] = _interp_lattice(row, sol.z, d[inside], grid.L)
        return out
    out = np.zeros_like(z)
    for j, zj in enumerate(z):
        if abs(y - zj) <= grid.L - 2.0 * grid.h:
            out[j] = float(series_term(k, u, float(zj), t, y, drift, params, grid))
    return out


def check_ck(s, u, t, x, y, drift, params, grid, N, kernel=None):
    """``|∫ p̃_N(s,x,u,z) p̃_N(u,z,t,y) dz - p̃_N(s,x,t,y)|``.

    ``kernel(a, xa, b, yb)`` may replace the partial sum by a closed form (for
    example the translated kernel of a constant drift); it must broadcast
    over ``xa`` and ``yb``.
    """
    from .quadrature import integrate_line

    if not s < u < t:
        raise ValueError("need s < u < t")
    tail = True
    if kernel is None:
        tab = get_table(params)
        if drift.family == "Zero" or N == 0:
            def kernel(a, xa, b, yb):
                return tab.density(b - a, np.asarray(yb, float) - np.asarray(xa, float))
        elif drift.homogeneous:
            tail = False

            def kernel(a, xa, b, yb):
                d = np.asarray(yb, float) - np.asarray(xa, float)
                return series_sum(N, 0.0, 0.0, b - a, d, drift, params, grid).partial_sums[-1]
        else:
            tail = False

            def kernel(a, xa, b, yb):
                xa, yb = np.broadcast_arrays(np.asarray(xa, float), np.asarray(yb, float))
                if xa.ndim == 0 or np.all(xa == xa.flat[0]):
                    x0 = float(xa.flat[0])
                    return series_sum(N, a, x0, b, yb, drift, params, grid).partial_sums[-1]
                return np.array([
                    float(series_sum(N, a, float(xi), b, float(yi), drift, params, grid).partial_sums[-1])
                    for xi, yi in zip(xa.ravel(), yb.ravel())
                ]).reshape(xa.shape)
    width_l = (u - s) ** (1.0 / params.alpha)
    width_r = (t - u) ** (1.0 / params.alpha)
    L = grid.L - 2.0 * grid.h if not tail else grid.L
    lo = min(x, y) - L if not tail else -L
    hi = max(x, y) + L if not tail else L
    if not tail:
        # the series window is centred on each start point: keep both factors inside it
        lo, hi = max(x, y) - L, min(x, y) + L
        centre = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)

        def f(z):
            return kernel(s, x, u, z + centre) * kernel(u, z + centre, t, y)

        val = integrate_line(f, half, centers=(x - centre, y - centre),
                             widths=(width_l, width_r), tail=False)
    else:
        def f(z):
            return kernel(s, x, u, z) * kernel(u, z, t, y)

        val = integrate_line(f, L, centers=(x, y), widths=(width_l, width_r), tail=True)
    return abs(val - float(kernel(s, x, t, y)))

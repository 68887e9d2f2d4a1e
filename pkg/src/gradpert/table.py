"""Fast interpolated evaluation of the one-dimensional kernel.

Values are tabulated in the scaled variable ``v = w / width(t)`` on an
``asinh`` grid, as logarithms so that the polynomial tails interpolate
smoothly.  For ``a == 0`` the kernel is self-similar and one row suffices;
for ``a > 0`` rows are laid out in ``log t`` and interpolated bicubically.
Below the tabulated time range the mixed kernel is extrapolated from the
pure alpha-stable one; above it, evaluation falls back to direct quadrature.
"""
from __future__ import annotations

import hashlib
import math
import os
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .kernel import KernelParams, radial_density, radial_tail

_TABLE_VERSION = 2


class KernelTable:
    def __init__(self, params: KernelParams, tau_min=1e-8, tau_max=1e3,
                 v_max=1e7, dxi=0.02, dlogtau=0.2, tol=1e-10, _arrays=None):
        if params.dim != 1:
            raise ValueError("KernelTable is one-dimensional")
        self.params = params
        self.tau_min, self.tau_max = float(tau_min), float(tau_max)
        self._v_max, self._dxi, self._dlogtau = float(v_max), float(dxi), float(dlogtau)
        self.xi = np.arange(0.0, math.asinh(v_max) + dxi, dxi)
        self.v = np.sinh(self.xi)
        self.xi_max = self.xi[-1]
        if params.mixed:
            n = max(4, int(math.ceil(math.log(self.tau_max / self.tau_min) / dlogtau)) + 1)
            self.logtau = np.linspace(math.log(self.tau_min), math.log(self.tau_max), n)
        else:
            self.logtau = np.array([0.0])
        if _arrays is not None:
            self._setup(_arrays)
            return
        taus = np.exp(self.logtau)
        sig = self._width(taus)[:, None]
        T = np.broadcast_to(taus[:, None], (taus.size, self.v.size))
        W = sig * self.v[None, :]
        check = not params.mixed
        p1 = radial_density(params, T, W, dim=1, tol=tol, check=check)
        p3 = radial_density(params, T, W, dim=3, tol=tol, check=check)
        tail = radial_tail(params, T, W, tol=tol, check=check)
        self._setup({
            "p1": np.log(sig * p1),
            "p3": np.log(sig**3 * p3),
            "tail": np.log(tail),
        })

    @classmethod
    def from_arrays(cls, params, arrays):
        meta = arrays["meta"]
        return cls(params, tau_min=meta[0], tau_max=meta[1], v_max=meta[2], dxi=meta[3],
                   dlogtau=meta[4], _arrays={k: arrays[k] for k in ("p1", "p3", "tail")})

    def to_arrays(self):
        meta = np.array([self.tau_min, self.tau_max, self._v_max, self._dxi, self._dlogtau])
        return dict(self._tables, meta=meta)

    def _setup(self, tables):
        params = self.params
        if tables["p1"].shape != (self.logtau.size, self.xi.size):
            raise ValueError("table arrays do not match the grid")
        self._tables = tables
        self._splines = {}
        for k, tab in self._tables.items():
            if params.mixed:
                self._splines[k] = RectBivariateSpline(self.logtau, self.xi, tab, kx=3, ky=3, s=0)
            else:
                bc = "not-a-knot" if k == "tail" else ((1, 0.0), "not-a-knot")
                self._splines[k] = CubicSpline(self.xi, tab[0], bc_type=bc)
        # asymptotic log-log slopes for extrapolation past v_max
        lv = np.log(self.v[-2:])
        self._slopes = {k: (tab[:, -1] - tab[:, -2]) / (lv[1] - lv[0]) for k, tab in self._tables.items()}

    def _width(self, t):
        # smooth blend of the two branch widths; a kink here spoils row interpolation
        p = self.params
        t = np.asarray(t, dtype=float)
        if not p.mixed:
            return t ** (1.0 / p.alpha)
        return np.hypot(t ** (1.0 / p.alpha), (p.a**p.beta * t) ** (1.0 / p.beta))

    def _lookup(self, kind, t, w):
        t = np.asarray(t, dtype=float)
        w = np.abs(np.asarray(w, dtype=float))
        t, w = np.broadcast_arrays(t, w)
        shape = t.shape
        t = t.ravel()
        w = w.ravel()
        out = np.zeros(t.shape)
        pos = t > 0
        if self.params.mixed:
            inside = pos & (t >= self.tau_min * (1 - 1e-12)) & (t <= self.tau_max * (1 + 1e-12))
        else:
            inside = pos
        small = pos & ~inside & (t < self.tau_min) if self.params.mixed else np.zeros_like(pos)
        outside = pos & ~inside & ~small
        if np.any(outside):
            out[outside] = self._direct(kind, t[outside], w[outside])
        if np.any(small):
            out[small] = self._small_time(kind, t[small], w[small])
        idx = np.nonzero(inside)[0]
        if idx.size:
            tt, ww = t[idx], w[idx]
            sig = self._width(tt)
            v = ww / sig
            xi = np.arcsinh(v)
            big = xi > self.xi_max
            xi_c = np.minimum(xi, self.xi_max)
            spl = self._splines[kind]
            if self.params.mixed:
                lt = np.clip(np.log(tt), self.logtau[0], self.logtau[-1])
                val = spl.ev(lt, xi_c)
                if np.any(big):
                    slope = np.interp(lt[big], self.logtau, self._slopes[kind])
                    val[big] += slope * (np.log(v[big]) - np.log(self.v[-1]))
            else:
                val = spl(xi_c)
                if np.any(big):
                    val[big] += self._slopes[kind][0] * (np.log(v[big]) - np.log(self.v[-1]))
            val = np.exp(val)
            if kind == "p1":
                val = val / sig
            elif kind == "p3":
                val = val / sig**3
            out[idx] = val
        return out.reshape(shape)

    def _small_time(self, kind, t, w):
        # Below tau_min the beta part is a perturbation of the alpha-stable
        # kernel: p / p_alpha - 1 scales like t**((alpha - beta) / alpha) at a
        # fixed alpha-scaled position, which is exact for the power tails.
        p = self.params
        pure = get_table(KernelParams(p.alpha, dim=1))
        r = self.tau_min / t
        w0 = w * r ** (1.0 / p.alpha)
        t0 = np.full_like(t, self.tau_min)
        ratio = self._lookup(kind, t0, w0) / pure._lookup(kind, t0, w0)
        ratio = 1.0 + (ratio - 1.0) * r ** -((p.alpha - p.beta) / p.alpha)
        return pure._lookup(kind, t, w) * ratio

    def _direct(self, kind, t, w):
        if kind == "tail":
            return radial_tail(self.params, t, w)
        return radial_density(self.params, t, w, dim=1 if kind == "p1" else 3)

    def density(self, t, w):
        return self._lookup("p1", t, w)

    def density3(self, t, r):
        return self._lookup("p3", t, r)

    def gradient(self, t, w):
        """d/dw of the density at displacement ``w``."""
        w = np.asarray(w, dtype=float)
        return -2.0 * math.pi * w * self._lookup("p3", t, w)

    def tail(self, t, w):
        return self._lookup("tail", t, w)

    def cdf(self, t, w):
        """Distribution function; a unit step at 0 for ``t <= 0``."""
        t = np.asarray(t, dtype=float)
        w = np.asarray(w, dtype=float)
        T = self._lookup("tail", t, w)
        c = np.where(w >= 0, 1.0 - T, T)
        step = np.where(w > 0, 1.0, np.where(w < 0, 0.0, 0.5))
        return np.where(t > 0, c, step)


_TABLES: dict = {}


def _cache_dir():
    d = os.environ.get("KP_CACHE_DIR")
    if d == "":
        return None
    return Path(d) if d else Path.home() / ".cache" / "gradpert"


class ScaledTable:
    """View of a unit-weight table at weight ``a`` through ``p^a(t,w) = lam p^1(lam^alpha t, lam w)``."""

    def __init__(self, base: KernelTable, params: KernelParams):
        self.base = base
        self.params = params
        self.lam = params.a ** (params.beta / (params.alpha - params.beta))
        self._tf = self.lam**params.alpha

    def _args(self, t, w):
        return np.asarray(t, dtype=float) * self._tf, np.asarray(w, dtype=float) * self.lam

    def density(self, t, w):
        return self.lam * self.base.density(*self._args(t, w))

    def density3(self, t, r):
        return self.lam**3 * self.base.density3(*self._args(t, r))

    def gradient(self, t, w):
        return self.lam**2 * self.base.gradient(*self._args(t, w))

    def tail(self, t, w):
        return self.base.tail(*self._args(t, w))

    def cdf(self, t, w):
        return self.base.cdf(*self._args(t, w))


def get_table(params: KernelParams):
    """Process-wide shared table for ``params`` (dimension forced to 1).

    Mixed parameters are served from the ``a = 1`` table through the scaling
    identity, so one table per ``(alpha, beta)`` pair is ever built.

    Mixed-parameter tables take tens of seconds to build, so their arrays are
    also stored under ``$KP_CACHE_DIR`` (default ``~/.cache/gradpert``; set it
    to the empty string to disable).  The cache key covers every parameter
    that changes the tabulated values.
    """
    p = params.with_dim(1)
    if p.mixed and p.a != 1.0:
        return ScaledTable(get_table(p.with_a(1.0)), p)
    key = (p.alpha, p.beta, p.a)
    tab = _TABLES.get(key)
    if tab is not None:
        return tab
    cdir = _cache_dir() if p.mixed else None
    path = None
    if cdir is not None:
        tag = hashlib.sha1(repr((key, _TABLE_VERSION)).encode()).hexdigest()[:16]
        path = cdir / f"table-{tag}.npz"
        if path.exists():
            try:
                tab = KernelTable.from_arrays(p, dict(np.load(path)))
            except Exception:  # corrupt or stale cache entry: rebuild
                tab = None
    if tab is None:
        tab = KernelTable(p)
        if path is not None:
            try:
                cdir.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp.npz")
                np.savez(tmp, **tab.to_arrays())
                os.replace(tmp, path)
            except OSError:
                pass
    _TABLES[key] = tab
    return tab

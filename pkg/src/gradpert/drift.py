"""Drift fields ``b(u, z)`` in one space dimension."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .kernel import KernelParams

__all__ = ["DriftField"]

_FAMILIES = ("Zero", "Constant", "PowerLaw", "KernelPower", "Tabulated")


@dataclass(frozen=True, eq=False)
class DriftField:
    """A scalar drift on the line.

    Use the constructors (``zero``, ``constant``, ``power_law``,
    ``kernel_power``, ``tabulated``) rather than the raw fields.  ``scale``
    multiplies every value, which is how the homogeneity checks build ``c*b``.
    """

    family: str
    c: float = 0.0
    epsilon: float | None = None
    params: KernelParams | None = None
    direction: str = "inward"
    z_grid: np.ndarray | None = None
    u_grid: np.ndarray | None = None
    values: np.ndarray | None = None
    scale: float = 1.0
    dim: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown drift family {self.family!r}; expected one of {_FAMILIES}")
        if self.dim != 1:
            raise ValueError("drift fields are one-dimensional")
        if self.direction not in ("inward", "outward"):
            raise ValueError("direction must be 'inward' or 'outward'")
        if self.family == "PowerLaw":
            if self.params is None or self.epsilon is None:
                raise ValueError("PowerLaw needs params and epsilon")
            p = self.params
            upper = p.alpha - p.beta if p.mixed else p.alpha
            if not 0.0 < self.epsilon < upper:
                raise ValueError(f"epsilon must lie in (0, {upper:g}), got {self.epsilon}")
        if self.family == "KernelPower" and self.params is None:
            raise ValueError("KernelPower needs params")
        if self.family == "Tabulated":
            if self.z_grid is None or self.values is None:
                raise ValueError("Tabulated needs z_grid and values")

    # constructors -----------------------------------------------------
    @classmethod
    def zero(cls):
        return cls("Zero")

    @classmethod
    def constant(cls, c):
        return cls("Constant", c=float(c))

    @classmethod
    def power_law(cls, epsilon, params: KernelParams, direction="inward"):
        return cls("PowerLaw", epsilon=float(epsilon), params=params, direction=direction)

    @classmethod
    def kernel_power(cls, params: KernelParams, direction="inward"):
        return cls("KernelPower", params=params, direction=direction)

    @classmethod
    def tabulated(cls, z_grid, values, u_grid=None):
        z = np.asarray(z_grid, dtype=float)
        v = np.asarray(values, dtype=float)
        u = None if u_grid is None else np.asarray(u_grid, dtype=float)
        expect = z.shape if u is None else (u.size, z.size)
        if v.shape != expect:
            raise ValueError(f"values must have shape {expect}, got {v.shape}")
        return cls("Tabulated", z_grid=z, u_grid=u, values=v)

    def scaled(self, factor):
        kw = {k: getattr(self, k) for k in ("family", "c", "epsilon", "params", "direction",
                                               "z_grid", "u_grid", "values")}
        return DriftField(scale=self.scale * float(factor), **kw)

    # properties -------------------------------------------------------
    @property
    def homogeneous(self) -> bool:
        """True when ``b`` depends on neither time nor space."""
        return self.family in ("Zero", "Constant")

    @property
    def time_dependent(self) -> bool:
        return self.family == "KernelPower" or (self.family == "Tabulated" and self.u_grid is not None)

    @property
    def singular_points(self) -> tuple:
        """Spatial points where ``b`` is unbounded or non-smooth."""
        if self.family in ("PowerLaw", "KernelPower"):
            return (0.0,)
        return ()

    @property
    def singular_order(self) -> float:
        """``k`` with ``|b(z)| ~ |z - c|**-k`` at the singular points (0 if bounded there)."""
        if self.family == "PowerLaw":
            return max(0.0, self.params.alpha - 1.0 - self.epsilon)
        return 0.0

    @property
    def even_magnitude(self) -> bool:
        """True when ``|b(u, -z)| == |b(u, z)|``."""
        return self.family in ("Zero", "Constant", "PowerLaw", "KernelPower")

    @cached_property
    def _interp(self):
        if self.u_grid is None:
            return None
        return RegularGridInterpolator((self.u_grid, self.z_grid), self.values,
                                       bounds_error=False, fill_value=0.0)

    def _table(self):
        t = self._cache.get("table")
        if t is None:
            from .table import get_table

            t = get_table(self.params)
            self._cache["table"] = t
        return t

    # evaluation -------------------------------------------------------
    def magnitude(self, u, z):
        """``|b(u, z)|`` broadcast over ``u`` and ``z``."""
        return np.abs(self(u, z))

    def __call__(self, u, z):
        u = np.asarray(u, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = np.broadcast(u, z).shape
        sign = -1.0 if self.direction == "inward" else 1.0
        fam = self.family
        if fam == "Zero":
            out = np.zeros(shape)
        elif fam == "Constant":
            out = np.full(shape, self.c)
        elif fam == "PowerLaw":
            expo = 1.0 - self.params.alpha + self.epsilon
            zz = np.broadcast_to(z, shape)
            a = np.abs(zz)
            with np.errstate(divide="ignore", invalid="ignore"):
                mag = np.where(a > 0, a**expo, 0.0)
            out = sign * np.sign(zz) * mag
        elif fam == "KernelPower":
            uu, zz = np.broadcast_arrays(u, z)
            expo = (self.params.alpha - 1.0) / self.dim
            with np.errstate(divide="ignore"):
                mag = np.where(uu > 0, self._table().density(np.where(uu > 0, uu, 1.0), zz) ** expo, np.inf)
            out = sign * np.sign(zz) * mag
            out = np.where(zz == 0, 0.0, out)
        else:
            if self.u_grid is None:
                out = np.broadcast_to(np.interp(z, self.z_grid, self.values, left=0.0, right=0.0), shape)
            else:
                uu, zz = np.broadcast_arrays(u, z)
                out = self._interp(np.stack([uu.ravel(), zz.ravel()], axis=-1)).reshape(shape)
        return self.scale * np.asarray(out, dtype=float)

    def describe(self) -> dict:
        d = {"family": self.family, "scale": self.scale}
        if self.family == "Constant":
            d["c"] = self.c
        if self.family == "PowerLaw":
            d["epsilon"] = self.epsilon
            d["direction"] = self.direction
        if self.family == "KernelPower":
            d["direction"] = self.direction
        return d

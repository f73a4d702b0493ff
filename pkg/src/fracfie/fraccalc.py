"""Weighted fractional integrals and derivatives with respect to a warp function.

For a warp ``U`` (strictly increasing) and a non-vanishing weight ``w`` the
operator of order ``delta > 0`` is

    J(h)(z) = 1/(w(z) Gamma(delta)) * int_a^z (U(z) - U(eta))**(delta - 1)
              * w(eta) h(eta) U'(eta) d eta.

Substituting ``u = U(eta)`` turns this into an Abel-type integral in ``u``.
The smooth factor ``w*h`` is interpolated piecewise linearly on the image
nodes ``U(xi_j)`` and the kernel ``(U(z) - u)**(delta - 1)`` is integrated
exactly against each hat function (product trapezoidal rule).
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .special import DomainError, gamma

__all__ = [
    "WarpFunction",
    "WeightFunction",
    "KernelSpec",
    "GridFunction",
    "product_weights",
    "weighted_fractional_integral",
    "iterated_weighted_integral",
    "weighted_derivative_1",
    "weighted_fractional_derivative",
]

RealFn = Callable[[np.ndarray], np.ndarray]


def _eval(fn: RealFn, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape).copy()


@dataclass(frozen=True, eq=False)
class WarpFunction:
    """Strictly increasing change of variable ``u`` with derivative ``du``."""

    u: RealFn
    du: RealFn

    @classmethod
    def identity(cls) -> WarpFunction:
        return cls(u=lambda x: np.asarray(x, dtype=float), du=lambda x: np.ones_like(x, dtype=float))

    def check(self, x: np.ndarray) -> None:
        # isolated zeros of du are allowed (U = x**2 at 0); sign changes are not
        d = _eval(self.du, x)
        if not np.all(np.isfinite(d)) or np.any(d < 0.0):
            bad = int(np.argmax(~np.isfinite(d) | (d < 0.0)))
            raise ValueError(f"warp is not increasing: du({float(x[bad])!r}) = {float(d[bad])!r}")
        u = _eval(self.u, x)
        if np.any(np.diff(u) <= 0.0):
            bad = int(np.argmax(np.diff(u) <= 0.0))
            raise ValueError(f"warp is not strictly increasing between nodes {bad} and {bad + 1}")


@dataclass(frozen=True, eq=False)
class WeightFunction:
    w: RealFn

    @classmethod
    def one(cls) -> WeightFunction:
        return cls(w=lambda x: np.ones_like(x, dtype=float))

    def values(self, x: np.ndarray) -> np.ndarray:
        v = _eval(self.w, x)
        if not np.all(np.isfinite(v)):
            raise ValueError("weight is not finite on the grid")
        if np.any(v == 0.0):
            bad = int(np.argmax(v == 0.0))
            raise ValueError(f"weight vanishes at grid node {bad} (xi = {x[bad]!r})")
        return v


@dataclass(frozen=True, eq=False)
class KernelSpec:
    delta: float
    warp: WarpFunction = field(default_factory=WarpFunction.identity)
    weight: WeightFunction = field(default_factory=WeightFunction.one)
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        if not np.isfinite(self.delta) or self.delta <= 0.0:
            raise DomainError(f"order delta must be > 0, got {self.delta!r}")
        a, b = self.interval
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got {self.interval!r}")

    def with_delta(self, delta: float) -> KernelSpec:
        return KernelSpec(delta=delta, warp=self.warp, weight=self.weight, interval=self.interval)


@dataclass(frozen=True)
class GridFunction:
    """Real function sampled at ``n`` uniform nodes of ``[a, b]``."""

    interval: tuple[float, float]
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a grid function needs at least 2 nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))

    @classmethod
    def from_callable(cls, fn: RealFn, n: int, interval: tuple[float, float] = (0.0, 1.0)) -> GridFunction:
        x = np.linspace(interval[0], interval[1], n)
        return cls(interval, _eval(fn, x))

    @classmethod
    def constant(cls, c: float, n: int, interval: tuple[float, float] = (0.0, 1.0)) -> GridFunction:
        return cls(interval, np.full(n, float(c)))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.interval[0], self.interval[1], self.n)

    @property
    def spacing(self) -> float:
        return (self.interval[1] - self.interval[0]) / (self.n - 1)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def same_grid(self, other: GridFunction) -> bool:
        return self.interval == other.interval and self.n == other.n

    def with_values(self, values: np.ndarray) -> GridFunction:
        return GridFunction(self.interval, values)

    def __add__(self, other: GridFunction) -> GridFunction:
        return self.with_values(self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float) -> GridFunction:
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__


_WEIGHT_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()
_ROW_BLOCK = 256


def _abel_weights(u: np.ndarray, delta: float) -> np.ndarray:
    """Matrix ``W`` with ``int_{u_0}^{u_i} (u_i - s)**(delta-1) g(s) ds ~ W[i] @ g``."""
    n = u.size
    W = np.zeros((n, n))
    h = np.diff(u)
    for start in range(1, n, _ROW_BLOCK):
        rows = np.arange(start, min(start + _ROW_BLOCK, n))
        D = u[rows, None] - u[None, :]
        # segment j spans [u_j, u_{j+1}]; only j < i contributes
        A = np.clip(D[:, :-1], 0.0, None)
        B = np.clip(D[:, 1:], 0.0, None)
        Ad, Bd = A**delta, B**delta
        i0 = (Ad - Bd) / delta
        # int_B^A s**(delta-1) (A - s) ds
        i1 = A * i0 - (A * Ad - B * Bd) / (delta + 1.0)
        right = i1 / h
        left = i0 - right
        block = np.zeros((rows.size, n))
        block[:, :-1] += left
        block[:, 1:] += right
        W[rows] = block
    return W


def product_weights(spec: KernelSpec, n: int) -> np.ndarray:
    """Quadrature matrix ``M`` so that ``J(h) = M @ h`` on an ``n``-node grid.

    Includes the ``w`` factors and ``1/Gamma(delta)``; cached per spec.
    """
    per_spec = _WEIGHT_CACHE.setdefault(spec, {})
    M = per_spec.get(n)
    if M is None:
        x = np.linspace(spec.interval[0], spec.interval[1], n)
        spec.warp.check(x)
        u = _eval(spec.warp.u, x)
        w = spec.weight.values(x)
        M = _abel_weights(u, spec.delta) * (w[None, :] / w[:, None]) / gamma(spec.delta)
        M.setflags(write=False)
        per_spec[n] = M
    return M


def _check_grid(h: GridFunction, spec: KernelSpec) -> None:
    if h.interval != (float(spec.interval[0]), float(spec.interval[1])):
        raise ValueError(f"grid function lives on {h.interval}, kernel on {spec.interval}")


def weighted_fractional_integral(h: GridFunction, spec: KernelSpec) -> GridFunction:
    """Weighted fractional integral of order ``spec.delta`` at every node."""
    _check_grid(h, spec)
    M = product_weights(spec, h.n)
    return h.with_values(M @ h.values)


def iterated_weighted_integral(h: GridFunction, spec: KernelSpec, n: int) -> GridFunction:
    """``n``-fold nested weighted integral, each level a cumulative trapezoid.

    Independent of :func:`product_weights`; uses ``U'`` directly rather than
    the image nodes.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"nesting depth must be 1, 2 or 3, got {n!r}")
    _check_grid(h, spec)
    x = h.nodes
    spec.warp.check(x)
    du = _eval(spec.warp.du, x)
    w = spec.weight.values(x)
    inner = w * h.values
    for _ in range(n):
        inner = cumulative_trapezoid(inner * du, x, initial=0.0)
    return h.with_values(inner / w)


def weighted_derivative_1(h: GridFunction, spec: KernelSpec) -> GridFunction:
    """``(1/w) d/dz (w h) / U'`` by second-order finite differences."""
    _check_grid(h, spec)
    if h.n < 3:
        raise ValueError("weighted derivative needs at least 3 nodes")
    x = h.nodes
    spec.warp.check(x)
    w = spec.weight.values(x)
    du = _eval(spec.warp.du, x)
    d = np.gradient(w * h.values, x, edge_order=2)
    return h.with_values(d / (du * w))


def weighted_fractional_derivative(h: GridFunction, spec: KernelSpec) -> GridFunction:
    """Order ``0 < delta < 1``: first weighted derivative of ``J`` at order ``1 - delta``."""
    if not 0.0 < spec.delta < 1.0:
        raise DomainError(f"fractional derivative supports 0 < delta < 1, got {spec.delta!r}")
    return weighted_derivative_1(weighted_fractional_integral(h, spec.with_delta(1.0 - spec.delta)), spec)

"""Gamma function for positive real arguments.

Lanczos approximation (g = 7, nine terms), with the reflection formula used
below 1/2 where the series loses accuracy.  Relative error is around 1e-15
on [0.1, 20].
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["gamma", "DomainError"]


class DomainError(ValueError):
    """Argument outside the supported domain."""


_G = 7.0
_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _lanczos(x):
    # valid for x >= 0.5
    z = x - 1.0
    acc = _COEF[0]
    for k in range(1, len(_COEF)):
        acc = acc + _COEF[k] / (z + k)
    t = z + _G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * np.exp(-t) * acc


def _gamma_array(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    hi = x >= 0.5
    out[hi] = _lanczos(x[hi])
    lo = ~hi
    if lo.any():
        xl = x[lo]
        out[lo] = math.pi / (np.sin(math.pi * xl) * _lanczos(1.0 - xl))
    return out


def gamma(x):
    """Euler's Gamma function for ``x > 0``.

    Accepts a float or an array; returns the same kind.  Raises
    :class:`DomainError` for non-positive or non-finite input.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"gamma requires finite arguments, got {x!r}")
    if np.any(arr <= 0.0):
        raise DomainError(f"gamma is only defined here for x > 0, got {x!r}")
    if arr.ndim == 0:
        return float(_gamma_array(arr.reshape(1))[0])
    return _gamma_array(arr)

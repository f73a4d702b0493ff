"""Measure-of-noncompactness diagnostics on finite families of grid functions.

On ``C[0, 1]`` the modulus of continuity of a family, in the limit of
vanishing step, is a measure of noncompactness; half of it is the Hausdorff
measure.  Everything here works on finite, sampled stand-ins for bounded
sets, so the limit is replaced by an extrapolation over a few step sizes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .fraccalc import GridFunction

__all__ = [
    "FunctionFamily",
    "AlphaFunction",
    "SigmaFunction",
    "ModulusProfile",
    "DegenerateThetaError",
    "modulus_of_continuity",
    "family_modulus",
    "gamma0_estimate",
    "hausdorff_mnc",
    "check_generalized_darbo",
    "darbo_iteration_diagnostic",
    "verify_mnc_axioms",
    "DEFAULT_SLACK",
    "is_nonincreasing",
    "random_ball_family",
]

DEFAULT_SLACK = 1e-9


class DegenerateThetaError(ValueError):
    """No pair of grid nodes lies within the requested distance."""


class FunctionFamily(Sequence[GridFunction]):
    """Non-empty finite list of grid functions sharing one grid."""

    def __init__(self, members: Iterable[GridFunction]):
        members = list(members)
        if not members:
            raise ValueError("a function family must have at least one member")
        first = members[0]
        for k, m in enumerate(members[1:], start=1):
            if not first.same_grid(m):
                raise ValueError(f"member {k} is on a different grid than member 0")
        self._members = tuple(members)

    def __getitem__(self, k):
        return self._members[k]

    def __len__(self) -> int:
        return len(self._members)

    def __repr__(self) -> str:
        g = self._members[0]
        return f"FunctionFamily(size={len(self)}, n={g.n}, interval={g.interval})"

    @property
    def spacing(self) -> float:
        return self._members[0].spacing

    def union(self, other: FunctionFamily) -> FunctionFamily:
        return FunctionFamily(self._members + tuple(other))

    def sup_norm(self) -> float:
        return max(m.sup_norm() for m in self._members)

    def as_array(self) -> np.ndarray:
        return np.stack([m.values for m in self._members])


class AlphaFunction:
    """Member of the class of maps ``alpha: [0, inf) -> [1, inf)``."""

    def __init__(self, fn: Callable[[float], float]):
        self.fn = fn

    @classmethod
    def constant(cls, c: float = 1.0) -> AlphaFunction:
        return cls(lambda x: c)

    def __call__(self, x: float) -> float:
        v = float(self.fn(x))
        if not v >= 1.0:
            raise ValueError(f"alpha({x!r}) = {v!r} violates alpha >= 1")
        return v


class SigmaFunction:
    """Member of the class of maps ``sigma: [0, inf) -> [0, 1)``."""

    def __init__(self, fn: Callable[[float], float]):
        self.fn = fn

    @classmethod
    def constant(cls, c: float) -> SigmaFunction:
        return cls(lambda x: c)

    def __call__(self, x: float) -> float:
        v = float(self.fn(x))
        if not 0.0 <= v < 1.0:
            raise ValueError(f"sigma({x!r}) = {v!r} is outside [0, 1)")
        return v


@dataclass(frozen=True)
class ModulusProfile:
    thetas: tuple[float, ...]
    values: tuple[float, ...]
    extrapolated_gamma0: float

    def to_dict(self) -> dict:
        return asdict(self)


def _max_lag(spacing: float, theta: float) -> int:
    if not np.isfinite(theta) or theta <= 0.0:
        raise DegenerateThetaError(f"theta must be positive, got {theta!r}")
    # tolerate theta that is an exact multiple of the spacing up to rounding
    lag = int(np.floor(theta / spacing * (1.0 + 1e-12) + 1e-9))
    if lag < 1:
        raise DegenerateThetaError(f"theta = {theta!r} is below the grid spacing {spacing!r}")
    return lag


def _modulus_rows(values: np.ndarray, lag: int) -> np.ndarray:
    """Modulus of continuity of each row of ``values`` over node lags 1..lag."""
    n = values.shape[-1]
    lag = min(lag, n - 1)
    best = np.zeros(values.shape[:-1])
    for k in range(1, lag + 1):
        d = np.abs(values[..., k:] - values[..., :-k]).max(axis=-1)
        np.maximum(best, d, out=best)
    return best


def modulus_of_continuity(f: GridFunction, theta: float) -> float:
    """Largest ``|f(b1) - f(b2)|`` over grid nodes with ``|b1 - b2| <= theta``."""
    lag = _max_lag(f.spacing, theta)
    return float(_modulus_rows(f.values, lag))


def family_modulus(J: FunctionFamily, theta: float) -> float:
    lag = _max_lag(J.spacing, theta)
    return float(_modulus_rows(J.as_array(), lag).max())


def gamma0_estimate(J: FunctionFamily, thetas: Sequence[float]) -> ModulusProfile:
    """Tabulate the family modulus and extrapolate it linearly to ``theta = 0``.

    The extrapolation uses the two smallest step sizes and is clamped to
    ``[0, min(values)]``.  With a single step size the value itself is
    returned as the (upper) estimate.
    """
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ValueError("need at least one theta")
    if any(b >= a for a, b in zip(thetas, thetas[1:])):
        raise ValueError(f"thetas must be strictly decreasing, got {thetas!r}")
    arr = J.as_array()
    values = [float(_modulus_rows(arr, _max_lag(J.spacing, t)).max()) for t in thetas]
    if len(values) == 1:
        g0 = values[0]
    else:
        (t1, v1), (t2, v2) = (thetas[-2], values[-2]), (thetas[-1], values[-1])
        g0 = v2 - t2 * (v1 - v2) / (t1 - t2)
        g0 = min(max(g0, 0.0), min(values))
    return ModulusProfile(tuple(thetas), tuple(values), float(g0))


def hausdorff_mnc(J: FunctionFamily, thetas: Sequence[float]) -> float:
    return 0.5 * gamma0_estimate(J, thetas).extrapolated_gamma0


def check_generalized_darbo(
    psi_PG: float,
    psi_G: float,
    alpha: Callable[[float], float],
    sigma: Callable[[float], float],
    l: float,
    slack: float = 0.0,
) -> bool:
    """Evaluate ``(psi_PG + l)**alpha(psi_PG) <= sigma(psi_G)*psi_G + l``.

    The exponent is taken at ``psi_PG``.  ``alpha`` and ``sigma`` are wrapped
    so that class violations at the evaluated points raise.
    """
    if not np.isfinite(l) or l <= 1.0:
        raise ValueError(f"l must be > 1, got {l!r}")
    for name, v in (("psi_PG", psi_PG), ("psi_G", psi_G)):
        if not np.isfinite(v) or v < 0.0:
            raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")
    alpha = alpha if isinstance(alpha, AlphaFunction) else AlphaFunction(alpha)
    sigma = sigma if isinstance(sigma, SigmaFunction) else SigmaFunction(sigma)
    lhs = (psi_PG + l) ** alpha(psi_PG)
    rhs = sigma(psi_G) * psi_G + l
    return bool(lhs <= rhs + slack)


def _hull_samples(members: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    if count <= 0 or members.shape[0] < 2:
        return members[:0]
    lam = rng.dirichlet(np.ones(members.shape[0]), size=count)
    # same operation order at every node, so combinations of constants stay constant
    out = np.zeros((count, members.shape[1]))
    for k in range(members.shape[0]):
        out += lam[:, k, None] * members[k]
    return out


def darbo_iteration_diagnostic(
    op: Callable[[GridFunction], GridFunction],
    seed: FunctionFamily,
    q_max: int,
    theta: float,
    hull_samples: int = 16,
    rng_seed: int = 0,
) -> list[float]:
    """Family modulus along ``L_1 = Conv(seed)``, ``L_{q+1} = Conv(op(L_q))``.

    ``Conv`` is approximated by appending ``hull_samples`` random convex
    combinations of the current generators; every member (generators and
    samples) is pushed through ``op`` to form the next generation.  Returns
    the modulus at ``theta`` for ``q = 1..q_max``.
    """
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    if hull_samples < 0:
        raise ValueError("hull_samples must be >= 0")
    rng = np.random.default_rng(rng_seed)
    template = seed[0]
    lag = _max_lag(template.spacing, theta)
    gens = seed.as_array()
    out = []
    for q in range(1, q_max + 1):
        L = np.vstack([gens, _hull_samples(gens, hull_samples, rng)])
        out.append(float(_modulus_rows(L, lag).max()))
        if q == q_max:
            break
        gens = np.stack([op(template.with_values(row)).values for row in L])
    return out


def random_ball_family(
    size: int,
    radius: float,
    n: int,
    rng: np.random.Generator,
    kind: str = "rough",
    interval: tuple[float, float] = (0.0, 1.0),
    modes: int = 8,
) -> FunctionFamily:
    """``size`` random members of the sup-norm ball of ``radius``.

    ``rough`` draws every node independently (modulus close to ``2*radius``
    at any step, a stand-in for the non-compact ball); ``smooth`` draws
    trigonometric polynomials; ``constant`` draws constants.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    x = np.linspace(interval[0], interval[1], n)
    t = (x - interval[0]) / (interval[1] - interval[0])
    members = []
    for _ in range(size):
        if kind == "rough":
            v = rng.uniform(-radius, radius, size=n)
        elif kind == "smooth":
            k = np.arange(1, modes + 1)
            amp = rng.normal(size=modes) / k
            phase = rng.uniform(0.0, 2.0 * np.pi, size=modes)
            v = rng.normal() + (amp[:, None] * np.sin(np.pi * k[:, None] * t[None, :] + phase[:, None])).sum(axis=0)
            v *= radius * rng.uniform(0.5, 1.0) / max(np.abs(v).max(), 1e-300)
        elif kind == "constant":
            v = np.full(n, rng.uniform(-radius, radius))
        else:
            raise ValueError(f"unknown family kind {kind!r}")
        members.append(GridFunction(interval, v))
    return FunctionFamily(members)


def is_nonincreasing(seq: Sequence[float], slack: float = DEFAULT_SLACK) -> bool:
    return all(b <= a + slack for a, b in zip(seq, seq[1:]))


@dataclass
class AxiomCheck:
    axiom: str
    passed: bool
    decidable: bool
    detail: str
    witness: dict | None = None


def verify_mnc_axioms(
    J: FunctionFamily,
    J_sup: FunctionFamily,
    theta: float,
    lambdas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    hull_samples: int = 16,
    slack: float = DEFAULT_SLACK,
    rng_seed: int = 0,
) -> list[AxiomCheck]:
    """Check the finitely decidable proxies of the MNC axioms with ``family_modulus``.

    (iii) monotonicity on ``J`` within ``J_sup``; (v) convex combinations do
    not raise the measure; (vi) the convexity inequality for
    ``lam*J + (1-lam)*J_sup`` (Minkowski combination of all member pairs).
    (i), (ii), (iv) and (vii) concern closures, compactness and infinite
    sequences and are reported as not decidable on finite samples.
    """
    sup_ids = {id(m) for m in J_sup}
    sup_rows = {m.values.tobytes() for m in J_sup}
    if not all(id(m) in sup_ids or m.values.tobytes() in sup_rows for m in J):
        raise ValueError("J must be a sub-family of J_sup")
    rng = np.random.default_rng(rng_seed)
    lag = _max_lag(J.spacing, theta)
    a, b = J.as_array(), J_sup.as_array()
    gJ = float(_modulus_rows(a, lag).max())
    gS = float(_modulus_rows(b, lag).max())
    report = [
        AxiomCheck("i", True, False, "zero measure implies relative compactness: not decidable on finite samples"),
        AxiomCheck("ii", True, False, "kernel characterisation: not decidable on finite samples"),
        AxiomCheck(
            "iii",
            gJ <= gS + slack,
            True,
            "gamma(J) <= gamma(J_sup)",
            {"gamma_J": gJ, "gamma_J_sup": gS},
        ),
        AxiomCheck("iv", True, False, "closure invariance: grid families are already closed"),
    ]
    hull = np.vstack([b, _hull_samples(b, hull_samples, rng)])
    gH = float(_modulus_rows(hull, lag).max())
    report.append(
        AxiomCheck("v", gH <= gS + slack, True, "gamma(J_sup + convex samples) <= gamma(J_sup)",
                   {"gamma_hull": gH, "gamma_J_sup": gS})
    )
    worst = None
    ok = True
    for lam in lambdas:
        combo = lam * a[:, None, :] + (1.0 - lam) * b[None, :, :]
        g = float(_modulus_rows(combo.reshape(-1, a.shape[1]), lag).max())
        bound = lam * gJ + (1.0 - lam) * gS
        if g > bound + slack:
            ok = False
        gap = g - bound
        if worst is None or gap > worst["gap"]:
            worst = {"lambda": float(lam), "gamma_combo": g, "bound": bound, "gap": gap}
    report.append(AxiomCheck("vi", ok, True, "gamma(lam J + (1-lam) J_sup) <= lam gamma(J) + (1-lam) gamma(J_sup)", worst))
    report.append(AxiomCheck("vii", True, False, "nested-intersection axiom: needs infinite sequences"))
    return report

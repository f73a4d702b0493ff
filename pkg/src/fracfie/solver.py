"""Fixed-point operator of the fractional integral equation and its hypotheses.

The equation on ``I = [0, 1]`` is

    y(xi) = P(xi, y(xi))
            + 1/(w(xi) Gamma(delta)) * int_0^xi (U(xi) - U(eta))**(delta - 1)
              * U'(eta) w(eta) S(xi, y(eta)) d eta

and ``H`` denotes its right-hand side.  Solutions are computed by Picard
iteration ``y <- H y``; the sufficient conditions for existence (Lipschitz
``P``, growth envelope ``S1`` for ``S``, bounds on ``w`` and the radius
condition on ``e0``) are evaluated numerically.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .fraccalc import GridFunction, KernelSpec, _eval, product_weights
from .mnc import FunctionFamily, family_modulus, modulus_of_continuity
from .special import gamma

__all__ = [
    "FieProblem",
    "SolveResult",
    "HypothesisReport",
    "ContractionEstimate",
    "DivergenceError",
    "MissingEnvelopeError",
    "apply_H",
    "picard_solve",
    "residual",
    "estimate_lipschitz_P",
    "compute_P_hat",
    "bound_weight",
    "assumption_V_terms",
    "check_assumption_V",
    "feasible_e0_interval",
    "hypothesis_report",
    "contraction_estimate",
    "s_increment_modulus",
]

log = logging.getLogger(__name__)

Mode = Literal["definition", "paper-as-stated"]
MODES = ("definition", "paper-as-stated")
V_TOL = 1e-12


class DivergenceError(RuntimeError):
    pass


class MissingEnvelopeError(ValueError):
    pass


class NonFiniteEvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class FieProblem:
    """One instance of the equation.

    ``P`` and ``S`` take ``(xi, y)`` and must broadcast over numpy arrays.
    ``P1`` is an optional declared Lipschitz constant of ``P`` in ``y``;
    ``paper_P_hat`` maps ``e0`` to the substituted value of ``sup|P(xi, 0)|``
    used by the ``paper-as-stated`` mode.
    """

    P: Callable
    S: Callable
    kernel: KernelSpec
    S1: Optional[Callable[[float], float]] = None
    name: str = "custom"
    grid_n: int = 1025
    e0: Optional[float] = None
    P1: Optional[float] = None
    paper_P_hat: Optional[Callable[[float], float]] = None

    def __post_init__(self) -> None:
        if tuple(float(v) for v in self.kernel.interval) != (0.0, 1.0):
            raise ValueError(f"problems live on [0, 1], got {self.kernel.interval!r}")
        if not 0.0 < self.kernel.delta < 1.0:
            raise ValueError(f"problem order must satisfy 0 < delta < 1, got {self.kernel.delta!r}")
        if self.grid_n < 3:
            raise ValueError("grid_n must be >= 3")

    @property
    def delta(self) -> float:
        return self.kernel.delta

    def nodes(self, n: Optional[int] = None) -> np.ndarray:
        return np.linspace(0.0, 1.0, n or self.grid_n)

    def zero(self, n: Optional[int] = None) -> GridFunction:
        return GridFunction.constant(0.0, n or self.grid_n)

    def with_grid(self, n: int) -> FieProblem:
        return FieProblem(self.P, self.S, self.kernel, self.S1, self.name, n, self.e0, self.P1, self.paper_P_hat)


@dataclass
class SolveResult:
    solution: GridFunction
    step_history: list[float]
    residual_history: list[float]
    iterations: int
    final_residual: float
    converged: bool

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "step_history": list(self.step_history),
            "residual_history": list(self.residual_history),
            "solution": {
                "interval": list(self.solution.interval),
                "n": self.solution.n,
                "sup_norm": self.solution.sup_norm(),
                "values": self.solution.values.tolist(),
            },
        }


def _threads() -> int:
    raw = os.environ.get("FRACFIE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


_ROWS = 256


def _h_rows(problem: FieProblem, M: np.ndarray, xi: np.ndarray, y: np.ndarray, lo: int, hi: int) -> np.ndarray:
    Srows = np.broadcast_to(np.asarray(problem.S(xi[lo:hi, None], y[None, :]), dtype=float), (hi - lo, y.size))
    if not np.all(np.isfinite(Srows)):
        r, c = np.argwhere(~np.isfinite(Srows))[0]
        raise NonFiniteEvaluationError(
            f"S is not finite at outer node {lo + r} (xi = {xi[lo + r]!r}), inner node {c} (y = {y[c]!r})"
        )
    return np.einsum("ij,ij->i", M[lo:hi], Srows)


def apply_H(problem: FieProblem, y: GridFunction) -> GridFunction:
    """One application of the fixed-point operator on ``y``'s grid.

    The inner integral is recomputed for each outer node because ``S``
    depends on the outer variable; cost is ``O(n**2)``.
    """
    if y.interval != (0.0, 1.0):
        raise ValueError(f"expected a grid function on [0, 1], got {y.interval!r}")
    xi = y.nodes
    yv = y.values
    M = product_weights(problem.kernel, y.n)
    p = _eval(lambda x: problem.P(x, yv), xi)
    if not np.all(np.isfinite(p)):
        k = int(np.argmax(~np.isfinite(p)))
        raise NonFiniteEvaluationError(f"P is not finite at node {k} (xi = {xi[k]!r}, y = {yv[k]!r})")
    blocks = [(lo, min(lo + _ROWS, y.n)) for lo in range(0, y.n, _ROWS)]
    nthreads = min(_threads(), len(blocks))
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(lambda b: _h_rows(problem, M, xi, yv, *b), blocks))
    else:
        parts = [_h_rows(problem, M, xi, yv, *b) for b in blocks]
    return y.with_values(p + np.concatenate(parts))


def residual(problem: FieProblem, y: GridFunction) -> float:
    return float(np.max(np.abs(y.values - apply_H(problem, y).values)))


def picard_solve(
    problem: FieProblem,
    y0: Optional[GridFunction] = None,
    tol: float = 1e-10,
    max_iter: int = 200,
    blowup: float = 1e6,
) -> SolveResult:
    """Successive approximation ``y_{k+1} = H y_k`` from ``y0`` (default zero).

    Stops once the sup-norm step falls to ``tol``.  ``H`` is applied once
    more to the returned iterate, so ``final_residual`` is a true residual.
    """
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    y = y0 if y0 is not None else problem.zero()
    Hy = apply_H(problem, y)
    steps: list[float] = []
    residuals: list[float] = []
    converged = False
    k = 0
    while k < max_iter:
        k += 1
        y_next = Hy
        norm = y_next.sup_norm()
        if not norm <= blowup:
            raise DivergenceError(f"iterate {k} has sup norm {norm:.3e} > {blowup:.3e}")
        steps.append(float(np.max(np.abs(y_next.values - y.values))))
        y = y_next
        Hy = apply_H(problem, y)
        residuals.append(float(np.max(np.abs(y.values - Hy.values))))
        log.debug("iter %d step %.3e residual %.3e", k, steps[-1], residuals[-1])
        if steps[-1] <= tol:
            converged = True
            break
    return SolveResult(y, steps, residuals, k, residuals[-1], converged)


def _sobol(dim: int, count: int) -> np.ndarray:
    m = int(np.ceil(np.log2(max(count, 2))))
    return qmc.Sobol(dim, scramble=False).random_base2(m)[:count]


def estimate_lipschitz_P(problem: FieProblem, e0: float, samples: int = 4096) -> float:
    """Largest sampled difference quotient of ``P`` in ``y`` on ``I x [-e0, e0]``.

    Deterministic: unscrambled Sobol points in ``(xi, y, y')``, plus every
    grid node paired with a fixed set of ``(y, y')``.  This is a lower bound
    on the true constant.
    """
    if e0 <= 0.0:
        raise ValueError("e0 must be > 0")
    if samples < 100:
        raise ValueError("samples must be >= 100")
    pts = _sobol(3, samples + 1)[1:]
    xi = pts[:, 0]
    y1 = e0 * (2.0 * pts[:, 1] - 1.0)
    y2 = e0 * (2.0 * pts[:, 2] - 1.0)
    pairs = e0 * (2.0 * _sobol(2, 17)[1:] - 1.0)
    grid = problem.nodes()
    xi = np.concatenate([xi, np.repeat(grid, len(pairs))])
    y1 = np.concatenate([y1, np.tile(pairs[:, 0], grid.size)])
    y2 = np.concatenate([y2, np.tile(pairs[:, 1], grid.size)])
    keep = y1 != y2
    xi, y1, y2 = xi[keep], y1[keep], y2[keep]
    q = np.abs(_eval(lambda x: problem.P(x, y1), xi) - _eval(lambda x: problem.P(x, y2), xi)) / np.abs(y1 - y2)
    return float(q.max())


def compute_P_hat(problem: FieProblem) -> float:
    xi = problem.nodes()
    return float(np.max(np.abs(_eval(lambda x: problem.P(x, np.zeros_like(x)), xi))))


def bound_weight(problem: FieProblem) -> tuple[float, float]:
    """Grid suprema of ``|w|`` and ``|1/w|``."""
    w = problem.kernel.weight.values(problem.nodes())
    return float(np.max(np.abs(w))), float(np.max(np.abs(1.0 / w)))


def _warp_span(problem: FieProblem) -> float:
    u = _eval(problem.kernel.warp.u, np.array([0.0, 1.0]))
    return float(u[1] - u[0])


def _declared_or_estimated_P1(problem: FieProblem, e0: float) -> float:
    return problem.P1 if problem.P1 is not None else estimate_lipschitz_P(problem, e0)


@dataclass(frozen=True)
class _VConstants:
    """Parts of the radius condition that do not depend on ``e0``."""

    mode: str
    P1: Optional[float]
    K1: float
    K2: float
    span_factor: float
    P_hat: Optional[float]


def _v_constants(problem: FieProblem, mode: Mode, P1_radius: Optional[float] = None) -> _VConstants:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if problem.S1 is None:
        raise MissingEnvelopeError(f"problem {problem.name!r} declares no S1 envelope")
    if mode == "paper-as-stated" and problem.paper_P_hat is None:
        raise ValueError(f"problem {problem.name!r} has no paper-as-stated P_hat")
    P1 = problem.P1
    if P1 is None and P1_radius is not None:
        P1 = estimate_lipschitz_P(problem, P1_radius)
    K1, K2 = bound_weight(problem)
    d = problem.delta
    return _VConstants(
        mode=mode,
        P1=P1,
        K1=K1,
        K2=K2,
        span_factor=_warp_span(problem) ** d / gamma(d + 1.0),
        P_hat=compute_P_hat(problem) if mode == "definition" else None,
    )


def _v_terms(problem: FieProblem, e0: float, c: _VConstants) -> dict:
    p_hat = c.P_hat if c.P_hat is not None else float(problem.paper_P_hat(e0))
    P1 = c.P1 if c.P1 is not None else estimate_lipschitz_P(problem, e0)
    s1 = float(problem.S1(e0))
    kernel = c.K1 * c.K2 * s1 * c.span_factor
    lhs = P1 * e0 + p_hat + kernel
    return {
        "e0": float(e0),
        "mode": c.mode,
        "P1": float(P1),
        "P_hat": float(p_hat),
        "K1": c.K1,
        "K2": c.K2,
        "S1_at_e0": s1,
        "kernel_term": float(kernel),
        "lhs": float(lhs),
        "margin": float(e0 - lhs),
        "holds": bool(lhs <= e0 + V_TOL),
    }


def assumption_V_terms(problem: FieProblem, e0: float, mode: Mode = "definition") -> dict:
    """Every quantity entering the radius condition at ``e0``.

    ``P1`` is the declared constant when the problem has one, otherwise the
    sampled estimate on ``[-e0, e0]``.
    """
    if not e0 > 0.0:
        raise ValueError("e0 must be > 0")
    return _v_terms(problem, e0, _v_constants(problem, mode))


def check_assumption_V(problem: FieProblem, e0: float, mode: Mode = "definition") -> bool:
    return assumption_V_terms(problem, e0, mode)["holds"]


def feasible_e0_interval(
    problem: FieProblem,
    mode: Mode = "definition",
    scan: tuple[float, float, int] = (1e-4, 5.0, 5000),
) -> Optional[tuple[float, float]]:
    """Feasible radii found on a uniform scan, ends refined by root finding.

    The scanned range bounds the answer: an end that is feasible at the scan
    boundary is reported as that boundary.  Without a declared ``P1`` the
    estimate over the whole scanned ball is used for every radius.
    """
    lo, hi, steps = scan
    if not 0.0 < lo < hi:
        raise ValueError("scan needs 0 < lo < hi")
    if steps < 100:
        raise ValueError("scan needs at least 100 steps")
    c = _v_constants(problem, mode, P1_radius=hi)
    grid = np.linspace(lo, hi, int(steps))
    margin = lambda e: _v_terms(problem, e, c)["margin"]  # noqa: E731
    ok = np.array([margin(e) >= -V_TOL for e in grid])
    if not ok.any():
        return None
    first = int(np.argmax(ok))
    last = int(ok.size - 1 - np.argmax(ok[::-1]))
    left, right = float(grid[first]), float(grid[last])
    rtol = 4 * np.finfo(float).eps
    if first > 0:
        left = brentq(margin, grid[first - 1], grid[first], xtol=1e-15, rtol=rtol)
    if last < ok.size - 1:
        right = brentq(margin, grid[last], grid[last + 1], xtol=1e-15, rtol=rtol)
    return float(left), float(right)


@dataclass
class HypothesisReport:
    problem: str
    mode: str
    P1: float
    P1_estimate: float
    P_hat: float
    K1: float
    K2: float
    S1_at_e0: Optional[float]
    e0: Optional[float]
    e0_holds: Optional[bool]
    e0_feasible_interval: Optional[tuple[float, float]]
    terms: Optional[dict] = field(default=None)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["e0_feasible_interval"] is not None:
            d["e0_feasible_interval"] = list(d["e0_feasible_interval"])
        return d


def hypothesis_report(
    problem: FieProblem,
    mode: Mode = "definition",
    e0: Optional[float] = None,
    scan: tuple[float, float, int] = (1e-4, 5.0, 5000),
) -> HypothesisReport:
    """Evaluate the existence hypotheses at ``e0``, or scan for feasible ``e0``."""
    interval = None
    if e0 is None:
        interval = feasible_e0_interval(problem, mode, scan)
        probe = interval[1] if interval is not None else (problem.e0 or 1.0)
    else:
        probe = e0
    terms = assumption_V_terms(problem, probe, mode)
    return HypothesisReport(
        problem=problem.name,
        mode=mode,
        P1=terms["P1"],
        P1_estimate=estimate_lipschitz_P(problem, probe),
        P_hat=terms["P_hat"],
        K1=terms["K1"],
        K2=terms["K2"],
        S1_at_e0=terms["S1_at_e0"],
        e0=float(probe),
        e0_holds=terms["holds"] if e0 is not None else None,
        e0_feasible_interval=interval,
        terms=terms,
    )


def p_xi_modulus(problem: FieProblem, e0: float, theta: float, levels: int = 65) -> float:
    """``sup |P(xi2, y) - P(xi1, y)|`` over ``|xi2 - xi1| <= theta``, ``|y| <= e0``."""
    xi = problem.nodes()
    best = 0.0
    for yv in np.linspace(-e0, e0, levels):
        f = GridFunction((0.0, 1.0), _eval(lambda x: problem.P(x, np.full_like(x, yv)), xi))
        best = max(best, modulus_of_continuity(f, theta))
    return best


def s_increment_modulus(problem: FieProblem, e0: float, theta: float, levels: int = 129) -> float:
    """``sup |S(xi, y) - S(xi, y1)|`` over ``|y - y1| <= theta`` in ``[-e0, e0]``, ``xi`` in the grid."""
    ys = np.linspace(-e0, e0, levels)
    step = ys[1] - ys[0]
    lag = max(1, int(np.floor(theta / step * (1.0 + 1e-12))))
    xi = problem.nodes()
    Sv = np.broadcast_to(np.asarray(problem.S(xi[:, None], ys[None, :]), dtype=float), (xi.size, ys.size))
    best = 0.0
    for k in range(1, min(lag, levels - 1) + 1):
        best = max(best, float(np.abs(Sv[:, k:] - Sv[:, :-k]).max()))
    return best


@dataclass
class ContractionEstimate:
    gamma_before: float
    gamma_after: float
    P1: float
    p_xi_term: float
    kernel_term: Optional[float]

    @property
    def ratio(self) -> Optional[float]:
        return self.gamma_after / self.gamma_before if self.gamma_before > 0 else None

    @property
    def bound(self) -> Optional[float]:
        """``P1 * gamma_before + c(theta)``; None without an ``S1`` envelope."""
        if self.kernel_term is None:
            return None
        return self.P1 * self.gamma_before + self.p_xi_term + self.kernel_term

    def to_dict(self) -> dict:
        return {
            "gamma_before": self.gamma_before,
            "gamma_after": self.gamma_after,
            "ratio": self.ratio,
            "P1": self.P1,
            "p_xi_term": self.p_xi_term,
            "kernel_term": self.kernel_term,
            "bound": self.bound,
        }


def contraction_estimate(problem: FieProblem, seed: FunctionFamily, theta: float) -> ContractionEstimate:
    """Family modulus before and after one application of ``H``.

    Also reports the additive constant ``c(theta)``: the ``xi``-modulus of
    ``P`` over the ball of radius ``sup|seed|`` plus the kernel term.  Nothing
    is asserted here.
    """
    after = FunctionFamily(apply_H(problem, y) for y in seed)
    e0 = max(seed.sup_norm(), 1e-12)
    P1 = _declared_or_estimated_P1(problem, e0)
    kernel_term = None
    if problem.S1 is not None:
        K1, K2 = bound_weight(problem)
        xi = problem.nodes(seed[0].n)
        u = _eval(problem.kernel.warp.u, xi)
        growth = GridFunction((0.0, 1.0), (u - u[0]) ** problem.delta)
        kernel_term = K1 * K2 * float(problem.S1(e0)) / gamma(problem.delta + 1.0) * modulus_of_continuity(growth, theta)
    return ContractionEstimate(
        gamma_before=family_modulus(seed, theta),
        gamma_after=family_modulus(after, theta),
        P1=float(P1),
        p_xi_term=p_xi_modulus(problem.with_grid(seed[0].n), e0, theta),
        kernel_term=kernel_term,
    )

"""Built-in problems and the JSON problem-file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from ..fraccalc import KernelSpec, WarpFunction, WeightFunction
from ..solver import FieProblem
from ..special import gamma
from .expression import (
    Expression,
    ExpressionEvalError,
    ExpressionSyntaxError,
    parse_expression,
)

__all__ = [
    "BUILTINS",
    "ProblemConfig",
    "ProblemFileError",
    "builtin",
    "load_problem",
    "problem_from_config",
    "resolve_problem",
    "parse_expression",
    "Expression",
    "ExpressionSyntaxError",
    "ExpressionEvalError",
]


class ProblemFileError(ValueError):
    pass


def _example1() -> FieProblem:
    return FieProblem(
        P=lambda xi, y: (y + 1.0) / (4.0 + xi**2),
        S=lambda xi, y: y**2 / (1.0 + xi**2),
        kernel=KernelSpec(0.5),
        S1=lambda r: r**2,
        name="example1",
        e0=gamma(1.5) / 2.0,
        P1=0.25,
        paper_P_hat=lambda e0: e0 / 4.0,
    )


def _example2() -> FieProblem:
    return FieProblem(
        P=lambda xi, y: (y + 1.0) / (9.0 + xi**4),
        S=lambda xi, y: np.sqrt(y**4 / (1.0 + y**4)) + 0.0 * xi,
        kernel=KernelSpec(1.0 / 3.0),
        S1=lambda r: r**2,
        name="example2",
        e0=7.0 * gamma(4.0 / 3.0) / 9.0,
        P1=1.0 / 9.0,
        paper_P_hat=lambda e0: e0 / 9.0,
    )


BUILTINS = {"example1": _example1, "example2": _example2}


def builtin(name: str) -> FieProblem:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown built-in problem {name!r}; available: {', '.join(sorted(BUILTINS))}") from None


PROBLEM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "delta", "P", "S", "U", "w"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "P": {"type": "string"},
        "S": {"type": "string"},
        "U": {"type": "string"},
        "dU": {"type": "string"},
        "w": {"type": "string"},
        "S1": {"type": "string"},
        "grid_n": {"type": "integer", "minimum": 33},
        "e0": {"type": "number", "exclusiveMinimum": 0},
    },
}

_ALLOWED_VARS = {
    "P": {"xi", "y"},
    "S": {"xi", "y"},
    "U": {"xi"},
    "dU": {"xi"},
    "w": {"xi"},
    "S1": {"r"},
}


@dataclass
class ProblemConfig:
    name: str
    delta: float
    expressions: dict[str, Expression]
    grid_n: int = 1025
    e0: Optional[float] = None
    sources: dict[str, str] = field(default_factory=dict)


def _config_from_mapping(raw: dict) -> ProblemConfig:
    validator = jsonschema.Draft202012Validator(PROBLEM_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}: {e.message}")
        raise ProblemFileError("invalid problem file:\n  " + "\n  ".join(lines))
    exprs = {}
    for key, allowed in _ALLOWED_VARS.items():
        if key not in raw:
            continue
        try:
            ex = parse_expression(raw[key])
        except ExpressionSyntaxError as exc:
            raise ProblemFileError(f"{key}: {exc}") from exc
        extra = ex.variables - allowed
        if extra:
            raise ProblemFileError(f"{key}: variables {sorted(extra)} not allowed (use {sorted(allowed)})")
        exprs[key] = ex
    return ProblemConfig(
        name=raw["name"],
        delta=float(raw["delta"]),
        expressions=exprs,
        grid_n=int(raw.get("grid_n", 1025)),
        e0=raw.get("e0"),
        sources={k: raw[k] for k in _ALLOWED_VARS if k in raw},
    )


def _numeric_derivative(fn, step: float = 1e-6):
    return lambda x: (fn(x + step) - fn(x - step)) / (2.0 * step)


def _as_array(ex: Expression, **env):
    shape = np.broadcast(*env.values()).shape
    return np.broadcast_to(np.asarray(ex(**env), dtype=float), shape)


def problem_from_config(cfg: ProblemConfig) -> FieProblem:
    ex = cfg.expressions
    u = lambda x: _as_array(ex["U"], xi=np.asarray(x, dtype=float))  # noqa: E731
    if "dU" in ex:
        du = lambda x: _as_array(ex["dU"], xi=np.asarray(x, dtype=float))  # noqa: E731
    else:
        du = _numeric_derivative(u)
    w = lambda x: _as_array(ex["w"], xi=np.asarray(x, dtype=float))  # noqa: E731
    S1 = None
    if "S1" in ex:
        S1 = lambda r: float(ex["S1"](r=float(r)))  # noqa: E731
    return FieProblem(
        P=lambda xi, y: _as_array(ex["P"], xi=xi, y=y),
        S=lambda xi, y: _as_array(ex["S"], xi=xi, y=y),
        kernel=KernelSpec(cfg.delta, WarpFunction(u, du), WeightFunction(w)),
        S1=S1,
        name=cfg.name,
        grid_n=cfg.grid_n,
        e0=cfg.e0,
    )


def load_problem(path: str | Path) -> FieProblem:
    """Read a JSON problem file and build the problem it describes."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ProblemFileError(f"problem file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{p}: not valid JSON ({exc})") from exc
    return problem_from_config(_config_from_mapping(raw))


def resolve_problem(ref: str) -> FieProblem:
    """A built-in name or a path to a problem file."""
    if ref in BUILTINS:
        return builtin(ref)
    return load_problem(ref)

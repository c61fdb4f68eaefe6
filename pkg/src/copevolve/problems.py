"""Constrained continuous minimization problems over a box.

A problem is a shifted benchmark objective (minimum 0 at the origin), box
bounds, and an ordered list of linear or univariate-quadratic inequality
constraints ``g(x) <= 0``.  The origin is feasible whenever every constraint
offset is <= 0, which the instance generators guarantee.

Instances round-trip through a small JSON file format (see
:func:`problem_to_dict` / :func:`problem_from_dict`); unknown keys inside the
``meta`` object are preserved.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

import numpy as np

from . import _evalcore


class Objective(Enum):
    SPHERE = "sphere"
    ACKLEY = "ackley"
    ROSENBROCK = "rosenbrock"

    @property
    def code(self) -> int:
        return _OBJ_CODES[self]


_OBJ_CODES = {
    Objective.SPHERE: _evalcore.OBJ_SPHERE,
    Objective.ACKLEY: _evalcore.OBJ_ACKLEY,
    Objective.ROSENBROCK: _evalcore.OBJ_ROSENBROCK,
}

DEFAULT_BOUND = 5.0
DEFAULT_COEFF_RANGE = (-5.0, 5.0)


class ConstraintKind(Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


def _frozen(a: Iterable[float]) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Bounds:
    """Box bounds, one (lower, upper) pair per coordinate."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen(self.lower))
        object.__setattr__(self, "upper", _frozen(self.upper))
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper must be 1-d vectors of equal length")
        if not np.all(self.lower < self.upper):
            raise ValueError("every lower bound must be strictly below its upper bound")

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    @staticmethod
    def symmetric(dimension: int, half_width: float = DEFAULT_BOUND) -> "Bounds":
        return Bounds(np.full(dimension, -half_width), np.full(dimension, half_width))


@dataclass(frozen=True)
class Constraint:
    """One inequality constraint g(x) <= 0.

    Linear: ``coeffs`` has length n and g(x) = offset + coeffs . x.
    Quadratic: ``coeffs`` has length 2n holding per-variable pairs
    (quadratic coefficient, linear coefficient), so
    g(x) = offset + sum_k coeffs[2k] * x_k**2 + coeffs[2k+1] * x_k.

    Range constraints (offset <= 0, coefficients within the coefficient box)
    are properties of *generated* instances, enforced by the genome codec;
    hand-built constraints may leave them, e.g. to construct a problem with an
    empty feasible region.
    """

    kind: ConstraintKind
    coeffs: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))
        object.__setattr__(self, "offset", float(self.offset))
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("coeffs must be a nonempty vector")
        if self.kind is ConstraintKind.QUADRATIC and self.coeffs.size % 2 != 0:
            raise ValueError("quadratic constraints need a (quadratic, linear) coefficient pair per variable")
        if not np.all(np.isfinite(self.coeffs)) or not np.isfinite(self.offset):
            raise ValueError("constraint coefficients must be finite")

    @property
    def dimension(self) -> int:
        if self.kind is ConstraintKind.LINEAR:
            return self.coeffs.size
        return self.coeffs.size // 2

    def quadratic_terms(self) -> np.ndarray:
        """Per-variable quadratic coefficients (zeros for a linear constraint)."""
        if self.kind is ConstraintKind.LINEAR:
            return np.zeros(self.dimension)
        return self.coeffs[0::2].copy()

    def linear_terms(self) -> np.ndarray:
        if self.kind is ConstraintKind.LINEAR:
            return self.coeffs.copy()
        return self.coeffs[1::2].copy()

    def value(self, x: np.ndarray) -> float:
        lin = float(self.linear_terms() @ x)
        quad = float(self.quadratic_terms() @ (x * x))
        return self.offset + quad + lin


@dataclass(frozen=True)
class Evaluation:
    """Objective value, per-constraint values, and total violation at a point."""

    objective_value: float
    violations: np.ndarray
    total_violation: float

    def __post_init__(self):
        object.__setattr__(self, "violations", _frozen(self.violations))


@dataclass(frozen=True)
class Problem:
    objective: Objective
    dimension: int
    bounds: Bounds
    constraints: tuple[Constraint, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.bounds.dimension != self.dimension:
            raise ValueError("bounds dimension does not match the problem dimension")
        for c in self.constraints:
            if c.dimension != self.dimension:
                raise ValueError("constraint dimension does not match the problem dimension")
        object.__setattr__(self, "_packed", _pack_constraints(self.dimension, self.constraints))

    @property
    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Q, L, b) arrays with g(x) = b + Q @ x**2 + L @ x, one row per constraint."""
        return self._packed  # type: ignore[attr-defined]


def _pack_constraints(n: int, constraints: tuple[Constraint, ...]):
    m = len(constraints)
    Q = np.zeros((m, n))
    L = np.zeros((m, n))
    b = np.zeros(m)
    for j, c in enumerate(constraints):
        Q[j] = c.quadratic_terms()
        L[j] = c.linear_terms()
        b[j] = c.offset
    for a in (Q, L, b):
        a.setflags(write=False)
    return Q, L, b


def _check_point(problem: Problem, x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (problem.dimension,):
        raise ValueError(f"point has shape {x.shape}, expected ({problem.dimension},)")
    return x


def evaluate_objective(problem: Problem, x: np.ndarray) -> float:
    """f(x) for the shifted objective; pure, deterministic, and >= 0 everywhere."""
    x = _check_point(problem, x)
    return float(_evalcore.objective_value(problem.objective.code, x))


def evaluate(problem: Problem, x: np.ndarray) -> Evaluation:
    """Evaluate objective and all constraints at x (one FEN unit inside a solver)."""
    x = _check_point(problem, x)
    Q, L, b = problem.packed
    f, g, phi = _evalcore.eval_point(problem.objective.code, Q, L, b, x)
    return Evaluation(float(f), g, float(phi))


def evaluate_batch(problem: Problem, X: np.ndarray):
    """Row-wise evaluation: returns (objectives, constraint values, violations)."""
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != problem.dimension:
        raise ValueError(f"batch has shape {X.shape}, expected (N, {problem.dimension})")
    Q, L, b = problem.packed
    return _evalcore.eval_batch(problem.objective.code, Q, L, b, X)


def is_feasible(problem: Problem, x: np.ndarray) -> bool:
    x = _check_point(problem, x)
    if not problem.bounds.contains(x):
        return False
    return evaluate(problem, x).total_violation == 0.0


def transform_equality(h_value: float, epsilon: float = 1e-4) -> float:
    """Relax an equality constraint value to inequality form: |h| - epsilon <= 0."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return abs(h_value) - epsilon


def sample_uniform(bounds: Bounds, rng_seed) -> np.ndarray:
    """One point uniform in the box; deterministic for a given seed."""
    rng = np.random.default_rng(rng_seed)
    return rng.uniform(bounds.lower, bounds.upper)


# ---------------------------------------------------------------------------
# Instance file format (JSON)
# ---------------------------------------------------------------------------

def problem_to_dict(problem: Problem) -> dict[str, Any]:
    return {
        "objective": problem.objective.value,
        "dimension": problem.dimension,
        "bounds": {
            "lower": problem.bounds.lower.tolist(),
            "upper": problem.bounds.upper.tolist(),
        },
        "constraints": [
            {"kind": c.kind.value, "coeffs": c.coeffs.tolist(), "b": c.offset}
            for c in problem.constraints
        ],
        "meta": dict(problem.meta),
    }


def problem_from_dict(data: dict[str, Any]) -> Problem:
    try:
        objective = Objective(data["objective"])
        dimension = int(data["dimension"])
        bounds = Bounds(data["bounds"]["lower"], data["bounds"]["upper"])
        constraints = tuple(
            Constraint(ConstraintKind(c["kind"]), np.asarray(c["coeffs"], dtype=float), c["b"])
            for c in data["constraints"]
        )
        meta = dict(data.get("meta", {}))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance record: {exc}") from exc
    return Problem(objective, dimension, bounds, constraints, meta)


def save_problem(problem: Problem, path: str | os.PathLike) -> None:
    """Write an instance file atomically (write to a temp file, then rename)."""
    payload = json.dumps(problem_to_dict(problem), indent=2, sort_keys=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(payload + "\n")
    os.replace(tmp, path)


def load_problem(path: str | os.PathLike) -> Problem:
    with open(path) as fh:
        return problem_from_dict(json.load(fh))

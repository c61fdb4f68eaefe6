"""Solver configuration, outcomes, comparisons, and the three solve entry points.

FEN (function evaluation number) is the shared currency: every call that
evaluates objective and constraints at one point costs one unit, a run stops
at the first evaluation that solves the instance (feasible and within the
target gap) or when the budget is spent, and an unsolved run reports
``fen == max_fen``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .. import _evalcore
from ..problems import Problem, evaluate
from . import engine


class SolverKind(Enum):
    DE = "de"
    ES = "es"
    PSO = "pso"


@dataclass(frozen=True)
class SolverConfig:
    """Runtime parameters for one solver.

    ``population_size`` is the DE population / PSO swarm size and is 1 for
    the (1+1)-ES.  Fields after ``target_gap`` are kind-specific; irrelevant
    ones are ignored.  ES constants left at ``None`` resolve from the problem
    dimension n at solve time: direction smoothing 1/(n+2), shrink rate
    0.1/(n+2), step damping 1 + n/2, covariance learning 2/(n^2+6).
    """

    kind: SolverKind
    population_size: int
    max_fen: int
    target_gap: float = 1e-2
    # DE
    crossover_rate: float = 0.5
    scale_factor: float = 0.5
    epsilon_quantile: float = 0.2
    epsilon_cutoff_fraction: float = 0.2
    gradient_repair_prob: float = 0.2
    gradient_step: float = 1e-6
    # ES
    direction_smoothing: float | None = None
    shrink_rate: float | None = None
    target_success_rate: float = 2.0 / 11.0
    success_smoothing: float = 1.0 / 12.0
    step_damping: float | None = None
    initial_step_fraction: float = 0.2
    covariance_learning: float | None = None
    # PSO
    subswarm_size: int = 8

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if self.max_fen < self.population_size:
            raise ValueError("max_fen must cover at least the initial population")
        if not self.target_gap > 0:
            raise ValueError("target_gap must be positive")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if not self.scale_factor > 0:
            raise ValueError("scale_factor must be positive")
        if not 0.0 < self.epsilon_quantile < 1.0:
            raise ValueError("epsilon_quantile must lie in (0, 1)")
        if not 0.0 <= self.gradient_repair_prob <= 1.0:
            raise ValueError("gradient_repair_prob must lie in [0, 1]")

    def override(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SolveOutcome:
    fen: int
    solved: bool
    best_x: np.ndarray
    best_f: float
    best_violation: float


def epsilon_compare(lhs: tuple[float, float], rhs: tuple[float, float],
                    epsilon_level: float = 0.0) -> int:
    """Order (objective, violation) pairs under an epsilon level.

    Both violations at or below the level, or exactly equal, compare by
    objective; otherwise the smaller violation wins.  Returns -1 when lhs is
    better, 1 when rhs is better, 0 on ties.
    """
    f1, p1 = lhs
    f2, p2 = rhs
    if any(math.isnan(v) for v in (f1, p1, f2, p2, epsilon_level)):
        raise ValueError("NaN is not orderable")
    if (p1 <= epsilon_level and p2 <= epsilon_level) or p1 == p2:
        a, b = f1, f2
    else:
        a, b = p1, p2
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def feasibility_compare(lhs: tuple[float, float], rhs: tuple[float, float]) -> int:
    """Feasibility-rule ordering used by the PSO: epsilon comparison at level 0."""
    return epsilon_compare(lhs, rhs, 0.0)


def numerical_gradient(problem: Problem, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of all constraints, one row per constraint.

    Costs 2n point evaluations, which a solver charges against its budget
    when repairing a trial point.
    """
    if not h > 0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=float)
    n = problem.dimension
    m = len(problem.constraints)
    J = np.empty((m, n))
    probe = x.copy()
    for k in range(n):
        probe[k] = x[k] + h
        gp = evaluate(problem, probe).violations
        probe[k] = x[k] - h
        gm = evaluate(problem, probe).violations
        probe[k] = x[k]
        J[:, k] = (gp - gm) / (2.0 * h)
    return J


def _packed_arrays(problem: Problem):
    Q, L, b = problem.packed
    return (problem.objective.code, Q, L, b,
            problem.bounds.lower, problem.bounds.upper)


def _outcome(raw) -> SolveOutcome:
    fen, solved, best_x, best_f, best_phi = raw
    return SolveOutcome(int(fen), bool(solved), best_x.copy(), float(best_f), float(best_phi))


def solve_de(problem: Problem, config: SolverConfig, seed) -> SolveOutcome:
    if config.kind is not SolverKind.DE:
        raise ValueError("config.kind must be DE")
    if config.population_size < 4:
        raise ValueError("DE needs a population of at least 4 (base + 3 donors)")
    rng = np.random.default_rng(seed)
    code, Q, L, b, lo, hi = _packed_arrays(problem)
    raw = engine.de_solve(
        rng, code, Q, L, b, lo, hi,
        config.population_size, config.scale_factor, config.crossover_rate,
        config.epsilon_quantile, config.epsilon_cutoff_fraction,
        config.gradient_repair_prob, config.gradient_step,
        config.max_fen, config.target_gap)
    return _outcome(raw)


def solve_es(problem: Problem, config: SolverConfig, seed) -> SolveOutcome:
    if config.kind is not SolverKind.ES:
        raise ValueError("config.kind must be ES")
    n = problem.dimension
    dir_smoothing = config.direction_smoothing if config.direction_smoothing is not None else 1.0 / (n + 2)
    shrink = config.shrink_rate if config.shrink_rate is not None else 0.1 / (n + 2)
    damping = config.step_damping if config.step_damping is not None else 1.0 + n / 2.0
    cov_learning = config.covariance_learning if config.covariance_learning is not None else 2.0 / (n**2 + 6)
    sigma0 = config.initial_step_fraction * float(np.mean(problem.bounds.width))
    rng = np.random.default_rng(seed)
    code, Q, L, b, lo, hi = _packed_arrays(problem)
    raw = engine.es_solve(
        rng, code, Q, L, b, lo, hi,
        dir_smoothing, shrink, config.target_success_rate,
        config.success_smoothing, damping, cov_learning, sigma0,
        config.max_fen, config.target_gap)
    return _outcome(raw)


def solve_pso(problem: Problem, config: SolverConfig, seed) -> SolveOutcome:
    if config.kind is not SolverKind.PSO:
        raise ValueError("config.kind must be PSO")
    if config.subswarm_size < 1 or config.population_size % config.subswarm_size != 0:
        raise ValueError(
            f"swarm size {config.population_size} is not divisible by "
            f"sub-swarm size {config.subswarm_size}")
    rng = np.random.default_rng(seed)
    code, Q, L, b, lo, hi = _packed_arrays(problem)
    raw = engine.pso_solve(
        rng, code, Q, L, b, lo, hi,
        config.population_size, config.subswarm_size,
        config.max_fen, config.target_gap)
    return _outcome(raw)


_SOLVE_FNS = {SolverKind.DE: solve_de, SolverKind.ES: solve_es, SolverKind.PSO: solve_pso}


def solve(problem: Problem, config: SolverConfig, seed) -> SolveOutcome:
    """Dispatch to the solver selected by ``config.kind``."""
    return _SOLVE_FNS[config.kind](problem, config, seed)

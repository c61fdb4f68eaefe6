from .api import (
    SolveOutcome,
    SolverConfig,
    SolverKind,
    epsilon_compare,
    feasibility_compare,
    numerical_gradient,
    solve,
    solve_de,
    solve_es,
    solve_pso,
)

__all__ = [
    "SolveOutcome",
    "SolverConfig",
    "SolverKind",
    "epsilon_compare",
    "feasibility_compare",
    "numerical_gradient",
    "solve",
    "solve_de",
    "solve_es",
    "solve_pso",
]

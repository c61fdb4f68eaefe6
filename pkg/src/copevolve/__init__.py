"""copevolve: evolve constrained problem instances that separate solvers.

Three constrained continuous solvers (an epsilon-level DE, a (1+1)-ES with
constraint-direction covariance shrinking, and a sub-swarm PSO) share a
budget-metered evaluation count (FEN).  Evolvers search constraint
coefficients for instances that are hard for one solver - or hard for one
and easy for the rest - and a feature extractor explains the gaps.
"""

from .evolve import (
    Direction,
    EvolverConfig,
    FitnessVector,
    InstanceGenome,
    InstanceTemplate,
    crowding_distance,
    dominates,
    encode,
    evolve_multi,
    evolve_single,
    fen_fitness,
    nondominated_sort,
    select_discriminating,
)
from .features import (
    FeatureConfig,
    FeatureVector,
    NoBoundaryError,
    UndefinedAngleError,
    UnsupportedKindError,
    coefficient_stddev,
    feasibility_ratio,
    feature_vector,
    pairwise_angle,
    shortest_distance,
)
from .presets import DESK, PAPER, Preset, get_preset
from .problems import (
    Bounds,
    Constraint,
    ConstraintKind,
    Evaluation,
    Objective,
    Problem,
    evaluate,
    evaluate_batch,
    evaluate_objective,
    is_feasible,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    sample_uniform,
    save_problem,
    transform_equality,
)
from .solvers import (
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

__version__ = "0.1.0"

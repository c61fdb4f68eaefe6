"""Named experiment scales.

``paper``: dimension 30 with 300K-evaluation solver budgets and a
40 x 5000 evolver - the full-scale setup, days of compute.
``desk``: dimension 5, 20K budgets, a 20 x 30 evolver with 3-repeat
fitness - minutes per cell, same directional behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass

from .evolve import EvolverConfig, InstanceTemplate
from .problems import ConstraintKind, Objective
from .solvers import SolverConfig, SolverKind


@dataclass(frozen=True)
class Preset:
    name: str
    dimension: int
    max_fen: int
    target_gap: float
    de_population: int
    de_scale_factor: float
    pso_population: int
    pso_subswarm: int
    evolver_population: int
    evolver_generations: int
    evolver_repeats: int
    validation_repeats: int

    def solver(self, kind: SolverKind, **overrides) -> SolverConfig:
        if kind is SolverKind.DE:
            base = SolverConfig(SolverKind.DE, self.de_population, self.max_fen,
                                self.target_gap, scale_factor=self.de_scale_factor)
        elif kind is SolverKind.ES:
            base = SolverConfig(SolverKind.ES, 1, self.max_fen, self.target_gap)
        else:
            base = SolverConfig(SolverKind.PSO, self.pso_population, self.max_fen,
                                self.target_gap, subswarm_size=self.pso_subswarm)
        return base.override(**overrides) if overrides else base

    def solvers(self) -> dict[str, SolverConfig]:
        return {k.value: self.solver(k) for k in SolverKind}

    def evolver(self, seed, **overrides) -> EvolverConfig:
        base = EvolverConfig(
            population_size=self.evolver_population,
            generations=self.evolver_generations,
            crossover_rate=0.5,
            scale_factor=0.9,
            repeats=self.evolver_repeats,
            seed=seed)
        return EvolverConfig(**{**base.__dict__, **overrides}) if overrides else base

    def template(self, objective: Objective, kind: ConstraintKind,
                 count: int, dimension: int | None = None) -> InstanceTemplate:
        return InstanceTemplate(objective, dimension or self.dimension,
                                (kind,) * count)


# Full-scale parameters: DE pop 100 / F 0.5 / CR 0.5, 300K budget, evolver
# 40 x 5000 with CR 0.5 / F 0.9.  The swarm is 64/8 so sub-swarms divide it.
PAPER = Preset(
    name="paper", dimension=30, max_fen=300_000, target_gap=1e-2,
    de_population=100, de_scale_factor=0.5,
    pso_population=64, pso_subswarm=8,
    evolver_population=40, evolver_generations=5000, evolver_repeats=5,
    validation_repeats=10,
)

# Desk populations scale down with the dimension (full scale runs 100 at
# n=30): a population of 100 at n=5 would spend the whole budget on
# initialization-scale convergence and every instance would look alike.
# The swarm stays at 40 = 5 sub-swarms of 8.
DESK = Preset(
    name="desk", dimension=5, max_fen=20_000, target_gap=1e-2,
    de_population=20, de_scale_factor=0.5,
    pso_population=40, pso_subswarm=8,
    evolver_population=20, evolver_generations=30, evolver_repeats=3,
    validation_repeats=10,
)

PRESETS = {p.name: p for p in (PAPER, DESK)}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None

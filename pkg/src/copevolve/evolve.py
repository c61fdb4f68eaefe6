"""Evolving constraint coefficients so instances become hard or easy to solve.

The search variable is a flat gene vector holding, per constraint, its
coefficients followed by its offset.  Fitness is the median FEN a solver
needs over repeated runs.  Two engines are provided:

* :func:`evolve_single` - plain DE over genes, maximizing (harder) or
  minimizing (easier) one solver's FEN;
* :func:`evolve_multi` - a DEMO loop whose objectives maximize the target
  solver's FEN and minimize every other solver's, with immediate
  dominance-based replacement and front/crowding truncation.

Solver seeds derive from (evolver seed, generation, slot, repeat), so a
fitness value is reproducible and stable for the lifetime of its genome.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .problems import (
    DEFAULT_COEFF_RANGE,
    Bounds,
    Constraint,
    ConstraintKind,
    Objective,
    Problem,
    problem_from_dict,
    problem_to_dict,
)
from .solvers import SolverConfig, solve

# spawn-key namespaces for the evolver's seed tree
_GENE_STREAM = 0
_INIT_STREAM = 1
_FITNESS_STREAM = 2
_VALIDATION_STREAM = 9


def resolve_workers(workers: int = 0) -> int:
    """Worker count for fitness evaluation; COPEVOLVE_THREADS overrides 0."""
    if workers <= 0:
        env = os.environ.get("COPEVOLVE_THREADS", "0")
        try:
            workers = int(env)
        except ValueError:
            workers = 0
    if workers <= 0:
        workers = os.cpu_count() or 1
    return max(1, workers)


@dataclass(frozen=True)
class InstanceTemplate:
    """Fixed frame an evolved genome fills in: objective, box, constraint slots."""

    objective: Objective
    dimension: int
    constraint_kinds: tuple[ConstraintKind, ...]
    bounds: Bounds | None = None
    coeff_lo: float = DEFAULT_COEFF_RANGE[0]
    coeff_hi: float = DEFAULT_COEFF_RANGE[1]

    def __post_init__(self):
        if self.bounds is None:
            object.__setattr__(self, "bounds", Bounds.symmetric(self.dimension))
        if self.bounds.dimension != self.dimension:
            raise ValueError("template bounds dimension mismatch")
        if not self.coeff_lo < self.coeff_hi:
            raise ValueError("coefficient range is empty")

    def genes_per_constraint(self, kind: ConstraintKind) -> int:
        base = self.dimension if kind is ConstraintKind.LINEAR else 2 * self.dimension
        return base + 1  # coefficients plus the offset gene

    @property
    def gene_count(self) -> int:
        return sum(self.genes_per_constraint(k) for k in self.constraint_kinds)

    def gene_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Box for the gene vector; offset genes live in [-|coeff_hi| * n, 0]."""
        lo = np.empty(self.gene_count)
        hi = np.empty(self.gene_count)
        pos = 0
        for kind in self.constraint_kinds:
            span = self.genes_per_constraint(kind)
            lo[pos:pos + span - 1] = self.coeff_lo
            hi[pos:pos + span - 1] = self.coeff_hi
            lo[pos + span - 1] = -abs(self.coeff_hi) * self.dimension
            hi[pos + span - 1] = 0.0
            pos += span
        return lo, hi


@dataclass(frozen=True)
class InstanceGenome:
    template: InstanceTemplate
    genes: np.ndarray

    def __post_init__(self):
        genes = np.array(self.genes, dtype=float)
        genes.setflags(write=False)
        object.__setattr__(self, "genes", genes)
        if genes.shape != (self.template.gene_count,):
            raise ValueError(
                f"genome has {genes.size} genes, template needs {self.template.gene_count}")
        lo, hi = self.template.gene_bounds()
        if np.any(genes < lo) or np.any(genes > hi):
            raise ValueError("genes outside the template's gene box")

    def decode(self, meta: dict | None = None) -> Problem:
        constraints = []
        pos = 0
        for kind in self.template.constraint_kinds:
            span = self.template.genes_per_constraint(kind)
            chunk = self.genes[pos:pos + span]
            constraints.append(Constraint(kind, chunk[:-1], float(chunk[-1])))
            pos += span
        return Problem(self.template.objective, self.template.dimension,
                       self.template.bounds, tuple(constraints), dict(meta or {}))


def encode(problem: Problem, coeff_lo: float = DEFAULT_COEFF_RANGE[0],
           coeff_hi: float = DEFAULT_COEFF_RANGE[1]) -> InstanceGenome:
    """Inverse of :meth:`InstanceGenome.decode` for template-conforming problems."""
    template = InstanceTemplate(
        problem.objective, problem.dimension,
        tuple(c.kind for c in problem.constraints),
        problem.bounds, coeff_lo, coeff_hi)
    genes = np.concatenate(
        [np.append(c.coeffs, c.offset) for c in problem.constraints]
    ) if problem.constraints else np.empty(0)
    return InstanceGenome(template, genes)


@dataclass(frozen=True)
class FitnessVector:
    """Median-FEN objectives with a min/max flag per entry."""

    values: np.ndarray
    orientation: tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.orientation),):
            raise ValueError("values and orientation lengths differ")
        if any(o not in ("min", "max") for o in self.orientation):
            raise ValueError("orientation entries must be 'min' or 'max'")


class Direction(Enum):
    HARDER = "harder"
    EASIER = "easier"


@dataclass(frozen=True)
class EvolverConfig:
    population_size: int = 40
    generations: int = 5000
    crossover_rate: float = 0.5
    scale_factor: float = 0.9
    repeats: int = 5
    seed: int | tuple = 0
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("evolver population must be at least 4 for DE donors")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")


def _solver_seeds(entropy, spawn_key: tuple[int, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy, spawn_key=spawn_key)


def _fitness_job(args):
    pdict, cfg, entropy, spawn_key, repeats = args
    problem = problem_from_dict(pdict)
    ss = _solver_seeds(entropy, spawn_key)
    fens = [solve(problem, cfg, child).fen for child in ss.spawn(repeats)]
    return float(np.median(fens))


def _run_jobs(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_fitness_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_fitness_job, jobs))


def fen_fitness(genome: InstanceGenome, solver: SolverConfig, repeats: int, seed) -> float:
    """Median FEN of ``repeats`` solver runs on the decoded instance."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return _fitness_job((problem_to_dict(genome.decode()), solver,
                         ss.entropy, ss.spawn_key, repeats))


def _sample_population(template: InstanceTemplate, size: int, rng) -> np.ndarray:
    lo, hi = template.gene_bounds()
    return rng.uniform(lo, hi, size=(size, lo.size))


def _de_trial(pool: np.ndarray, exclude: int, base: np.ndarray, cr: float, f: float,
              lo: np.ndarray, hi: np.ndarray, rng) -> np.ndarray:
    """DE/rand/1/bin gene proposal with box clamping."""
    count = pool.shape[0]
    picks = []
    while len(picks) < 3:
        r = int(rng.integers(0, count))
        if r != exclude and r not in picks:
            picks.append(r)
    r1, r2, r3 = picks
    mutant = pool[r1] + f * (pool[r2] - pool[r3])
    cross = rng.random(base.size) < cr
    cross[int(rng.integers(0, base.size))] = True
    trial = np.where(cross, mutant, base)
    return np.clip(trial, lo, hi)


def evolve_single(template: InstanceTemplate, target: SolverConfig,
                  direction: Direction, config: EvolverConfig
                  ) -> list[tuple[InstanceGenome, float]]:
    """DE over genomes, pushing one solver's median FEN up (harder) or down (easier).

    Returns the final population with its cached fitness, best first.
    """
    workers = resolve_workers(config.workers)
    root = np.random.SeedSequence(config.seed)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_GENE_STREAM,)))
    lo, hi = template.gene_bounds()
    harder = direction is Direction.HARDER

    pop = _sample_population(template, config.population_size, rng)
    genomes = [InstanceGenome(template, row) for row in pop]
    jobs = [(problem_to_dict(genomes[i].decode()), target, root.entropy,
             (_FITNESS_STREAM, 0, i), config.repeats)
            for i in range(config.population_size)]
    fitness = _run_jobs(jobs, workers)

    for gen in range(1, config.generations + 1):
        trials = [_de_trial(pop, i, pop[i], config.crossover_rate,
                            config.scale_factor, lo, hi, rng)
                  for i in range(config.population_size)]
        trial_genomes = [InstanceGenome(template, t) for t in trials]
        jobs = [(problem_to_dict(trial_genomes[i].decode()), target, root.entropy,
                 (_FITNESS_STREAM, gen, i), config.repeats)
                for i in range(config.population_size)]
        trial_fitness = _run_jobs(jobs, workers)
        for i in range(config.population_size):
            better = trial_fitness[i] >= fitness[i] if harder else trial_fitness[i] <= fitness[i]
            if better:
                pop[i] = trials[i]
                genomes[i] = trial_genomes[i]
                fitness[i] = trial_fitness[i]

    order = sorted(range(config.population_size),
                   key=lambda i: -fitness[i] if harder else fitness[i])
    return [(genomes[i], fitness[i]) for i in order]


# ---------------------------------------------------------------------------
# Pareto machinery
# ---------------------------------------------------------------------------

def dominates(u: FitnessVector, v: FitnessVector) -> bool:
    """True when u is nowhere worse than v and strictly better somewhere."""
    if u.orientation != v.orientation or u.values.shape != v.values.shape:
        raise ValueError("fitness vectors are not comparable")
    no_worse = True
    strictly = False
    for a, b, o in zip(u.values, v.values, u.orientation):
        if o == "max":
            a, b = -a, -b
        if a > b:
            no_worse = False
            break
        if a < b:
            strictly = True
    return no_worse and strictly


def nondominated_sort(population: list[FitnessVector]) -> list[list[int]]:
    """Partition indices into Pareto fronts, best front first."""
    if not population:
        raise ValueError("population must be nonempty")
    count = len(population)
    dominated_by = [0] * count
    dominating: list[list[int]] = [[] for _ in range(count)]
    for i in range(count):
        for j in range(i + 1, count):
            if dominates(population[i], population[j]):
                dominating[i].append(j)
                dominated_by[j] += 1
            elif dominates(population[j], population[i]):
                dominating[j].append(i)
                dominated_by[i] += 1
    fronts = [[i for i in range(count) if dominated_by[i] == 0]]
    while True:
        nxt = []
        for i in fronts[-1]:
            for j in dominating[i]:
                dominated_by[j] -= 1
                if dominated_by[j] == 0:
                    nxt.append(j)
        if not nxt:
            return fronts
        fronts.append(sorted(nxt))


def crowding_distance(front: list[FitnessVector]) -> np.ndarray:
    """Per-member crowding distance; boundary members get +inf.

    An objective with zero range across the front contributes nothing to
    interior members.
    """
    if not front:
        raise ValueError("front must be nonempty")
    count = len(front)
    dist = np.zeros(count)
    if count <= 2:
        dist[:] = np.inf
        return dist
    values = np.stack([fv.values for fv in front])
    for obj in range(values.shape[1]):
        order = np.argsort(values[:, obj], kind="stable")
        col = values[order, obj]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span == 0.0:
            continue
        for pos in range(1, count - 1):
            idx = order[pos]
            if not np.isinf(dist[idx]):
                dist[idx] += (col[pos + 1] - col[pos - 1]) / span
    return dist


def _truncate(entries: list[tuple[InstanceGenome, FitnessVector]], size: int
              ) -> list[tuple[InstanceGenome, FitnessVector]]:
    fronts = nondominated_sort([fv for _, fv in entries])
    kept: list[int] = []
    for front in fronts:
        if len(kept) + len(front) <= size:
            kept.extend(front)
            continue
        room = size - len(kept)
        if room > 0:
            dist = crowding_distance([entries[i][1] for i in front])
            ranked = sorted(range(len(front)), key=lambda p: (-dist[p], front[p]))
            kept.extend(front[p] for p in ranked[:room])
        break
    kept.sort()
    return [entries[i] for i in kept]


def evolve_multi(template: InstanceTemplate, target: SolverConfig,
                 others: list[SolverConfig], config: EvolverConfig
                 ) -> list[tuple[InstanceGenome, FitnessVector]]:
    """DEMO over genomes: maximize FEN(target), minimize FEN(each other solver).

    Candidates replace dominated parents immediately and join the population
    when incomparable; each generation ends with a non-dominated-sort plus
    crowding truncation back to the population size.  Returns the final first
    front.
    """
    if not others:
        raise ValueError("evolve_multi needs at least one competing solver")
    workers = resolve_workers(config.workers)
    solvers = [target] + list(others)
    orientation = ("max",) + ("min",) * len(others)
    root = np.random.SeedSequence(config.seed)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_GENE_STREAM,)))
    lo, hi = template.gene_bounds()

    def measure(genome: InstanceGenome, gen: int, slot: int) -> FitnessVector:
        pdict = problem_to_dict(genome.decode())
        jobs = [(pdict, cfg, root.entropy, (_FITNESS_STREAM, gen, slot, s), config.repeats)
                for s, cfg in enumerate(solvers)]
        return FitnessVector(np.array(_run_jobs(jobs, workers)), orientation)

    pop = _sample_population(template, config.population_size, rng)
    entries = [(InstanceGenome(template, row), None) for row in pop]
    entries = [(g, measure(g, 0, i)) for i, (g, _) in enumerate(entries)]

    for gen in range(1, config.generations + 1):
        for parent_idx in range(config.population_size):
            pool = np.stack([e[0].genes for e in entries])
            trial = _de_trial(pool, parent_idx, entries[parent_idx][0].genes,
                              config.crossover_rate, config.scale_factor, lo, hi, rng)
            candidate = InstanceGenome(template, trial)
            cand_fit = measure(candidate, gen, parent_idx)
            parent_fit = entries[parent_idx][1]
            if dominates(cand_fit, parent_fit):
                entries[parent_idx] = (candidate, cand_fit)
            elif not dominates(parent_fit, cand_fit):
                entries.append((candidate, cand_fit))
        if len(entries) > config.population_size:
            entries = _truncate(entries, config.population_size)

    first = nondominated_sort([fv for _, fv in entries])[0]
    return [entries[i] for i in first]


def select_discriminating(front: list[tuple[InstanceGenome, FitnessVector]]
                          ) -> InstanceGenome:
    """Front member with the largest FEN(target) - max FEN(others) gap.

    Ties break toward the larger target FEN, then the lowest index.
    """
    if not front:
        raise ValueError("front must be nonempty")
    best_idx = 0
    best_gap = -np.inf
    best_target = -np.inf
    for idx, (_, fv) in enumerate(front):
        target_positions = [i for i, o in enumerate(fv.orientation) if o == "max"]
        if len(target_positions) != 1:
            raise ValueError("front fitness must have exactly one maximized entry")
        tpos = target_positions[0]
        t_fen = fv.values[tpos]
        rest = np.delete(fv.values, tpos)
        gap = t_fen - rest.max() if rest.size else t_fen
        if gap > best_gap or (gap == best_gap and t_fen > best_target):
            best_idx, best_gap, best_target = idx, gap, t_fen
    return front[best_idx][0]


def validation_fens(genome: InstanceGenome, solvers: dict[str, SolverConfig],
                    repeats: int, seed, workers: int = 1) -> dict[str, float]:
    """Median FEN per solver over fresh validation seeds (disjoint from training)."""
    root = np.random.SeedSequence(seed)
    pdict = problem_to_dict(genome.decode())
    names = list(solvers)
    jobs = [(pdict, solvers[name], root.entropy, (_VALIDATION_STREAM, s), repeats)
            for s, name in enumerate(names)]
    medians = _run_jobs(jobs, resolve_workers(workers))
    return dict(zip(names, medians))

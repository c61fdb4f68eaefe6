"""Constraint features that explain why an instance is hard for a solver.

For each instance we extract: the spread of constraint coefficients, the
angles between linear constraint hyperplanes, each constraint boundary's
distance to the optimum (the origin after the internal shift), the fraction
of feasible space in a small box around the optimum, and the constraint
count.  Undefined values (no boundary, too few linear constraints) are
carried as NaN and serialized as empty CSV fields rather than dropped.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _evalcore
from .problems import Constraint, ConstraintKind, Problem


class UnsupportedKindError(ValueError):
    """Raised when an angle is requested for a non-linear constraint."""


class UndefinedAngleError(ValueError):
    """Raised when a coefficient vector has no direction (all zeros)."""


class NoBoundaryError(ValueError):
    """Raised when a constraint's boundary surface g(x) = 0 is empty."""


def coefficient_stddev(constraint: Constraint) -> tuple[float, float | None]:
    """Population standard deviation of the constraint's coefficients.

    Linear constraints yield (std of all coefficients, None); quadratic ones
    yield the std of the quadratic terms plus, separately, the std of the
    linear terms.
    """
    if constraint.kind is ConstraintKind.LINEAR:
        return float(np.std(constraint.coeffs)), None
    return (float(np.std(constraint.quadratic_terms())),
            float(np.std(constraint.linear_terms())))


def pairwise_angle(c1: Constraint, c2: Constraint) -> float:
    """Angle in degrees, in [0, 180], between two linear constraints' normals."""
    for c in (c1, c2):
        if c.kind is not ConstraintKind.LINEAR:
            raise UnsupportedKindError("angles are defined for linear constraints only")
    if c1.dimension != c2.dimension:
        raise ValueError("constraints have different dimensions")
    a1, a2 = c1.coeffs, c2.coeffs
    n1, n2 = np.linalg.norm(a1), np.linalg.norm(a2)
    if n1 == 0.0 or n2 == 0.0:
        raise UndefinedAngleError("zero coefficient vector has no direction")
    cosine = float(np.clip((a1 @ a2) / (n1 * n2), -1.0, 1.0))
    return math.degrees(math.acos(cosine))


def _quadratic_distance(q: np.ndarray, l: np.ndarray, b: float) -> float:
    """Distance from the origin to {x : b + sum(q x^2 + l x) = 0}.

    Stationary points of ||x||^2 on the surface satisfy, coordinate-wise,
    x_k = lam * l_k / (2 (1 - lam q_k)).  ||x(lam)|| grows with lam >= 0, so
    the projection is the first root of g(x(lam)) on the branch before the
    first pole; if g never reaches zero there, the remaining slack goes into
    the pole coordinate (which has no linear term when that happens).
    """
    if b == 0.0:
        return 0.0
    if b > 0.0:  # same zero set, puts the origin on the negative side
        q, l, b = -q, -l, -b

    def point(lam: float) -> np.ndarray:
        den = 1.0 - lam * q
        x = np.zeros_like(l)
        ok = den != 0.0
        x[ok] = lam * l[ok] / (2.0 * den[ok])
        return x

    def surface(lam: float) -> float:
        x = point(lam)
        return b + float(q @ (x * x) + l @ x)

    positive = q > 0.0
    lam_pole = float(np.min(1.0 / q[positive])) if np.any(positive) else np.inf

    if math.isinf(lam_pole):
        # No pole: if the surface value stays negative even at its global
        # maximum, the boundary is empty.
        free_growth = np.any((q == 0.0) & (l != 0.0))
        if not free_growth:
            with np.errstate(divide="ignore", invalid="ignore"):
                xbar = np.where(q < 0.0, -l / (2.0 * q), 0.0)
            peak = b + float(q @ (xbar * xbar) + l @ xbar)
            if peak < 0.0:
                raise NoBoundaryError("constraint boundary is empty")
            if peak == 0.0:
                return float(np.linalg.norm(xbar))
        grid = np.concatenate([[0.0], np.geomspace(1e-9, 1e12, 1200)])
    else:
        inner = lam_pole * (1.0 - np.geomspace(1.0, 1e-13, 1200))
        grid = np.concatenate([[0.0], inner])

    vals = np.array([surface(lam) for lam in grid])
    crossing = np.nonzero(vals >= 0.0)[0]
    if crossing.size:
        hit = int(crossing[0])
        if vals[hit] == 0.0:
            lam_star = grid[hit]
        else:
            lam_star = brentq(surface, grid[hit - 1], grid[hit], xtol=1e-14, rtol=1e-15)
        return float(np.linalg.norm(point(lam_star)))

    if math.isinf(lam_pole):
        raise NoBoundaryError("constraint boundary is empty")
    # Pole coordinates carry no linear term here; park the remaining slack
    # on the strongest quadratic coordinate.
    q_max = float(np.max(q))
    residual = -surface(lam_pole * (1.0 - 1e-13))
    x = point(lam_pole * (1.0 - 1e-13))
    return float(math.sqrt(x @ x + max(residual, 0.0) / q_max))


def shortest_distance(constraint: Constraint) -> float:
    """Euclidean distance from the origin to the constraint boundary g(x) = 0."""
    if constraint.kind is ConstraintKind.LINEAR:
        norm = float(np.linalg.norm(constraint.coeffs))
        if norm == 0.0:
            if constraint.offset == 0.0:
                return 0.0
            raise NoBoundaryError("constant constraint has no boundary")
        return abs(constraint.offset) / norm
    return _quadratic_distance(constraint.quadratic_terms(),
                               constraint.linear_terms(),
                               constraint.offset)


def feasibility_ratio(problem: Problem, radius_fraction: float = 0.05,
                      samples: int = 10_000, seed=0) -> float:
    """Fraction of feasible points in a box around the optimum.

    The sampling box spans ``radius_fraction`` of each coordinate's
    half-width on both sides of the origin, clipped to the problem bounds.
    """
    if not 0.0 < radius_fraction <= 1.0:
        raise ValueError("radius_fraction must lie in (0, 1]")
    if samples < 1:
        raise ValueError("samples must be positive")
    radius = radius_fraction * problem.bounds.width / 2.0
    lo = np.maximum(problem.bounds.lower, -radius)
    hi = np.minimum(problem.bounds.upper, radius)
    rng = np.random.default_rng(seed)
    Q, L, b = problem.packed
    return float(_evalcore.feasible_fraction(
        problem.objective.code, Q, L, b, lo, hi, samples, rng))


@dataclass(frozen=True)
class FeatureConfig:
    radius_fraction: float = 0.05
    samples: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class FeatureVector:
    """Per-instance constraint features; NaN marks undefined entries."""

    constraint_count: int
    primary_stddev: np.ndarray
    linear_term_stddev: np.ndarray
    pairwise_angles_deg: np.ndarray
    shortest_distances: np.ndarray
    feasibility_ratio: float


def feature_vector(problem: Problem, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Assemble all features; a missing boundary becomes a NaN distance."""
    count = len(problem.constraints)
    primary = np.empty(count)
    linear_term = np.full(count, np.nan)
    distances = np.empty(count)
    for j, c in enumerate(problem.constraints):
        primary[j], lin = coefficient_stddev(c)
        if lin is not None:
            linear_term[j] = lin
        try:
            distances[j] = shortest_distance(c)
        except NoBoundaryError:
            distances[j] = np.nan

    all_linear = count > 0 and all(
        c.kind is ConstraintKind.LINEAR for c in problem.constraints)
    if all_linear:
        angles = np.full((count, count), np.nan)
        for i in range(count):
            for j in range(i + 1, count):
                try:
                    angles[i, j] = pairwise_angle(problem.constraints[i],
                                                  problem.constraints[j])
                except UndefinedAngleError:
                    pass
    else:
        angles = np.empty((0, 0))

    ratio = feasibility_ratio(problem, config.radius_fraction, config.samples, config.seed)
    return FeatureVector(count, primary, linear_term, angles, distances, ratio)


def upper_triangle_angles(fv: FeatureVector) -> np.ndarray:
    """Defined pairwise angles as a flat vector (empty when not applicable)."""
    if fv.pairwise_angles_deg.size == 0:
        return np.empty(0)
    iu = np.triu_indices(fv.pairwise_angles_deg.shape[0], k=1)
    vals = fv.pairwise_angles_deg[iu]
    return vals[~np.isnan(vals)]


REPORT_COLUMNS = [
    "instance_id", "objective", "kind", "n_constraints",
    "stddev_mean", "stddev_min", "stddev_max",
    "angle_mean", "angle_min", "distance_mean", "distance_min",
    "feasibility_ratio", "radius_fraction", "samples", "seed",
]


def _agg(values: np.ndarray, fn) -> float | None:
    vals = values[~np.isnan(values)] if values.size else values
    return float(fn(vals)) if vals.size else None


def instance_kind(problem: Problem) -> str:
    kinds = {c.kind for c in problem.constraints}
    if kinds == {ConstraintKind.LINEAR}:
        return "linear"
    if kinds == {ConstraintKind.QUADRATIC}:
        return "quadratic"
    return "mixed" if kinds else "none"


def feature_row(instance_id: str, problem: Problem,
                config: FeatureConfig = FeatureConfig()) -> dict:
    """One report row per instance, matching :data:`REPORT_COLUMNS`."""
    fv = feature_vector(problem, config)
    angles = upper_triangle_angles(fv)
    return {
        "instance_id": instance_id,
        "objective": problem.objective.value,
        "kind": instance_kind(problem),
        "n_constraints": fv.constraint_count,
        "stddev_mean": _agg(fv.primary_stddev, np.mean),
        "stddev_min": _agg(fv.primary_stddev, np.min),
        "stddev_max": _agg(fv.primary_stddev, np.max),
        "angle_mean": _agg(angles, np.mean),
        "angle_min": _agg(angles, np.min),
        "distance_mean": _agg(fv.shortest_distances, np.mean),
        "distance_min": _agg(fv.shortest_distances, np.min),
        "feasibility_ratio": fv.feasibility_ratio,
        "radius_fraction": config.radius_fraction,
        "samples": config.samples,
        "seed": config.seed,
    }


def write_feature_report(rows: list[dict], path: str | os.PathLike) -> None:
    """Write feature rows as CSV; None values serialize as empty fields."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k))
                             for k in REPORT_COLUMNS})
    os.replace(tmp, path)

"""Experiment driver: evolution pipelines, cross-evaluation, and reporting.

Every mode is driven by one spec (config file plus overrides plus a master
seed) and writes its outputs atomically, so re-running a mode with the same
seed reproduces the output tree byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .evolve import (
    Direction,
    EvolverConfig,
    InstanceTemplate,
    evolve_multi,
    evolve_single,
    select_discriminating,
    validation_fens,
)
from .features import FeatureConfig, REPORT_COLUMNS, feature_row, write_feature_report
from .presets import Preset, get_preset
from .problems import (
    ConstraintKind,
    Objective,
    Problem,
    load_problem,
    save_problem,
)
from .solvers import SolverConfig, SolverKind, solve


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 1."""


class DataError(Exception):
    """Missing or malformed input data; maps to exit code 2."""


MODES = ("solve", "evolve-single", "evolve-multi", "cross-eval", "features", "report")


@dataclass
class ExperimentSpec:
    mode: str
    seed: int | None = None
    preset: str = "desk"
    output_dir: str = "runs/out"
    dimension: int | None = None
    objectives: list[str] = field(default_factory=lambda: ["sphere", "ackley", "rosenbrock"])
    kinds: list[str] = field(default_factory=lambda: ["linear", "quadratic"])
    counts: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    targets: list[str] = field(default_factory=lambda: ["de", "es", "pso"])
    directions: list[str] = field(default_factory=lambda: ["harder", "easier"])
    top_k: int = 1
    instances: list[str] = field(default_factory=list)
    solver: str = "de"
    sets: dict[str, list[str]] = field(default_factory=dict)
    repeats: int = 3
    validation_repeats: int | None = None
    figures: bool = True
    results_dir: str | None = None
    workers: int = 0
    radius_fraction: float = 0.05
    samples: int = 10_000
    solvers: dict[str, dict] = field(default_factory=dict)
    evolver: dict = field(default_factory=dict)

    def preset_obj(self) -> Preset:
        return get_preset(self.preset)


def build_spec(mode: str, config: dict[str, Any], seed: int | None) -> ExperimentSpec:
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}")
    known = {f.name for f in ExperimentSpec.__dataclass_fields__.values()}
    unknown = set(config) - known - {"mode", "seed"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    try:
        spec = ExperimentSpec(mode=mode, seed=seed,
                              **{k: v for k, v in config.items() if k in known and k not in ("mode", "seed")})
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    if mode != "report" and spec.seed is None:
        raise UsageError(f"mode {mode!r} requires --seed")
    if mode in ("solve", "features") and not spec.instances:
        raise UsageError(f"mode {mode!r} needs an 'instances' list in the config")
    if mode == "cross-eval" and not spec.sets:
        raise UsageError("cross-eval needs a 'sets' mapping in the config")
    if mode == "report" and not spec.results_dir:
        raise UsageError("report needs 'results_dir' in the config")
    _validate_grid(spec)
    try:
        spec.preset_obj()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return spec


def _validate_grid(spec: ExperimentSpec) -> None:
    checks = [
        ("objectives", spec.objectives, {o.value for o in Objective}),
        ("kinds", spec.kinds, {k.value for k in ConstraintKind}),
        ("targets", spec.targets, {s.value for s in SolverKind}),
        ("directions", spec.directions, {"harder", "easier"}),
        ("instances", spec.instances, None),
    ]
    for name, values, allowed in checks:
        if isinstance(values, str) or not isinstance(values, (list, tuple)):
            raise UsageError(f"{name!r} must be a JSON list")
        if allowed is not None:
            bad = [v for v in values if v not in allowed]
            if bad:
                raise UsageError(f"invalid {name} entries {bad}; allowed: {sorted(allowed)}")
    if not isinstance(spec.counts, (list, tuple)) or not all(
            isinstance(c, int) and c >= 0 for c in spec.counts):
        raise UsageError("'counts' must be a list of non-negative integers")


def solver_table(spec: ExperimentSpec) -> dict[str, SolverConfig]:
    """Preset solver configs with per-solver field overrides applied."""
    preset = spec.preset_obj()
    table = {}
    for kind in SolverKind:
        overrides = dict(spec.solvers.get(kind.value, {}))
        try:
            table[kind.value] = preset.solver(kind, **overrides)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad solver override for {kind.value}: {exc}") from exc
    return table


def _evolver_config(spec: ExperimentSpec, seed) -> EvolverConfig:
    try:
        return spec.preset_obj().evolver(seed, workers=spec.workers, **spec.evolver)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad evolver override: {exc}") from exc


def _template(spec: ExperimentSpec, objective: str, kind: str, count: int) -> InstanceTemplate:
    try:
        return spec.preset_obj().template(Objective(objective), ConstraintKind(kind),
                                          count, spec.dimension)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _feature_seed(master: int, *key: int) -> int:
    return int(np.random.SeedSequence((master, *key)).generate_state(1)[0])


def _write_json(payload: Any, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _write_csv(rows: list[dict], columns: list[str], path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: ("" if row.get(c) is None else row.get(c)) for c in columns})
    os.replace(tmp, path)


def _load_instances(paths: list[str]) -> list[tuple[str, Problem]]:
    out = []
    for p in paths:
        path = Path(p)
        if not path.exists():
            raise DataError(f"instance file not found: {p}")
        try:
            out.append((path.stem, load_problem(path)))
        except (ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot parse instance {p}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def run_solve(spec: ExperimentSpec) -> list[dict]:
    solvers = solver_table(spec)
    if spec.solver not in solvers:
        raise UsageError(f"unknown solver {spec.solver!r}")
    cfg = solvers[spec.solver]
    results = []
    for idx, (name, problem) in enumerate(_load_instances(spec.instances)):
        out = solve(problem, cfg, np.random.SeedSequence((spec.seed, idx)))
        results.append({
            "instance": name,
            "solver": spec.solver,
            "seed": spec.seed,
            "fen": out.fen,
            "solved": out.solved,
            "best_f": out.best_f,
            "best_violation": out.best_violation,
            "best_x": out.best_x.tolist(),
        })
    return results


# ---------------------------------------------------------------------------
# evolution pipelines
# ---------------------------------------------------------------------------

def _instance_meta(spec: ExperimentSpec, cell: str, target: str, hardness: str,
                   evolver_seed) -> dict:
    return {
        "generator": spec.mode,
        "preset": spec.preset,
        "cell": cell,
        "target_solver": target,
        "hardness": hardness,
        "evolver_seed": list(evolver_seed) if isinstance(evolver_seed, tuple) else evolver_seed,
        "master_seed": spec.seed,
    }


def _grid(spec: ExperimentSpec):
    idx = 0
    for objective in spec.objectives:
        for kind in spec.kinds:
            for count in spec.counts:
                for target in spec.targets:
                    yield idx, objective, kind, count, target
                    idx += 1


def run_hardness_pipeline(spec: ExperimentSpec) -> dict:
    """Evolve one discriminating instance per grid cell (evolve-multi mode)."""
    solvers = solver_table(spec)
    out_dir = Path(spec.output_dir)
    inst_dir = out_dir / "instances"
    inst_dir.mkdir(parents=True, exist_ok=True)
    validation_repeats = spec.validation_repeats or spec.preset_obj().validation_repeats

    entries = []
    feature_rows = []
    for idx, objective, kind, count, target in _grid(spec):
        cell = f"{objective}-{kind}-{count}c-{target}"
        entry = {"cell": cell, "objective": objective, "kind": kind,
                 "count": count, "target": target, "status": "ok",
                 "instance": None, "validation": None, "error": None}
        try:
            template = _template(spec, objective, kind, count)
            config = _evolver_config(spec, seed=(spec.seed, idx))
            others = [cfg for name, cfg in solvers.items() if name != target]
            front = evolve_multi(template, solvers[target], others, config)
            chosen = select_discriminating(front)
            val = validation_fens(chosen, solvers, validation_repeats,
                                  seed=(spec.seed, idx, 1), workers=spec.workers)
            meta = _instance_meta(spec, cell, target, "hard-for-target", (spec.seed, idx))
            problem = chosen.decode(meta)
            path = inst_dir / f"{cell}.json"
            save_problem(problem, path)
            fc = FeatureConfig(spec.radius_fraction, spec.samples,
                               _feature_seed(spec.seed, idx, 2))
            feature_rows.append(feature_row(cell, problem, fc))
            entry["instance"] = str(path.relative_to(out_dir))
            entry["validation"] = {k: float(v) for k, v in val.items()}
        except Exception as exc:  # keep the pipeline going, record the failure
            entry["status"] = "failed"
            entry["error"] = f"{type(exc).__name__}: {exc}"
        entries.append(entry)

    write_feature_report(feature_rows, out_dir / "features.csv")
    manifest = _manifest_payload(spec, entries)
    _write_json(manifest, out_dir / "manifest.json")
    return manifest


def run_single_evolution(spec: ExperimentSpec) -> dict:
    """Evolve hard and easy instances per cell with the single-objective engine."""
    solvers = solver_table(spec)
    out_dir = Path(spec.output_dir)
    inst_dir = out_dir / "instances"
    inst_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    feature_rows = []
    for idx, objective, kind, count, target in _grid(spec):
        for d_idx, direction in enumerate(spec.directions):
            cell = f"{objective}-{kind}-{count}c-{target}-{direction}"
            entry = {"cell": cell, "objective": objective, "kind": kind,
                     "count": count, "target": target, "direction": direction,
                     "status": "ok", "instances": [], "fitness": [], "error": None}
            try:
                template = _template(spec, objective, kind, count)
                config = _evolver_config(spec, seed=(spec.seed, idx, d_idx))
                ranked = evolve_single(template, solvers[target],
                                       Direction(direction), config)
                hardness = "single-objective-hard" if direction == "harder" else "easy"
                for rank, (genome, fitness) in enumerate(ranked[:spec.top_k]):
                    meta = _instance_meta(spec, cell, target, hardness,
                                          (spec.seed, idx, d_idx))
                    meta["fitness_median_fen"] = fitness
                    problem = genome.decode(meta)
                    name = f"{cell}-r{rank}"
                    path = inst_dir / f"{name}.json"
                    save_problem(problem, path)
                    fc = FeatureConfig(spec.radius_fraction, spec.samples,
                                       _feature_seed(spec.seed, idx, d_idx, rank))
                    feature_rows.append(feature_row(name, problem, fc))
                    entry["instances"].append(str(path.relative_to(out_dir)))
                    entry["fitness"].append(fitness)
            except Exception as exc:
                entry["status"] = "failed"
                entry["error"] = f"{type(exc).__name__}: {exc}"
            entries.append(entry)

    write_feature_report(feature_rows, out_dir / "features.csv")
    manifest = _manifest_payload(spec, entries)
    _write_json(manifest, out_dir / "manifest.json")
    return manifest


def _manifest_payload(spec: ExperimentSpec, entries: list[dict]) -> dict:
    return {
        "mode": spec.mode,
        "preset": spec.preset,
        "master_seed": spec.seed,
        "settings": {
            "radius_fraction": spec.radius_fraction,
            "samples": spec.samples,
            "validation_repeats": spec.validation_repeats,
            "evolver_overrides": spec.evolver,
            "solver_overrides": spec.solvers,
            "dimension": spec.dimension,
        },
        "entries": entries,
    }


# ---------------------------------------------------------------------------
# cross evaluation
# ---------------------------------------------------------------------------

CROSS_EVAL_COLUMNS = ["set", "solver", "median_fen", "success_rate", "runs", "status", "error"]


def run_cross_eval(instance_sets: dict[str, list[Problem]],
                   solvers: dict[str, SolverConfig],
                   repeats: int, seed) -> list[dict]:
    """Median FEN and success rate per (instance set, solver) cell.

    A failing cell is recorded with status "failed" instead of aborting the
    table.
    """
    if not instance_sets or not solvers:
        raise ValueError("need at least one instance set and one solver")
    rows = []
    for set_idx, (label, problems) in enumerate(instance_sets.items()):
        for solver_idx, (name, cfg) in enumerate(solvers.items()):
            row = {"set": label, "solver": name, "median_fen": None,
                   "success_rate": None, "runs": 0, "status": "ok", "error": None}
            try:
                ss = np.random.SeedSequence((seed, set_idx, solver_idx))
                children = ss.spawn(len(problems) * repeats)
                fens, solved = [], []
                for p_idx, problem in enumerate(problems):
                    for r in range(repeats):
                        out = solve(problem, cfg, children[p_idx * repeats + r])
                        fens.append(out.fen)
                        solved.append(out.solved)
                row["median_fen"] = float(np.median(fens))
                row["success_rate"] = float(np.mean(solved))
                row["runs"] = len(fens)
            except Exception as exc:
                row["status"] = "failed"
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows


def run_cross_eval_mode(spec: ExperimentSpec) -> list[dict]:
    sets = {}
    for label, paths in spec.sets.items():
        sets[label] = [problem for _, problem in _load_instances(paths)]
    rows = run_cross_eval(sets, solver_table(spec), spec.repeats, spec.seed)
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(rows, CROSS_EVAL_COLUMNS, out_dir / "cross_eval.csv")
    return rows


# ---------------------------------------------------------------------------
# features mode
# ---------------------------------------------------------------------------

def run_features(spec: ExperimentSpec) -> list[dict]:
    rows = []
    for idx, (name, problem) in enumerate(_load_instances(spec.instances)):
        fc = FeatureConfig(spec.radius_fraction, spec.samples,
                           _feature_seed(spec.seed, idx))
        rows.append(feature_row(name, problem, fc))
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_feature_report(rows, out_dir / "features.csv")
    return rows


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

LONG_COLUMNS = ["group", "target_solver", "n_constraints", "value"]


def emit_report(results_dir: str | os.PathLike, out_dir: str | os.PathLike | None = None,
                figures: bool = True) -> dict:
    """Build long-format feature CSVs, summary tables, and box-plot figures.

    Reads the manifest written by an evolution mode; an empty manifest yields
    headers-only CSVs.
    """
    results = Path(results_dir)
    manifest_path = results / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest found at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest: {exc}") from exc

    out = Path(out_dir) if out_dir is not None else results / "report"
    out.mkdir(parents=True, exist_ok=True)

    from .features import feature_vector, instance_kind, upper_triangle_angles

    stddev_rows, distance_rows, angle_rows, ratio_rows = [], [], [], []
    ratio_by_cell: dict[tuple[str, int], list[float]] = {}
    angle_by_pair: dict[tuple[str, str], list[float]] = {}
    kinds_present: set[str] = set()
    settings = manifest.get("settings", {})
    fc_base = FeatureConfig(settings.get("radius_fraction", 0.05),
                            settings.get("samples", 10_000), 0)

    for entry in manifest.get("entries", []):
        if entry.get("status") != "ok":
            continue
        paths = entry.get("instances") or ([entry["instance"]] if entry.get("instance") else [])
        for rel in paths:
            problem = load_problem(results / rel)
            target = entry.get("target", "")
            count = int(entry.get("count", len(problem.constraints)))
            group = f"{entry.get('objective', problem.objective.value)}/{entry.get('kind', instance_kind(problem))}"
            kinds_present.add(entry.get("kind", instance_kind(problem)))
            seed = problem.meta.get("master_seed") or 0
            fv = feature_vector(problem, FeatureConfig(fc_base.radius_fraction,
                                                       fc_base.samples, seed))
            for v in fv.primary_stddev:
                stddev_rows.append({"group": group, "target_solver": target,
                                    "n_constraints": count, "value": float(v)})
            for v in fv.shortest_distances:
                distance_rows.append({"group": group, "target_solver": target,
                                      "n_constraints": count,
                                      "value": None if np.isnan(v) else float(v)})
            m = fv.pairwise_angles_deg.shape[0]
            for i in range(m):
                for j in range(i + 1, m):
                    v = fv.pairwise_angles_deg[i, j]
                    angle_rows.append({"group": group, "target_solver": target,
                                       "n_constraints": count,
                                       "value": None if np.isnan(v) else float(v)})
                    if not np.isnan(v):
                        angle_by_pair.setdefault((target, f"cons {i + 1},{j + 1}"), []).append(float(v))
            ratio_rows.append({"group": group, "target_solver": target,
                               "n_constraints": count, "value": fv.feasibility_ratio})
            ratio_by_cell.setdefault((target, count), []).append(fv.feasibility_ratio)

    _write_csv(stddev_rows, LONG_COLUMNS, out / "stddev_long.csv")
    _write_csv(distance_rows, LONG_COLUMNS, out / "distance_long.csv")
    _write_csv(angle_rows, LONG_COLUMNS, out / "angle_long.csv")
    _write_csv(ratio_rows, LONG_COLUMNS, out / "feasibility_long.csv")

    targets = sorted({t for t, _ in ratio_by_cell} | {t for t, _ in angle_by_pair})
    counts = sorted({c for _, c in ratio_by_cell})
    ratio_table = []
    for target in targets:
        row = {"target_solver": target}
        for c in counts:
            vals = ratio_by_cell.get((target, c))
            row[f"{c} cons"] = None if not vals else round(float(np.mean(vals)), 4)
        ratio_table.append(row)
    _write_csv(ratio_table, ["target_solver"] + [f"{c} cons" for c in counts],
               out / "feasibility_summary.csv")

    pairs = sorted({p for _, p in angle_by_pair})
    angle_table = []
    for target in targets:
        row = {"target_solver": target}
        for pair in pairs:
            vals = angle_by_pair.get((target, pair))
            row[pair] = None if not vals else round(float(np.mean(vals)), 2)
        angle_table.append(row)
    _write_csv(angle_table, ["target_solver"] + pairs, out / "angle_summary.csv")

    figure_paths = []
    if figures:
        from .plots import render_feature_boxplots
        figure_paths = render_feature_boxplots(
            {"stddev": stddev_rows, "distance": distance_rows}, out)

    return {
        "report_dir": str(out),
        "rows": {"stddev": len(stddev_rows), "distance": len(distance_rows),
                 "angle": len(angle_rows), "feasibility": len(ratio_rows)},
        "figures": [str(p) for p in figure_paths],
    }


def run_mode(spec: ExperimentSpec) -> Any:
    if spec.mode == "solve":
        return run_solve(spec)
    if spec.mode == "evolve-single":
        return run_single_evolution(spec)
    if spec.mode == "evolve-multi":
        return run_hardness_pipeline(spec)
    if spec.mode == "cross-eval":
        return run_cross_eval_mode(spec)
    if spec.mode == "features":
        return run_features(spec)
    if spec.mode == "report":
        return emit_report(spec.results_dir, spec.output_dir if spec.output_dir != "runs/out" else None,
                           spec.figures)
    raise UsageError(f"unknown mode {spec.mode!r}")

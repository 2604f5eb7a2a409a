"""Batch experiment runner: instances x algorithms x niche widths x seeds.

Outputs under the chosen directory:

* ``runs/<cell>/<rep>.json``   one record per run (deterministic content)
* ``maps/<cell>/<rep>.csv``    final archive snapshot (archive algorithms)
* ``trajectories/<cell>.csv``  aligned per-seed trajectories + mean/sd columns
* ``stats.csv``                per-cell success ratio and mean evaluations
* ``timings.txt``              wall-clock measurements (the one artifact that
                               is *not* reproducible byte-for-byte; everything
                               in JSON/CSV is, given config and base seed)
* ``manifest.json``            config hash, instance digests, cell inventory

Seeds are ``base_seed + repetition_index``, shared across cells so that runs
with equal rep index form matched pairs. Runs are resumable: existing run
files are reused unless ``force`` is set, and every file is written via a
temp-file rename.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .archive import MODE_LITERAL, MODE_STRICT, MapSnapshot
from .baselines import BaselineConfig, run_mu_plus_one_ea, run_one_plus_one_ea
from .core import Instance, Solution
from .instances import GeneratorSpec, generate, instance_sha256, parse_instance, write_instance
from .oracles import dp_by_weight
from .qd import RunResult, TerminationCriteria, run_profit_map_elites, run_weight_map_elites

ALGO_WEIGHT_QD = "weight-qd"
ALGO_PROFIT_QD = "profit-qd"
ALGO_ONE_PLUS_ONE = "one-plus-one"
ALGO_MU_PLUS_ONE = "mu-plus-one"
ALGORITHMS = (ALGO_WEIGHT_QD, ALGO_PROFIT_QD, ALGO_ONE_PLUS_ONE, ALGO_MU_PLUS_ONE)

_QD_ALGOS = (ALGO_WEIGHT_QD, ALGO_PROFIT_QD)

RUN_SCHEMA = "knapelites-run-v1"
CLOCK_NAME = "process_cpu"


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid definition plus the shared termination rule.

    The default termination follows the ratio-table protocol: stop at the
    instance optimum (from the weight-indexed DP), with an evaluation cap of
    C*n^2 and a CPU-time cap of 7200 s. ``max_evaluations`` overrides the
    C*n^2 cap; ``no_eval_cap`` removes it.
    """

    instances: tuple[Union[str, GeneratorSpec], ...]
    algorithms: tuple[str, ...]
    gammas: tuple[Fraction, ...] = (Fraction(1),)
    repetitions: int = 30
    mode: str = MODE_STRICT
    base_seed: int = 0
    mu: int = 50
    target_opt: bool = True
    target_profit: Optional[int] = None
    max_evaluations: Optional[int] = None
    no_eval_cap: bool = False
    max_wall_clock: Optional[float] = 7200.0
    write_maps: bool = True

    def __post_init__(self):
        if not self.instances:
            raise ValueError("experiment needs at least one instance")
        if not self.algorithms:
            raise ValueError("experiment needs at least one algorithm")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r} (choose from {ALGORITHMS})")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.mode not in (MODE_STRICT, MODE_LITERAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        for g in self.gammas:
            if Fraction(g) <= 0:
                raise ValueError("gamma values must be positive")

    def canonical_dict(self) -> dict:
        return {
            "instances": [
                s if isinstance(s, str) else {
                    "class": s.klass, "n": s.n, "r": s.coefficient_range,
                    "capacity": s.capacity, "capacity_fraction": s.capacity_fraction,
                    "seed": s.seed,
                }
                for s in self.instances
            ],
            "algorithms": list(self.algorithms),
            "gammas": [f"{Fraction(g).numerator}/{Fraction(g).denominator}" for g in self.gammas],
            "repetitions": self.repetitions,
            "mode": self.mode,
            "base_seed": self.base_seed,
            "mu": self.mu,
            "target_opt": self.target_opt,
            "target_profit": self.target_profit,
            "max_evaluations": self.max_evaluations,
            "no_eval_cap": self.no_eval_cap,
            "max_wall_clock": self.max_wall_clock,
            "write_maps": self.write_maps,
        }


@dataclass(frozen=True)
class RunRecord:
    seed: int
    best_profit: int
    evaluations_used: int
    hit_target: bool
    success: Optional[bool]


@dataclass(frozen=True)
class RunStats:
    """Aggregates over the repetitions of one experiment cell."""

    cell: str
    instance: str
    algorithm: str
    gamma: Fraction
    mode: str
    opt_profit: Optional[int]
    repetitions: int
    success_ratio: Optional[float]
    mean_evaluations: float
    mean_wall_seconds: Optional[float]
    runs: tuple[RunRecord, ...] = field(repr=False)


def _fmt_gamma(g: Fraction) -> str:
    g = Fraction(g)
    return f"{g.numerator}/{g.denominator}"


def _sanitize(name: str) -> str:
    return "".join(c if (c.isalnum() or c in "._-") else "-" for c in name)


def cell_key(instance_name: str, algorithm: str, gamma: Fraction, mode: str) -> str:
    g = Fraction(gamma)
    return f"{_sanitize(instance_name)}__{algorithm}__g{g.numerator}-{g.denominator}__{mode}"


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def resolve_instances(
    sources: Sequence[Union[str, GeneratorSpec]],
) -> list[tuple[str, Instance, Optional[str]]]:
    """(name, instance, source path) per source; generator specs are drawn."""
    out = []
    for src in sources:
        if isinstance(src, GeneratorSpec):
            inst = generate(src)
            name = f"gen-{src.klass}-n{src.n}-s{src.seed}"
            out.append((name, inst, None))
        else:
            inst = parse_instance(Path(src).read_text())
            out.append((Path(src).stem, inst, str(src)))
    return out


def build_termination(config: ExperimentConfig, instance: Instance, opt: Optional[int]) -> TerminationCriteria:
    if config.no_eval_cap:
        cap = None
    elif config.max_evaluations is not None:
        cap = config.max_evaluations
    else:
        cap = instance.capacity * instance.n * instance.n
    target = config.target_profit
    if target is None and config.target_opt:
        target = opt
    return TerminationCriteria(
        max_evaluations=cap, target_profit=target, max_wall_clock=config.max_wall_clock
    )


def execute_run(
    instance: Instance,
    algorithm: str,
    gamma: Fraction,
    mode: str,
    term: TerminationCriteria,
    seed: int,
    mu: int = 50,
) -> tuple[RunResult, float]:
    """One seeded run; returns the result and its CPU-clock duration."""
    t0 = time.process_time()
    if algorithm == ALGO_WEIGHT_QD:
        result = run_weight_map_elites(instance, gamma, term, seed, mode)
    elif algorithm == ALGO_PROFIT_QD:
        result = run_profit_map_elites(instance, gamma, term, seed, mode)
    elif algorithm == ALGO_ONE_PLUS_ONE:
        result = run_one_plus_one_ea(instance, term, seed)
    elif algorithm == ALGO_MU_PLUS_ONE:
        result = run_mu_plus_one_ea(instance, BaselineConfig(mu=mu), term, seed)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return result, time.process_time() - t0


def run_record_dict(
    result: RunResult,
    instance: Instance,
    instance_name: str,
    algorithm: str,
    gamma: Fraction,
    mode: str,
    seed: int,
    term: TerminationCriteria,
    opt: Optional[int],
    map_csv: Optional[str],
) -> dict:
    return {
        "schema": RUN_SCHEMA,
        "instance": {
            "name": instance_name,
            "sha256": instance_sha256(instance),
            "n": instance.n,
            "capacity": instance.capacity,
            "total_profit": instance.total_profit,
        },
        "algorithm": algorithm,
        "gamma": _fmt_gamma(gamma),
        "mode": mode,
        "seed": seed,
        "termination": {
            "max_evaluations": term.max_evaluations,
            "target_profit": term.target_profit,
            "max_wall_clock": term.max_wall_clock,
        },
        "best_profit": result.best_profit,
        "best_solution": result.best_solution.to_string(),
        "evaluations_used": result.evaluations_used,
        "hit_target": result.hit_target,
        "trajectory": [list(t) for t in result.trajectory],
        "map_csv": map_csv,
        "opt_profit": opt,
        "success": (result.best_profit == opt) if opt is not None else None,
    }


def _worker_run(payload: dict) -> dict:
    instance = parse_instance(payload["instance_text"])
    term = TerminationCriteria(**payload["term"])
    gamma = Fraction(payload["gamma"])
    result, seconds = execute_run(
        instance, payload["algorithm"], gamma, payload["mode"], term, payload["seed"], payload["mu"]
    )
    record = run_record_dict(
        result, instance, payload["instance_name"], payload["algorithm"], gamma,
        payload["mode"], payload["seed"], term, payload["opt"], payload["map_rel"],
    )
    map_csv = None
    if payload["map_rel"] is not None and result.final_snapshot is not None:
        map_csv = result.final_snapshot.to_csv()
    return {"key": payload["key"], "record": record, "map_csv": map_csv, "seconds": seconds}


def export_map_csv(result: RunResult, path: Union[str, Path]) -> Path:
    """Write the run's final archive snapshot; baselines have none."""
    if result.final_snapshot is None:
        raise ValueError("run has no archive snapshot (baseline algorithms keep no map)")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, result.final_snapshot.to_csv())
    return path


def trajectory_table(trajectories: Sequence[Sequence[tuple[int, int, int]]]) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Align step-sampled trajectories on the union grid of sample points.

    Returns (grid, pop_matrix, best_matrix) with one row per grid point and
    one column per run; runs carry their last sampled value forward.
    """
    grid = sorted({int(e) for t in trajectories for (e, _, _) in t})
    pops = np.zeros((len(grid), len(trajectories)), dtype=np.int64)
    bests = np.zeros((len(grid), len(trajectories)), dtype=np.int64)
    for j, t in enumerate(trajectories):
        evs = [e for (e, _, _) in t]
        k = 0
        for i, g in enumerate(grid):
            while k + 1 < len(evs) and evs[k + 1] <= g:
                k += 1
            pops[i, j] = t[k][1]
            bests[i, j] = t[k][2]
    return grid, pops, bests


def trajectory_csv(
    trajectories: Sequence[Sequence[tuple[int, int, int]]],
    cell: str,
    seeds: Sequence[int],
) -> str:
    grid, pops, bests = trajectory_table(trajectories)
    reps = len(trajectories)
    cols = (
        [f"pop_s{seed}" for seed in seeds]
        + ["pop_mean", "pop_sd"]
        + [f"best_s{seed}" for seed in seeds]
        + ["best_mean", "best_sd"]
    )
    lines = [f"# knapelites-trajectory cell={cell} reps={reps}", "evals," + ",".join(cols)]
    pop_mean = pops.mean(axis=1)
    pop_sd = pops.std(axis=1)
    best_mean = bests.mean(axis=1)
    best_sd = bests.std(axis=1)
    for i, g in enumerate(grid):
        row = [str(g)]
        row += [str(int(x)) for x in pops[i]]
        row += [repr(float(pop_mean[i])), repr(float(pop_sd[i]))]
        row += [str(int(x)) for x in bests[i]]
        row += [repr(float(best_mean[i])), repr(float(best_sd[i]))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def export_trajectory_csv(
    results: Sequence[RunResult], cell: str, seeds: Sequence[int], path: Union[str, Path]
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, trajectory_csv([r.trajectory for r in results], cell, seeds))
    return path


def stats_from_records(
    cell: str,
    instance_name: str,
    algorithm: str,
    gamma: Fraction,
    mode: str,
    opt: Optional[int],
    records: Sequence[dict],
    seconds: Sequence[Optional[float]],
) -> RunStats:
    runs = tuple(
        RunRecord(
            seed=r["seed"],
            best_profit=r["best_profit"],
            evaluations_used=r["evaluations_used"],
            hit_target=r["hit_target"],
            success=r["success"],
        )
        for r in records
    )
    n = len(runs)
    ratio = None
    if opt is not None:
        ratio = 100.0 * sum(1 for r in runs if r.success) / n
    known = [s for s in seconds if s is not None]
    return RunStats(
        cell=cell,
        instance=instance_name,
        algorithm=algorithm,
        gamma=Fraction(gamma),
        mode=mode,
        opt_profit=opt,
        repetitions=n,
        success_ratio=ratio,
        mean_evaluations=float(np.mean([r.evaluations_used for r in runs])),
        mean_wall_seconds=(float(np.mean(known)) if len(known) == n else None),
        runs=runs,
    )


def stats_csv(stats: Sequence[RunStats]) -> str:
    lines = ["instance,algorithm,gamma,mode,reps,opt,success_ratio,mean_evaluations"]
    for s in stats:
        ratio = "" if s.success_ratio is None else repr(s.success_ratio)
        opt = "" if s.opt_profit is None else str(s.opt_profit)
        lines.append(
            f"{s.instance},{s.algorithm},{_fmt_gamma(s.gamma)},{s.mode},"
            f"{s.repetitions},{opt},{ratio},{repr(s.mean_evaluations)}"
        )
    return "\n".join(lines) + "\n"


def run_experiment(
    config: ExperimentConfig,
    out_dir: Union[str, Path],
    workers: int = 1,
    force: bool = False,
) -> list[RunStats]:
    """Execute the full grid; resumable, deterministic given config and seed."""
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "trajectories").mkdir(exist_ok=True)
    if config.write_maps:
        (out / "maps").mkdir(exist_ok=True)

    resolved = resolve_instances(config.instances)
    opts: dict[str, Optional[int]] = {}
    skipped: list[dict] = []
    for name, inst, _src in resolved:
        try:
            opts[name] = dp_by_weight(inst).opt_profit
        except MemoryError as err:
            opts[name] = None
            skipped.append({"instance": name, "reason": str(err)})

    timings = _load_timings(out / "timings.txt")
    tasks = []
    cells = []
    for name, inst, _src in resolved:
        opt = opts[name]
        for algo in config.algorithms:
            gammas = config.gammas if algo in _QD_ALGOS else (Fraction(1),)
            for gamma in gammas:
                key = cell_key(name, algo, gamma, config.mode)
                if opt is None and (config.target_opt and config.target_profit is None):
                    cells.append((key, name, algo, gamma, None, "skipped: optimum unavailable"))
                    continue
                cells.append((key, name, algo, gamma, opt, None))
                term = build_termination(config, inst, opt)
                for rep in range(config.repetitions):
                    seed = config.base_seed + rep
                    run_path = out / "runs" / key / f"{rep:02d}.json"
                    map_rel = (
                        f"maps/{key}/{rep:02d}.csv"
                        if (config.write_maps and algo in _QD_ALGOS)
                        else None
                    )
                    if run_path.exists() and not force:
                        continue
                    tasks.append(
                        {
                            "key": key,
                            "rep": rep,
                            "run_path": str(run_path),
                            "map_rel": map_rel,
                            "instance_text": write_instance(inst),
                            "instance_name": name,
                            "algorithm": algo,
                            "gamma": _fmt_gamma(gamma),
                            "mode": config.mode,
                            "seed": seed,
                            "mu": config.mu,
                            "opt": opt,
                            "term": {
                                "max_evaluations": term.max_evaluations,
                                "target_profit": term.target_profit,
                                "max_wall_clock": term.max_wall_clock,
                            },
                        }
                    )

    def _store(task, outcome):
        run_path = Path(task["run_path"])
        run_path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(run_path, _json_text(outcome["record"]))
        if outcome["map_csv"] is not None:
            map_path = out / task["map_rel"]
            map_path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(map_path, outcome["map_csv"])
        timings[f"{task['key']}/{task['rep']:02d}"] = outcome["seconds"]

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for task, outcome in zip(tasks, pool.map(_worker_run, tasks, chunksize=1)):
                _store(task, outcome)
    else:
        for task in tasks:
            _store(task, _worker_run(task))

    _atomic_write(out / "timings.txt", _timings_text(timings))

    stats = _aggregate(out, config, cells)
    _atomic_write(out / "stats.csv", stats_csv(stats))
    manifest = {
        "schema": "knapelites-experiment-v1",
        "clock": CLOCK_NAME,
        "config": config.canonical_dict(),
        "config_sha256": hashlib.sha256(
            json.dumps(config.canonical_dict(), sort_keys=True).encode()
        ).hexdigest(),
        "instances": [
            {
                "name": name,
                "source": src,
                "n": inst.n,
                "capacity": inst.capacity,
                "total_profit": inst.total_profit,
                "opt": opts[name],
                "sha256": instance_sha256(inst),
            }
            for name, inst, src in resolved
        ],
        "cells": [
            {"key": k, "instance": name, "algorithm": a, "gamma": _fmt_gamma(g), "skipped": why}
            for (k, name, a, g, _opt, why) in cells
        ],
        "skipped": skipped,
    }
    _atomic_write(out / "manifest.json", _json_text(manifest))
    return stats


def _aggregate(out: Path, config: ExperimentConfig, cells) -> list[RunStats]:
    timings = _load_timings(out / "timings.txt")
    stats = []
    for key, name, algo, gamma, opt, why in cells:
        if why is not None:
            continue
        records = []
        trajectories = []
        seeds = []
        seconds = []
        for rep in range(config.repetitions):
            run_path = out / "runs" / key / f"{rep:02d}.json"
            record = json.loads(run_path.read_text())
            records.append(record)
            trajectories.append([tuple(t) for t in record["trajectory"]])
            seeds.append(record["seed"])
            seconds.append(timings.get(f"{key}/{rep:02d}"))
        stats.append(
            stats_from_records(key, name, algo, gamma, config.mode, opt, records, seconds)
        )
        _atomic_write(out / "trajectories" / f"{key}.csv", trajectory_csv(trajectories, key, seeds))
    return stats


def rebuild_exports(out_dir: Union[str, Path]) -> list[RunStats]:
    """Recompute stats.csv and trajectory CSVs from the raw per-run JSON.

    The exports are lossless for all reported quantities, so this reproduces
    the originals exactly (wall-clock means come from timings.txt).
    """
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    timings = _load_timings(out / "timings.txt")
    stats = []
    reps = manifest["config"]["repetitions"]
    mode = manifest["config"]["mode"]
    for cell in manifest["cells"]:
        if cell["skipped"] is not None:
            continue
        key = cell["key"]
        records = []
        trajectories = []
        seeds = []
        seconds = []
        for rep in range(reps):
            record = json.loads((out / "runs" / key / f"{rep:02d}.json").read_text())
            records.append(record)
            trajectories.append([tuple(t) for t in record["trajectory"]])
            seeds.append(record["seed"])
            seconds.append(timings.get(f"{key}/{rep:02d}"))
        opt = records[0]["opt_profit"]
        stats.append(
            stats_from_records(
                key, cell["instance"], cell["algorithm"], Fraction(cell["gamma"]),
                mode, opt, records, seconds,
            )
        )
        _atomic_write(out / "trajectories" / f"{key}.csv", trajectory_csv(trajectories, key, seeds))
    _atomic_write(out / "stats.csv", stats_csv(stats))
    return stats


def _load_timings(path: Path) -> dict[str, float]:
    if not path.exists():
        return {}
    timings = {}
    for line in path.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        key, val = line.rsplit("\t", 1)
        timings[key] = float(val)
    return timings


def _timings_text(timings: dict[str, float]) -> str:
    lines = [f"# wall-clock seconds per run (clock={CLOCK_NAME}); not reproducible"]
    for key in sorted(timings):
        lines.append(f"{key}\t{timings[key]:.6f}")
    return "\n".join(lines) + "\n"

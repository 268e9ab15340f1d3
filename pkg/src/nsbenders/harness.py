"""Batch experiments: generate instances, run algorithms, write CSV tables.

Output files (all CSV with a header row):

``instances.csv``
    experiment, services, seed, instance, algorithm, status, feasible,
    objective, iterations, cuts, seconds, error.  One row per instance and
    algorithm; ``iterations``/``cuts`` are empty for non-decomposition
    algorithms and ``objective`` is empty when no solution was found.
``gap.csv``
    experiment, services, seed, instance, nu_fp, nu_fp1, nu_fp2, nu_ns,
    gap_fp1, gap_fp2.  Gap columns are empty when the metric is undefined.
``aggregate.csv``
    experiment, services, algorithm, instances, feasible, common_feasible,
    avg_objective_common, avg_iterations, avg_seconds, errors.
    ``avg_objective_common`` averages over instances every selected
    algorithm solved.
``gap_aggregate.csv``
    experiment, services, defined, avg_gap_fp1, avg_gap_fp2.

Aggregates are pure functions of the per-instance rows
(:func:`aggregate`, :func:`aggregate_gaps`), so they can be recomputed
from the raw files.
"""
from __future__ import annotations

import csv
import json
import math
import re
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

from .baselines import solve_direct, solve_lp_dynamic_rounding, solve_lp_one_shot_rounding
from .benders import UNLIMITED_ITERATIONS, CbdConfig, gap_improvement, solve_cbd
from .formulations import FpVariant
from .instance import GeneratorConfig, Instance, format_number, generate
from .lp import LpConfig
from .milp import MilpConfig

INSTANCE_COLUMNS = [
    "experiment", "services", "seed", "instance", "algorithm", "status", "feasible",
    "objective", "iterations", "cuts", "seconds", "error",
]
GAP_COLUMNS = [
    "experiment", "services", "seed", "instance", "nu_fp", "nu_fp1", "nu_fp2", "nu_ns", "gap_fp1", "gap_fp2",
]
AGGREGATE_COLUMNS = [
    "experiment", "services", "algorithm", "instances", "feasible", "common_feasible",
    "avg_objective_common", "avg_iterations", "avg_seconds", "errors",
]
GAP_AGGREGATE_COLUMNS = ["experiment", "services", "defined", "avg_gap_fp1", "avg_gap_fp2"]

_ALG = re.compile(r"^(cbd-(fp|fp1|fp2)(@(\d+))?|direct|lpor|lpdr)$")


class ExperimentError(ValueError):
    pass


def parse_algorithm(label: str) -> tuple[str, FpVariant | None, int]:
    """``cbd-fp2@5`` -> ("cbd", FP_II, 5); baselines carry no variant."""
    m = _ALG.match(label)
    if not m:
        raise ExperimentError(f"unknown algorithm {label!r} (use cbd-fp|cbd-fp1|cbd-fp2[@N], direct, lpor, lpdr)")
    if label.startswith("cbd"):
        iters = int(m.group(4)) if m.group(4) else UNLIMITED_ITERATIONS
        if iters < 1:
            raise ExperimentError(f"{label}: iteration limit must be at least 1")
        return "cbd", FpVariant(m.group(2)), iters
    return label, None, 0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    services: tuple[int, ...] = (5,)
    seeds: int = 10
    seed_start: int = 0
    generator: dict = field(default_factory=dict)
    algorithms: tuple[str, ...] = ("cbd-fp", "cbd-fp1", "cbd-fp2")
    gap: bool = False
    backend: str = "native"
    time_limit: float | None = None
    workers: int = 1

    def check(self) -> None:
        if not self.algorithms:
            raise ExperimentError("no algorithms selected")
        for a in self.algorithms:
            parse_algorithm(a)
        if self.backend not in ("native", "highs"):
            raise ExperimentError(f"unknown backend {self.backend!r}")
        if self.seeds < 0 or self.workers < 1:
            raise ExperimentError("seeds must be >= 0 and workers >= 1")
        known = {f.name for f in fields(GeneratorConfig)} - {"services", "seed"}
        extra = set(self.generator) - known
        if extra:
            raise ExperimentError(f"unknown generator settings {sorted(extra)}")
        for n in self.services:
            try:
                self._generator_config(n, self.seed_start).check()
            except (TypeError, ValueError) as e:
                raise ExperimentError(f"generator settings: {e}") from None

    def instances(self) -> list[tuple[int, int]]:
        return [(n, self.seed_start + i) for n in self.services for i in range(self.seeds)]

    def _generator_config(self, services: int, seed: int) -> GeneratorConfig:
        gen = dict(self.generator)
        for key in ("cloud_capacity", "link_capacity", "chain_length", "rates", "activation_power", "placement_cost"):
            if isinstance(gen.get(key), list):
                gen[key] = tuple(gen[key])
        return GeneratorConfig(services=services, seed=seed, **gen)

    def make_instance(self, services: int, seed: int) -> Instance:
        return generate(self._generator_config(services, seed))


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ExperimentError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return config_from_dict(data)


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    extra = set(data) - known
    if extra:
        raise ExperimentError(f"unknown experiment settings {sorted(extra)}")
    data = dict(data)
    for key in ("services", "algorithms"):
        if key in data:
            data[key] = tuple(data[key])
    cfg = ExperimentConfig(**data)
    cfg.check()
    return cfg


# ---------------------------------------------------------------- one task


def _num(x: float | None) -> str:
    return "" if x is None or not math.isfinite(x) else format_number(x)


def run_instance(config: ExperimentConfig, services: int, seed: int) -> tuple[list[dict], dict | None]:
    """Run every algorithm on one generated instance; failures become rows."""
    lp = LpConfig(backend=config.backend)
    milp = MilpConfig(backend=config.backend, time_limit=config.time_limit, lp=lp)
    inst = config.make_instance(services, seed)
    base = {"experiment": config.name, "services": services, "seed": seed, "instance": inst.name}
    rows = []
    for label in config.algorithms:
        kind, variant, iters = parse_algorithm(label)
        row = dict(base, algorithm=label, status="", feasible=0, objective="", iterations="", cuts="",
                   seconds="", error="")
        try:
            if kind == "cbd":
                res = solve_cbd(inst, CbdConfig(iter_max=iters, fp_variant=variant, lp=lp, milp=milp,
                                                time_limit=config.time_limit))
                row.update(status=res.status.value, feasible=int(res.optimal), objective=_num(res.objective),
                           iterations=res.num_iterations, cuts=len(res.cuts), seconds=f"{res.seconds:.6f}")
            else:
                if kind == "direct":
                    res = solve_direct(inst, milp)
                elif kind == "lpor":
                    res = solve_lp_one_shot_rounding(inst, lp)
                else:
                    res = solve_lp_dynamic_rounding(inst, lp)
                row.update(status=res.status.value, feasible=int(res.feasible), objective=_num(res.objective),
                           seconds=f"{res.runtime:.6f}")
        except Exception as e:  # recorded, never aborts the batch
            row.update(status="error", error=f"{type(e).__name__}: {e}".replace("\n", " "))
        rows.append(row)
    gap_row = None
    if config.gap:
        gap_row = dict(base, nu_fp="", nu_fp1="", nu_fp2="", nu_ns="", gap_fp1="", gap_fp2="")
        try:
            g = gap_improvement(inst, CbdConfig(lp=lp, milp=milp, time_limit=config.time_limit))
            gap_row.update(nu_fp=_num(g.nu_fp), nu_fp1=_num(g.nu_fp_i), nu_fp2=_num(g.nu_fp_ii), nu_ns=_num(g.nu_ns),
                           gap_fp1=_num(g.fp_i), gap_fp2=_num(g.fp_ii))
        except Exception:
            traceback.print_exc()
    return rows, gap_row


def _task(args):
    return run_instance(*args)


# ---------------------------------------------------------------- aggregation


def _f(value) -> float | None:
    if value in ("", None):
        return None
    return float(value)


def _mean(values: list[float]) -> str:
    return format_number(sum(values) / len(values)) if values else ""


def aggregate(rows: Iterable[dict]) -> list[dict]:
    rows = list(rows)
    groups: dict[tuple, list[dict]] = {}
    per_instance: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["experiment"], int(r["services"]), r["algorithm"]), []).append(r)
        per_instance.setdefault((r["experiment"], int(r["services"]), int(r["seed"])), []).append(r)
    common = {key for key, rs in per_instance.items() if all(int(r["feasible"]) for r in rs)}
    out = []
    for (exp, n, alg), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        ok = [r for r in rs if r["status"] != "error"]
        common_rows = [r for r in rs if (exp, n, int(r["seed"])) in common]
        iters = [float(r["iterations"]) for r in ok if _f(r["iterations"]) is not None]
        out.append({
            "experiment": exp,
            "services": n,
            "algorithm": alg,
            "instances": len(rs),
            "feasible": sum(int(r["feasible"]) for r in rs),
            "common_feasible": len(common_rows),
            "avg_objective_common": _mean([float(r["objective"]) for r in common_rows]),
            "avg_iterations": _mean(iters),
            "avg_seconds": _mean([float(r["seconds"]) for r in ok if _f(r["seconds"]) is not None]),
            "errors": len(rs) - len(ok),
        })
    return out


def aggregate_gaps(rows: Iterable[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["experiment"], int(r["services"])), []).append(r)
    out = []
    for (exp, n), rs in sorted(groups.items()):
        defined = [r for r in rs if _f(r["gap_fp1"]) is not None]
        out.append({
            "experiment": exp,
            "services": n,
            "defined": len(defined),
            "avg_gap_fp1": _mean([float(r["gap_fp1"]) for r in defined]),
            "avg_gap_fp2": _mean([float(r["gap_fp2"]) for r in defined]),
        })
    return out


# ---------------------------------------------------------------- runner


class _Sink:
    """The only writer of an output table."""

    def __init__(self, path: Path, columns: list[str]):
        self.handle = path.open("w", newline="")
        self.writer = csv.DictWriter(self.handle, fieldnames=columns, lineterminator="\n")
        self.writer.writeheader()
        self.rows: list[dict] = []

    def write(self, row: dict) -> None:
        self.writer.writerow(row)
        self.handle.flush()
        self.rows.append({k: str(v) for k, v in row.items()})

    def close(self) -> None:
        self.handle.close()


def write_table(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_table(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class ExperimentOutput:
    rows: list[dict]
    gap_rows: list[dict]
    aggregate: list[dict]
    gap_aggregate: list[dict]
    out_dir: Path


def run_experiment(config: ExperimentConfig, out_dir: str | Path, progress=None) -> ExperimentOutput:
    """Run the batch with a bounded worker pool; rows are written in task order."""
    config.check()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sink = _Sink(out / "instances.csv", INSTANCE_COLUMNS)
    gap_sink = _Sink(out / "gap.csv", GAP_COLUMNS) if config.gap else None
    tasks = [(config, n, seed) for n, seed in config.instances()]
    try:
        if config.workers == 1:
            results = map(_task, tasks)
            _drain(results, sink, gap_sink, progress)
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                _drain(pool.map(_task, tasks), sink, gap_sink, progress)
    finally:
        sink.close()
        if gap_sink is not None:
            gap_sink.close()
    agg = aggregate(sink.rows)
    write_table(out / "aggregate.csv", AGGREGATE_COLUMNS, agg)
    gap_rows = gap_sink.rows if gap_sink is not None else []
    gap_agg = aggregate_gaps(gap_rows)
    if config.gap:
        write_table(out / "gap_aggregate.csv", GAP_AGGREGATE_COLUMNS, gap_agg)
    return ExperimentOutput(sink.rows, gap_rows, agg, gap_agg, out)


def _drain(results, sink: _Sink, gap_sink: _Sink | None, progress) -> None:
    for rows, gap_row in results:
        for r in rows:
            sink.write(r)
        if gap_sink is not None and gap_row is not None:
            gap_sink.write(gap_row)
        if progress is not None:
            progress(rows)

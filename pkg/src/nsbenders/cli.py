"""Command-line entry point: ``nsbenders gen|solve|experiment|verify``.

Exit codes: 0 solved (optimal or feasible), 2 infeasible, 3 stopped by a
limit, 1 for usage, file or parse errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from .baselines import solve_direct, solve_lp_dynamic_rounding, solve_lp_one_shot_rounding
from .benders import UNLIMITED_ITERATIONS, CbdConfig, CbdStatus, solve_cbd
from .formulations import FpVariant
from .harness import ExperimentError, load_config, run_experiment
from .instance import GeneratorConfig, InstanceError, dumps, format_number, generate, load, validate
from .lp import LpConfig
from .milp import MilpConfig
from .verify import Solution, check_solution, describe, load_solution, save_solution

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: usage error: {message}\n")


def _iter_max(text: str) -> int:
    if text.lower() in ("inf", "infinity", "unlimited"):
        return UNLIMITED_ITERATIONS
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("iter-max must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nsbenders", description="Network slicing by decomposition with valid inequalities.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--nodes", type=int, default=20)
    g.add_argument("--services", type=int, default=5)
    g.add_argument("--clouds", type=int, default=6)
    g.add_argument("--infinite-links", action="store_true", help="make every link capacity unlimited")
    g.add_argument("--out", help="write here instead of stdout")

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--alg", choices=["cbd", "direct", "lpor", "lpdr"], default="cbd")
    s.add_argument("--variant", choices=[v.value for v in FpVariant], default="fp2")
    s.add_argument("--iter-max", type=_iter_max, default=UNLIMITED_ITERATIONS)
    s.add_argument("--backend", choices=["native", "highs"], default="native")
    s.add_argument("--time-limit", type=float)
    s.add_argument("--report", help="also write the report as JSON")
    s.add_argument("--solution", help="write the solution JSON (when one is found)")
    s.add_argument("--trace", help="write the decomposition trace as CSV")

    e = sub.add_parser("experiment", help="run a batch experiment from a JSON config")
    e.add_argument("config")
    e.add_argument("--out", default="results")
    e.add_argument("--workers", type=int)

    v = sub.add_parser("verify", help="check a solution file against an instance")
    v.add_argument("instance")
    v.add_argument("solution")
    return p


def _load_instance(path: str):
    inst = load(path)
    rep = validate(inst)
    if not rep.ok:
        raise InstanceError(f"{path}: invalid instance: " + "; ".join(rep.violations))
    return inst


def cmd_gen(args) -> int:
    cfg = GeneratorConfig(
        nodes=args.nodes,
        services=args.services,
        clouds=args.clouds,
        seed=args.seed,
        link_capacity=None if args.infinite_links else GeneratorConfig.link_capacity,
    )
    try:
        cfg.check()
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    text = dumps(generate(cfg))
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    lp = LpConfig(backend=args.backend)
    milp = MilpConfig(backend=args.backend, time_limit=args.time_limit, lp=lp)
    report: dict = {"instance": inst.name, "algorithm": args.alg}
    solution = None
    if args.alg == "cbd":
        cfg = CbdConfig(iter_max=args.iter_max, fp_variant=FpVariant(args.variant), lp=lp, milp=milp,
                        time_limit=args.time_limit)
        res = solve_cbd(inst, cfg)
        report.update(
            variant=args.variant,
            status=res.status.value,
            objective=res.objective if res.optimal else None,
            iterations=res.num_iterations,
            cuts=len(res.cuts),
            seconds=res.seconds,
        )
        if args.trace:
            res.write_trace(args.trace)
        if res.optimal:
            solution = Solution(res.placement, res.activated, res.routing, res.objective, instance=inst.name)
        code = {CbdStatus.OPTIMAL: EXIT_OK, CbdStatus.INFEASIBLE: EXIT_INFEASIBLE}.get(res.status, EXIT_LIMIT)
    else:
        if args.alg == "direct":
            res = solve_direct(inst, milp)
        elif args.alg == "lpor":
            res = solve_lp_one_shot_rounding(inst, lp)
        else:
            res = solve_lp_dynamic_rounding(inst, lp)
        report.update(
            status=res.status.value,
            objective=res.objective if res.feasible else None,
            seconds=res.runtime,
            detail=res.detail,
        )
        solution = res.solution
        if res.feasible:
            code = EXIT_OK
        elif res.detail in ("node_limit", "time_limit"):
            code = EXIT_LIMIT
        else:
            code = EXIT_INFEASIBLE
    for key, value in report.items():
        if key == "seconds":
            value = f"{value:.4f}"
        elif isinstance(value, float):
            value = format_number(value) if math.isfinite(value) else value
        print(f"{key}: {'-' if value is None else value}")
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    if args.solution and solution is not None:
        save_solution(solution, args.solution)
    return code


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    out = run_experiment(cfg, args.out)
    print(f"{len(out.rows)} rows written to {out.out_dir}")
    for row in out.aggregate:
        print(
            f"services={row['services']} {row['algorithm']}: feasible {row['feasible']}/{row['instances']}"
            f" avg_iterations={row['avg_iterations'] or '-'} avg_seconds={row['avg_seconds'] or '-'}"
        )
    for row in out.gap_aggregate:
        print(f"services={row['services']} gap: fp1={row['avg_gap_fp1'] or '-'} fp2={row['avg_gap_fp2'] or '-'}"
              f" over {row['defined']} instances")
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load_instance(args.instance)
    sol = load_solution(args.solution)
    rep = check_solution(inst, sol)
    print(describe(rep))
    return EXIT_OK if rep.ok else EXIT_INFEASIBLE


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"gen": cmd_gen, "solve": cmd_solve, "experiment": cmd_experiment, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except (InstanceError, ExperimentError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

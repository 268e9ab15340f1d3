"""Stand-alone feasibility check of a joint placement-and-routing solution.

Constraints are recomputed from the instance alone so the check does not
trust any model built by the solvers.  Solutions travel as JSON::

    {"schema_version": 1, "instance": "...", "status": "optimal",
     "objective": 3,
     "placement": [{"service": "k1", "stage": 1, "node": "B"}, ...],
     "activated": ["B", "C"],
     "routing": [{"service": "k1", "flow": 0, "tail": "A", "head": "B", "value": 1.0}, ...]}
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .instance import INF, Instance, InstanceError, format_number

SOLUTION_SCHEMA_VERSION = 1
TOL_FEAS = 1e-6


@dataclass
class Solution:
    placement: dict[tuple[str, int], str]
    activated: list[str]
    routing: dict[tuple[str, int, str, str], float]
    objective: float = math.nan
    status: str = "optimal"
    instance: str = ""


@dataclass
class VerifyReport:
    violations: list[str] = field(default_factory=list)
    objective: float = math.nan

    @property
    def ok(self) -> bool:
        return not self.violations


def check_solution(instance: Instance, sol: Solution, tol: float = TOL_FEAS) -> VerifyReport:
    rep = VerifyReport()
    net = instance.network
    clouds = {c.node: c for c in net.clouds}
    links = {(l.tail, l.head): l for l in net.links}
    active = set(sol.activated)
    for v in active:
        if v not in clouds:
            rep.violations.append(f"activated node {v!r} is not a cloud")

    expected = {(svc.id, s) for svc in instance.services for s in range(1, svc.length + 1)}
    for key in set(sol.placement) - expected:
        rep.violations.append(f"placement for unknown stage {key}")
    load: dict[str, float] = {}
    cost = sum(clouds[v].power for v in active if v in clouds)
    for svc in instance.services:
        for s, stage in enumerate(svc.chain, start=1):
            v = sol.placement.get((svc.id, s))
            if v is None:
                rep.violations.append(f"stage ({svc.id}, {s}) is not placed")
                continue
            if v not in stage.costs:
                rep.violations.append(f"stage ({svc.id}, {s}) on {v!r}, which cannot host {stage.function}")
                continue
            if v not in active:
                rep.violations.append(f"stage ({svc.id}, {s}) on inactive node {v!r}")
            load[v] = load.get(v, 0.0) + stage.rate
            cost += stage.costs[v]
    for v, amount in load.items():
        cap = clouds[v].capacity
        if cap is not INF and amount > cap + tol:
            rep.violations.append(f"node {v} carries {amount:g} > capacity {cap:g}")

    used: dict[tuple[str, str], float] = {}
    balance: dict[tuple[str, int, str], float] = {}
    for (k, s, i, j), value in sol.routing.items():
        if (i, j) not in links:
            rep.violations.append(f"routing on missing link {i}->{j}")
            continue
        try:
            svc = instance.service(k)
        except KeyError:
            rep.violations.append(f"routing for unknown service {k!r}")
            continue
        if not 0 <= s <= svc.length:
            rep.violations.append(f"routing for unknown flow ({k}, {s})")
            continue
        if value < -tol:
            rep.violations.append(f"negative routing {value:g} on {i}->{j} for ({k}, {s})")
        rate = svc.rate_in if s == 0 else svc.chain[s - 1].rate
        used[(i, j)] = used.get((i, j), 0.0) + rate * value
        balance[(k, s, j)] = balance.get((k, s, j), 0.0) + value
        balance[(k, s, i)] = balance.get((k, s, i), 0.0) - value
    for (i, j), amount in used.items():
        cap = links[(i, j)].capacity
        if cap is not INF and amount > cap + tol:
            rep.violations.append(f"link {i}->{j} carries {amount:g} > capacity {cap:g}")

    for svc in instance.services:
        hosts = [svc.source] + [sol.placement.get((svc.id, s)) for s in range(1, svc.length + 1)] + [svc.destination]
        if None in hosts:
            continue
        for s in range(svc.length + 1):
            for node in net.nodes:
                want = float(node == hosts[s + 1]) - float(node == hosts[s])
                got = balance.get((svc.id, s, node), 0.0)
                if abs(got - want) > tol:
                    rep.violations.append(
                        f"flow ({svc.id}, {s}) at {node}: net inflow {got:g}, expected {want:g}"
                    )
    rep.objective = cost
    if math.isfinite(sol.objective) and abs(sol.objective - cost) > tol * max(1.0, abs(cost)):
        rep.violations.append(f"reported objective {sol.objective:g} differs from recomputed {cost:g}")
    return rep


# ------------------------------------------------------------------ JSON


def solution_to_dict(sol: Solution) -> dict:
    return {
        "schema_version": SOLUTION_SCHEMA_VERSION,
        "instance": sol.instance,
        "status": sol.status,
        "objective": None if not math.isfinite(sol.objective) else sol.objective,
        "placement": [
            {"service": k, "stage": s, "node": v} for (k, s), v in sorted(sol.placement.items())
        ],
        "activated": sorted(sol.activated),
        "routing": [
            {"service": k, "flow": s, "tail": i, "head": j, "value": val}
            for (k, s, i, j), val in sorted(sol.routing.items())
        ],
    }


def dumps_solution(sol: Solution) -> str:
    return json.dumps(solution_to_dict(sol), indent=2)


def solution_from_dict(data) -> Solution:
    version = data.get("schema_version") if isinstance(data, dict) else None
    if version != SOLUTION_SCHEMA_VERSION:
        raise InstanceError(f"unsupported solution schema_version {version!r}")
    try:
        placement = {(p["service"], int(p["stage"])): p["node"] for p in data["placement"]}
        routing = {
            (e["service"], int(e["flow"]), e["tail"], e["head"]): float(e["value"]) for e in data["routing"]
        }
        obj = data.get("objective")
        return Solution(
            placement,
            list(data["activated"]),
            routing,
            math.nan if obj is None else float(obj),
            data.get("status", "optimal"),
            data.get("instance", ""),
        )
    except KeyError as e:
        raise InstanceError(f"solution: missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise InstanceError(f"solution: {e}") from None


def load_solution(path: str | Path) -> Solution:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InstanceError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return solution_from_dict(data)


def save_solution(sol: Solution, path: str | Path) -> None:
    Path(path).write_text(dumps_solution(sol) + "\n")


def describe(rep: VerifyReport) -> str:
    if rep.ok:
        return f"feasible, objective {format_number(rep.objective)}"
    return "infeasible:\n" + "\n".join(f"  - {v}" for v in rep.violations)

"""Exhaustive ground truth for tiny instances.

Every placement is enumerated and checked with a routing LP written here
from scratch (no model-building code is shared with the formulations), so
agreement with the decomposition is evidence rather than tautology.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

from .instance import INF, Instance
from .lp import LinearProgram, LpConfig, LpStatus, solve_lp

GUARD = 10**6


class GuardExceeded(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    objective: float = math.inf
    placement: dict | None = None
    activated: tuple[str, ...] = ()
    checked: int = 0


def placement_count(instance: Instance) -> int:
    n = len(instance.network.clouds)
    return math.prod(n ** svc.length for svc in instance.services)


def _stages(instance: Instance) -> list[tuple[str, int]]:
    return [(svc.id, s) for svc in instance.services for s in range(1, svc.length + 1)]


def placements(instance: Instance, guard: int = GUARD) -> Iterator[dict[tuple[str, int], str]]:
    """All assignments of stages to clouds that may host them and fit node capacities."""
    if placement_count(instance) > guard:
        raise GuardExceeded(f"{placement_count(instance)} placements exceed the guard {guard}")
    stages = _stages(instance)
    options = []
    for k, s in stages:
        stage = instance.service(k).chain[s - 1]
        options.append([c.node for c in instance.network.clouds if c.node in stage.costs])
    caps = {c.node: c.capacity for c in instance.network.clouds}
    for combo in itertools.product(*options):
        load: dict[str, float] = {}
        for (k, s), v in zip(stages, combo):
            load[v] = load.get(v, 0.0) + instance.service(k).chain[s - 1].rate
        if any(caps[v] is not INF and load[v] > caps[v] + 1e-9 for v in load):
            continue
        yield dict(zip(stages, combo))


def cost(instance: Instance, placement: dict) -> float:
    power = {c.node: c.power for c in instance.network.clouds}
    total = sum(power[v] for v in set(placement.values()))
    for (k, s), v in placement.items():
        total += instance.service(k).chain[s - 1].costs[v]
    return total


def routing_lp(instance: Instance, placement: dict) -> LinearProgram:
    """Route every flow between consecutive hosts as a fraction of its rate."""
    net = instance.network
    lp = LinearProgram()
    col = {}
    for svc in instance.services:
        for s in range(svc.length + 1):
            for l in net.links:
                col[(svc.id, s, l.tail, l.head)] = lp.add_var(f"f{svc.id}.{s}.{l.tail}.{l.head}")
    for l in net.links:
        if l.capacity is INF:
            continue
        use = {}
        for svc in instance.services:
            rates = [svc.rate_in] + [st.rate for st in svc.chain]
            for s in range(svc.length + 1):
                use[col[(svc.id, s, l.tail, l.head)]] = rates[s]
        lp.add_row(use, "<=", float(l.capacity))
    for svc in instance.services:
        hosts = [svc.source] + [placement[(svc.id, s)] for s in range(1, svc.length + 1)] + [svc.destination]
        for s in range(svc.length + 1):
            origin, target = hosts[s], hosts[s + 1]
            for node in net.nodes:
                coefs = {}
                for l in net.links:
                    if l.head == node:
                        coefs[col[(svc.id, s, l.tail, l.head)]] = 1.0
                    elif l.tail == node:
                        coefs[col[(svc.id, s, l.tail, l.head)]] = -1.0
                # net inflow: +1 at the target, -1 at the origin, 0 if they coincide
                need = float(node == target) - float(node == origin)
                lp.add_row(coefs, "=", need)
    return lp


def routable(instance: Instance, placement: dict, config: LpConfig = LpConfig()) -> bool:
    out = solve_lp(routing_lp(instance, placement), config)
    if out.status not in (LpStatus.OPTIMAL, LpStatus.INFEASIBLE):
        raise RuntimeError(f"routing LP ended {out.status.value}")
    return out.status is LpStatus.OPTIMAL


def feasible_placements(instance: Instance, guard: int = GUARD) -> list[dict]:
    """Every placement that fits node capacities and can be routed."""
    return [p for p in placements(instance, guard) if routable(instance, p)]


def brute_force_ns(instance: Instance, guard: int = GUARD, config: LpConfig = LpConfig()) -> OracleResult:
    """Cheapest routable placement, found by checking placements in order of cost."""
    ranked = sorted(placements(instance, guard), key=lambda p: cost(instance, p))
    for n, p in enumerate(ranked, start=1):
        if routable(instance, p, config):
            return OracleResult(True, cost(instance, p), p, tuple(sorted(set(p.values()))), n)
    return OracleResult(False, checked=len(ranked))

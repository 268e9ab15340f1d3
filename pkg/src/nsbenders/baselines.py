"""Reference algorithms to compare the decomposition against.

* ``solve_direct``: branch and bound on the joint model.
* ``solve_lp_one_shot_rounding``: solve the joint LP relaxation once and
  put every stage on its largest-valued cloud.
* ``solve_lp_dynamic_rounding``: repeatedly fix the largest placement
  value to 1 and re-solve the relaxation.

The two rounding rules are reconstructions; tie-breaking prefers the cloud
listed first in the network's node order.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

from .formulations import (
    PlacementError,
    VariableCatalog,
    build_ns,
    build_tr,
    node_loads_ok,
    placement_cost,
    placement_from_vector,
)
from .instance import Instance
from .lp import LpConfig, LpStatus, solve_lp
from .milp import MilpConfig, MilpStatus, solve_milp
from .verify import Solution


class BaselineStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE_OR_FAILED = "infeasible_or_failed"


@dataclass
class BaselineResult:
    status: BaselineStatus
    objective: float = math.inf
    solution: Solution | None = None
    runtime: float = 0.0
    detail: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is BaselineStatus.FEASIBLE


def _failed(start: float, detail: str) -> BaselineResult:
    return BaselineResult(BaselineStatus.INFEASIBLE_OR_FAILED, runtime=time.perf_counter() - start, detail=detail)


def solve_direct(instance: Instance, config: MilpConfig = MilpConfig()) -> BaselineResult:
    start = time.perf_counter()
    p, cat = build_ns(instance)
    out = solve_milp(p, config)
    if out.status is not MilpStatus.OPTIMAL:
        return _failed(start, out.status.value)
    placement = placement_from_vector(instance, cat, out.x)
    sol = Solution(placement, cat.activated(out.x), cat.routing(out.x), out.objective, instance=instance.name)
    return BaselineResult(BaselineStatus.FEASIBLE, out.objective, sol, time.perf_counter() - start)


def _finish(instance: Instance, placement: dict, start: float, config: LpConfig) -> BaselineResult:
    """Accept a rounded placement only if it fits node capacities and can be routed."""
    if not node_loads_ok(instance, placement):
        return _failed(start, "rounded placement overloads a cloud node")
    tr = build_tr(instance, placement)
    out = solve_lp(tr.lp, config)
    if out.status is not LpStatus.OPTIMAL:
        return _failed(start, f"routing {out.status.value}")
    obj = placement_cost(instance, placement)
    sol = Solution(
        dict(placement), sorted(set(placement.values())), tr.catalog.routing(out.x), obj, instance=instance.name
    )
    return BaselineResult(BaselineStatus.FEASIBLE, obj, sol, time.perf_counter() - start)


def _stage_columns(instance: Instance, cat: VariableCatalog) -> dict[tuple[str, int], list[tuple[str, int]]]:
    """(cloud, column) candidates per stage, in network node order."""
    order = {v: n for n, v in enumerate(instance.network.nodes)}
    cols: dict[tuple[str, int], list[tuple[str, int]]] = {}
    for (k, s, v), j in cat.x.items():
        cols.setdefault((k, s), []).append((v, j))
    for lst in cols.values():
        lst.sort(key=lambda vj: order[vj[0]])
    return cols


def solve_lp_one_shot_rounding(instance: Instance, config: LpConfig = LpConfig(), tol: float = 1e-9) -> BaselineResult:
    start = time.perf_counter()
    p, cat = build_ns(instance)
    out = solve_lp(p.lp, config)
    if out.status is not LpStatus.OPTIMAL:
        return _failed(start, f"relaxation {out.status.value}")
    placement = {}
    for stage, cands in _stage_columns(instance, cat).items():
        best_v, best = None, -math.inf
        for v, j in cands:
            if out.x[j] > best + tol:
                best_v, best = v, out.x[j]
        placement[stage] = best_v
    try:
        return _finish(instance, placement, start, config)
    except PlacementError as e:
        return _failed(start, str(e))


def solve_lp_dynamic_rounding(instance: Instance, config: LpConfig = LpConfig(), tol: float = 1e-6) -> BaselineResult:
    """Fix stages one at a time, re-solving the relaxation after each choice.

    Every round first accepts stages whose relaxation value is already 1;
    if stages remain, the single largest fractional value is rounded up.
    """
    start = time.perf_counter()
    p, cat = build_ns(instance)
    cols = _stage_columns(instance, cat)
    lower, upper = list(p.lp.lower), list(p.lp.upper)
    placement: dict[tuple[str, int], str] = {}

    def fix(stage, host):
        placement[stage] = host
        for v, j in cols[stage]:
            lower[j] = upper[j] = 1.0 if v == host else 0.0

    stage_order = [(svc.id, s) for svc, s in instance.stages()]
    while True:
        out = solve_lp(p.lp.with_bounds(lower, upper), config)
        if out.status is not LpStatus.OPTIMAL:
            return _failed(start, f"relaxation {out.status.value} after fixing {len(placement)} stages")
        open_stages = [st for st in stage_order if st not in placement]
        if not open_stages:
            break
        for st in open_stages:
            for v, j in cols.get(st, []):
                if out.x[j] >= 1.0 - tol:
                    fix(st, v)
                    break
        remaining = [st for st in stage_order if st not in placement]
        if not remaining:
            continue
        pick, best = None, -math.inf
        for st in remaining:
            for v, j in cols.get(st, []):
                if out.x[j] > best + 1e-12:
                    pick, best = (st, v), out.x[j]
        if pick is None:
            return _failed(start, "stage without candidate cloud")
        fix(*pick)
    return _finish(instance, placement, start, config)

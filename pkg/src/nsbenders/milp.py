"""Best-bound branch and bound for mixed-binary linear programs."""
from __future__ import annotations

import enum
import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram, LpConfig, LpOutcome, LpStatus, Sense, solve_lp


@dataclass
class MixedBinaryProgram:
    """An LP whose listed columns must take 0/1 values.

    ``priority`` optionally ranks binaries for branching: a fractional
    binary of higher priority is always branched on before lower ones.
    """

    lp: LinearProgram
    binaries: list[int]
    priority: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.binaries = sorted(set(self.binaries))
        for j in self.binaries:
            if not 0 <= j < self.lp.num_vars:
                raise ValueError(f"binary id {j} is not a variable")
            lo, up = self.lp.lower[j], self.lp.upper[j]
            if lo not in (0.0, 1.0) or up not in (0.0, 1.0) or lo > up:
                raise ValueError(f"binary {self.lp.names[j]} has bounds [{lo}, {up}]")


class MilpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"


class MilpError(RuntimeError):
    """An LP relaxation failed (stalled or unbounded) during the search."""


@dataclass(frozen=True)
class MilpConfig:
    tol_int: float = 1e-6
    tol_obj: float = 1e-9
    node_limit: int = 200_000
    time_limit: float | None = None
    lp: LpConfig = LpConfig()
    backend: str = "native"  # "native" | "highs"


@dataclass
class MilpOutcome:
    status: MilpStatus
    x: np.ndarray | None = None
    objective: float = math.inf
    bound: float = -math.inf
    nodes: int = 0
    bound_history: list[tuple[int, float, float]] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is MilpStatus.OPTIMAL

    @property
    def gap(self) -> float:
        if self.x is None:
            return math.inf
        return self.objective - self.bound


class InfeasibleRelaxation(ValueError):
    pass


def _relax(p: MixedBinaryProgram, lower, upper, cfg: LpConfig) -> LpOutcome:
    out = solve_lp(p.lp.with_bounds(lower, upper), cfg)
    if out.status in (LpStatus.STALLED, LpStatus.UNBOUNDED):
        raise MilpError(f"LP relaxation {out.status.value}")
    return out


def root_relaxation_value(p: MixedBinaryProgram, config: LpConfig = LpConfig()) -> float:
    """Optimal value of the LP relaxation (a lower bound on the MILP optimum)."""
    out = _relax(p, p.lp.lower, p.lp.upper, config)
    if out.status is LpStatus.INFEASIBLE:
        raise InfeasibleRelaxation("LP relaxation is infeasible")
    return out.objective


def _integral_objective(p: MixedBinaryProgram) -> bool:
    if p.lp.constant != round(p.lp.constant):
        return False
    is_binary = set(p.binaries)
    for j, c in enumerate(p.lp.cost):
        if c != 0.0 and (j not in is_binary or c != round(c)):
            return False
    return True


def solve_milp(p: MixedBinaryProgram, config: MilpConfig = MilpConfig()) -> MilpOutcome:
    """Solve ``p`` to proven optimality (within ``tol_obj``) or until a limit.

    The native search branches on the most fractional binary (lowest id on ties).

    Each branching dives into the child on the side the relaxation leans to;
    when a dive ends, the open node with the smallest bound is taken next.
    """
    if config.backend == "highs":
        return _solve_highs(p, config)
    if config.backend != "native":
        raise ValueError(f"unknown MILP backend {config.backend!r}")
    start = time.perf_counter()
    binaries = np.array(p.binaries, dtype=int)
    prio = np.array([p.priority.get(int(j), 0) for j in binaries], dtype=float)
    result = MilpOutcome(MilpStatus.INFEASIBLE)
    incumbent = math.inf
    best_x = None

    def cutoff() -> float:
        return incumbent - config.tol_obj * max(1.0, abs(incumbent))

    whole = _integral_objective(p)

    def node_bound(value: float) -> float:
        # with integer costs on binaries only, every solution value is an integer
        return math.ceil(value - 1e-6) if whole else value

    root_lo, root_up = list(p.lp.lower), list(p.lp.upper)
    counter = 0
    heap: list = []
    # the preferred child is explored right away (a dive), its sibling waits in the heap
    dive: tuple | None = (-math.inf, 0, counter, {})
    nodes = 0
    while dive is not None or heap:
        if dive is not None:
            node, dive = dive, None
        else:
            node = heapq.heappop(heap)
        parent_bound, neg_depth, _, fixes = node
        if parent_bound >= cutoff():
            continue
        if nodes >= config.node_limit or (
            config.time_limit is not None and time.perf_counter() - start > config.time_limit
        ):
            heapq.heappush(heap, node)
            result.status = MilpStatus.NODE_LIMIT if nodes >= config.node_limit else MilpStatus.TIME_LIMIT
            break
        nodes += 1
        lower, upper = list(root_lo), list(root_up)
        for j, v in fixes.items():
            lower[j] = upper[j] = float(v)
        out = _relax(p, lower, upper, config.lp)
        if out.status is LpStatus.INFEASIBLE or node_bound(out.objective) >= cutoff():
            continue
        xb = out.x[binaries] if binaries.size else np.zeros(0)
        frac = np.abs(xb - np.round(xb))
        if not binaries.size or frac.max() <= config.tol_int:
            x = out.x.copy()
            if binaries.size:
                x[binaries] = np.round(xb)
            incumbent = p.lp.objective_value(x)
            best_x = x
            open_bound = min((h[0] for h in heap), default=incumbent)
            result.bound_history.append((nodes, min(open_bound, incumbent), incumbent))
            continue
        # most fractional within the highest priority; argmin returns the lowest id on ties
        closeness = np.where(frac > config.tol_int, np.abs(xb - 0.5) - prio, np.inf)
        pick = int(np.argmin(np.round(closeness, 12)))
        j = int(binaries[pick])
        first, second = (1, 0) if xb[pick] >= 0.5 else (0, 1)
        for v in (second, first):
            counter += 1
            child = dict(fixes)
            child[j] = v
            entry = (node_bound(out.objective), neg_depth - 1, counter, child)
            if v == first:
                dive = entry
            else:
                heapq.heappush(heap, entry)
    else:
        result.status = MilpStatus.OPTIMAL if best_x is not None else MilpStatus.INFEASIBLE

    result.nodes = nodes
    if best_x is not None:
        result.x = best_x
        result.objective = incumbent
    open_bound = min((h[0] for h in heap), default=incumbent)
    result.bound = min(open_bound, incumbent)
    if result.status is MilpStatus.OPTIMAL:
        result.bound = incumbent
    return result


def _solve_highs(p: MixedBinaryProgram, config: MilpConfig) -> MilpOutcome:
    """Whole-problem solve with HiGHS through scipy, for desk-scale batches."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    lp = p.lp
    lo = np.array([r.rhs if r.sense is not Sense.LE else -np.inf for r in lp.rows])
    up = np.array([r.rhs if r.sense is not Sense.GE else np.inf for r in lp.rows])
    integrality = np.zeros(lp.num_vars)
    integrality[p.binaries] = 1
    options = {"mip_rel_gap": config.tol_obj, "node_limit": config.node_limit}
    if config.time_limit is not None:
        options["time_limit"] = max(config.time_limit, 1e-3)
    res = milp(
        np.asarray(lp.cost, dtype=float),
        constraints=LinearConstraint(lp.matrix(), lo, up) if lp.num_rows else None,
        integrality=integrality,
        bounds=Bounds(lp.lower, lp.upper),
        options=options,
    )
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 0:
        x = np.asarray(res.x, dtype=float).copy()
        x[p.binaries] = np.round(x[p.binaries])
        obj = lp.objective_value(x)
        return MilpOutcome(MilpStatus.OPTIMAL, x, obj, obj, nodes)
    if res.status == 2:
        return MilpOutcome(MilpStatus.INFEASIBLE, nodes=nodes)
    if res.status == 1:
        status = MilpStatus.TIME_LIMIT if config.time_limit is not None else MilpStatus.NODE_LIMIT
        out = MilpOutcome(status, nodes=nodes, bound=float(getattr(res, "mip_dual_bound", -math.inf) or -math.inf))
        if res.x is not None:
            out.x = np.asarray(res.x, dtype=float)
            out.objective = lp.objective_value(out.x)
        return out
    raise MilpError(f"HiGHS ended with status {res.status}: {res.message}")

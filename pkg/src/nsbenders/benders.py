"""Decomposition loop: placement master plus routing feasibility checks.

Each round solves the placement master to proven optimality.  When the
routing LP for the chosen placement is feasible the placement is optimal
for the joint problem; otherwise the routing LP's infeasibility
certificate becomes a cut and the master is solved again.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .formulations import (
    BendersCut,
    FpVariant,
    add_cut,
    build_fp,
    build_tr,
    materialize_cut,
    placement_from_vector,
)
from .instance import Instance
from .lp import LpConfig, LpStatus, solve_lp
from .milp import MilpConfig, MilpStatus, solve_milp
from .reachability import compute_unreachable

UNLIMITED_ITERATIONS = 10**9


class CbdStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITER_LIMIT = "iter_limit"
    TIME_LIMIT = "time_limit"


class CbdError(RuntimeError):
    """Numerical breakdown: a cut failed to remove the placement it was built from."""

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class CbdConfig:
    iter_max: int = UNLIMITED_ITERATIONS
    fp_variant: FpVariant = FpVariant.FP_II
    lp: LpConfig = LpConfig()
    milp: MilpConfig = MilpConfig()
    time_limit: float | None = None

    def __post_init__(self):
        if self.iter_max < 1:
            raise ValueError("iter_max must be at least 1")


@dataclass
class IterationRecord:
    iteration: int
    master_obj: float
    master_nodes: int
    tr_status: str
    cut_nnz: int
    cum_time_ms: float
    placement: dict = field(default_factory=dict, repr=False)


@dataclass
class CbdResult:
    status: CbdStatus
    objective: float = math.inf
    placement: dict[tuple[str, int], str] | None = None
    activated: list[str] | None = None
    routing: dict | None = None
    iterations: list[IterationRecord] = field(default_factory=list)
    cuts: list[BendersCut] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status is CbdStatus.OPTIMAL

    @property
    def num_iterations(self) -> int:
        return len(self.iterations)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "master_obj", "tr_status", "cut_nnz", "cum_time_ms"])
        for rec in self.iterations:
            w.writerow([rec.iteration, repr(rec.master_obj), rec.tr_status, rec.cut_nnz, f"{rec.cum_time_ms:.3f}"])
        return buf.getvalue()

    def write_trace(self, path: str | Path) -> None:
        Path(path).write_text(self.trace_csv())


def solve_cbd(instance: Instance, config: CbdConfig = CbdConfig()) -> CbdResult:
    start = time.perf_counter()
    reach = compute_unreachable(instance) if config.fp_variant is not FpVariant.FP else None
    master, cat = build_fp(instance, config.fp_variant, reach)
    result = CbdResult(CbdStatus.ITER_LIMIT)
    visited: set[tuple] = set()

    def elapsed() -> float:
        return time.perf_counter() - start

    for t in range(1, config.iter_max + 1):
        milp_cfg = config.milp
        if config.time_limit is not None:
            left = config.time_limit - elapsed()
            if left <= 0:
                result.status = CbdStatus.TIME_LIMIT
                break
            milp_cfg = replace(milp_cfg, time_limit=left, lp=config.lp)
        else:
            milp_cfg = replace(milp_cfg, lp=config.lp)
        out = solve_milp(master, milp_cfg)
        if out.status is MilpStatus.INFEASIBLE:
            result.iterations.append(IterationRecord(t, math.inf, out.nodes, "not_run", 0, elapsed() * 1e3))
            result.status = CbdStatus.INFEASIBLE
            break
        if out.status is MilpStatus.TIME_LIMIT:
            result.status = CbdStatus.TIME_LIMIT
            break
        if out.status is not MilpStatus.OPTIMAL:
            raise CbdError(f"master stopped with status {out.status.value}")
        placement = placement_from_vector(instance, cat, out.x)
        key = tuple(sorted(placement.items()))
        if key in visited:
            raise CbdError(f"master returned an already cut placement at iteration {t}")
        visited.add(key)

        tr = build_tr(instance, placement)
        sub = solve_lp(tr.lp, config.lp)
        record = IterationRecord(t, out.objective, out.nodes, sub.status.value, 0, 0.0, placement)
        result.iterations.append(record)
        if sub.status is LpStatus.OPTIMAL:
            result.status = CbdStatus.OPTIMAL
            result.objective = out.objective
            result.placement = placement
            result.activated = cat.activated(out.x)
            result.routing = tr.catalog.routing(sub.x)
            record.cum_time_ms = elapsed() * 1e3
            break
        if sub.status is not LpStatus.INFEASIBLE:
            raise CbdError(f"routing LP ended {sub.status.value} at iteration {t}", sub.certificate)
        cut = materialize_cut(instance, tr, sub.certificate, iteration=t, certificate_id=f"tr{t}")
        if not cut.lhs_vector(cat, out.x) < -config.lp.tol_cert:
            raise CbdError(f"cut from iteration {t} does not remove the master solution", sub.certificate)
        add_cut(master, cat, cut)
        result.cuts.append(cut)
        record.cut_nnz = cut.nnz
        record.cum_time_ms = elapsed() * 1e3
    result.seconds = elapsed()
    return result


# ---------------------------------------------------------------- gap metric


@dataclass(frozen=True)
class GapImprovement:
    nu_fp: float
    nu_fp_i: float
    nu_fp_ii: float
    nu_ns: float
    fp_i: float | None
    fp_ii: float | None

    @property
    def defined(self) -> bool:
        return self.fp_i is not None


def master_value(instance: Instance, variant: FpVariant, config: MilpConfig = MilpConfig()) -> float:
    """Optimal value of a placement master (``inf`` when infeasible)."""
    p, _ = build_fp(instance, variant)
    out = solve_milp(p, config)
    if out.status is MilpStatus.INFEASIBLE:
        return math.inf
    if not out.optimal:
        raise CbdError(f"master stopped with status {out.status.value}")
    return out.objective


def gap_improvement(instance: Instance, config: CbdConfig = CbdConfig(), tol: float = 1e-6) -> GapImprovement:
    """Share of the distance between the plain master and the joint optimum closed by each strengthening.

    Undefined (``None``) when the joint problem is infeasible or the plain
    master is already tight.
    """
    milp_cfg = replace(config.milp, lp=config.lp)
    nu = {v: master_value(instance, v, milp_cfg) for v in FpVariant}
    exact = solve_cbd(instance, replace(config, iter_max=UNLIMITED_ITERATIONS, fp_variant=FpVariant.FP_II))
    nu_ns = exact.objective if exact.optimal else math.inf
    denom = nu_ns - nu[FpVariant.FP]
    if not math.isfinite(nu_ns) or denom < tol:
        return GapImprovement(nu[FpVariant.FP], nu[FpVariant.FP_I], nu[FpVariant.FP_II], nu_ns, None, None)
    return GapImprovement(
        nu[FpVariant.FP],
        nu[FpVariant.FP_I],
        nu[FpVariant.FP_II],
        nu_ns,
        (nu[FpVariant.FP_I] - nu[FpVariant.FP]) / denom,
        (nu[FpVariant.FP_II] - nu[FpVariant.FP]) / denom,
    )

"""Two-phase bounded revised simplex.

Largest-reduced-cost pricing switches to Bland's rule after a run of
degenerate pivots and back after the next nondegenerate one.  Infeasible
problems return the phase-one duals as a Farkas certificate.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .farkas import TOL_CERT, FarkasCertificate, certificate_gap
from .model import LinearProgram, Sense


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    STALLED = "stalled"


@dataclass(frozen=True)
class LpConfig:
    tol_feas: float = 1e-7
    tol_opt: float = 1e-9
    tol_pivot: float = 1e-9
    tol_cert: float = TOL_CERT
    max_iter: int | None = None
    degenerate_limit: int = 25
    refactor_every: int = 50
    backend: str = "native"  # "native" | "highs"


@dataclass
class LpOutcome:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    certificate: FarkasCertificate | None = None
    ray: np.ndarray | None = None
    iterations: int = 0
    pivots: list[tuple[int, int]] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Stalled(Exception):
    pass


class _Core:
    """Revised simplex over ``M z = b``, ``0 <= z <= ub`` with an explicit basis inverse."""

    def __init__(self, M: sp.csc_matrix, b: np.ndarray, ub: np.ndarray, basis: list[int], cfg: LpConfig, budget: int):
        self.M = M
        self.MT = M.T.tocsr()
        self.b = b
        self.ub = ub
        self.m, self.N = M.shape
        self.basis = np.array(basis, dtype=int)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(self.N, dtype=bool)
        self.z = np.zeros(self.N)
        self.cfg = cfg
        self.budget = budget
        self.iterations = 0
        self.pivots: list[tuple[int, int]] = []
        self.refactor()

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.M.indptr[j], self.M.indptr[j + 1]
        return self.M.indices[lo:hi], self.M.data[lo:hi]

    def refactor(self) -> None:
        if self.m:
            B = self.M[:, self.basis].toarray()
            self.Binv = np.linalg.inv(B)
        else:
            self.Binv = np.zeros((0, 0))
        zn = np.where(self.is_basic, 0.0, self.z)
        self.xB = self.Binv @ (self.b - self.M @ zn) if self.m else np.zeros(0)
        self.since_refactor = 0

    def solution(self) -> np.ndarray:
        z = self.z.copy()
        z[self.basis] = self.xB
        return z

    def duals(self, cost: np.ndarray) -> np.ndarray:
        return cost[self.basis] @ self.Binv if self.m else np.zeros(0)

    def reduced(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = cost - (self.MT @ y if self.m else 0.0)
        d[self.basis] = 0.0
        return d

    def run(self, cost: np.ndarray) -> tuple[str, int, np.ndarray | None]:
        """Iterate to optimality; returns ("optimal"|"unbounded", entering, direction)."""
        cfg = self.cfg
        movable = self.ub > 0
        degenerate = 0
        bland = False
        while True:
            y = self.duals(cost)
            d = self.reduced(cost, y)
            eligible = movable & ~self.is_basic & np.where(self.at_upper, d > cfg.tol_opt, d < -cfg.tol_opt)
            if not eligible.any():
                if self.since_refactor:
                    # confirm optimality against a fresh factorisation
                    self.refactor()
                    continue
                return "optimal", -1, None
            if self.iterations >= self.budget:
                raise _Stalled()
            self.iterations += 1
            cand = np.flatnonzero(eligible)
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            rows, vals = self.column(q)
            w = self.Binv[:, rows] @ vals if self.m else np.zeros(0)
            sgn = -1.0 if self.at_upper[q] else 1.0
            delta = sgn * w

            theta = self.ub[q]
            leave = -1
            if self.m:
                ubB = self.ub[self.basis]
                limits = np.full(self.m, math.inf)
                dec = delta > cfg.tol_pivot
                inc = (delta < -cfg.tol_pivot) & np.isfinite(ubB)
                limits[dec] = np.maximum(self.xB[dec], 0.0) / delta[dec]
                limits[inc] = np.maximum(ubB[inc] - self.xB[inc], 0.0) / -delta[inc]
                best = float(limits.min())
                if best < theta:
                    ties = np.flatnonzero(limits <= best + 1e-12 * max(1.0, best))
                    if bland:
                        leave = int(ties[np.argmin(self.basis[ties])])
                    else:
                        leave = int(ties[np.argmax(np.abs(delta[ties]))])
                    theta = best
            if math.isinf(theta):
                return "unbounded", q, delta

            if theta <= 1e-12:
                degenerate += 1
                if degenerate > cfg.degenerate_limit:
                    bland = True
            else:
                degenerate = 0
                bland = False

            if self.m:
                self.xB -= theta * delta
            if leave < 0:
                self.at_upper[q] = not self.at_upper[q]
                self.z[q] = self.ub[q] if self.at_upper[q] else 0.0
                self.pivots.append((q, -1))
                continue
            out = int(self.basis[leave])
            to_upper = delta[leave] < 0
            self.is_basic[out] = False
            self.at_upper[out] = bool(to_upper)
            self.z[out] = self.ub[out] if to_upper else 0.0
            entering_value = (self.ub[q] - theta) if self.at_upper[q] else theta
            self.basis[leave] = q
            self.is_basic[q] = True
            self.at_upper[q] = False
            self.xB[leave] = entering_value
            self.pivots.append((q, out))

            piv = w[leave]
            row = self.Binv[leave] / piv
            w_other = w.copy()
            w_other[leave] = 0.0
            self.Binv -= np.outer(w_other, row)
            self.Binv[leave] = row
            self.since_refactor += 1
            if self.since_refactor >= cfg.refactor_every:
                self.refactor()


def _infeasible_row_certificate(lp: LinearProgram, i: int, value: float) -> np.ndarray:
    pi = np.zeros(lp.num_rows)
    sense = lp.rows[i].sense
    if sense is Sense.LE:
        pi[i] = 1.0
    elif sense is Sense.GE:
        pi[i] = -1.0
    else:
        pi[i] = -1.0 if value > 0 else 1.0
    return pi


def solve_native(lp: LinearProgram, cfg: LpConfig = LpConfig()) -> LpOutcome:
    n, m0 = lp.num_vars, lp.num_rows
    lo = np.asarray(lp.lower, dtype=float)
    up = np.asarray(lp.upper, dtype=float)
    c = np.asarray(lp.cost, dtype=float)
    A = lp.matrix()
    b = lp.rhs() - (A @ lo if n else np.zeros(m0))

    free = np.flatnonzero(up > lo)
    Af = A[:, free].tocsr()
    nnz_rows = np.diff(Af.indptr)

    kept: list[int] = []
    for i in range(m0):
        if nnz_rows[i]:
            kept.append(i)
            continue
        sense, v = lp.rows[i].sense, b[i]
        bad = (sense is Sense.LE and v < -cfg.tol_feas) or (sense is Sense.GE and v > cfg.tol_feas) or (
            sense is Sense.EQ and abs(v) > cfg.tol_feas
        )
        if bad:
            return LpOutcome(LpStatus.INFEASIBLE, certificate=FarkasCertificate(_infeasible_row_certificate(lp, i, v)))

    m = len(kept)
    nf = free.size
    Ak = Af[kept, :].tocoo() if m else sp.coo_matrix((0, nf))
    bk = b[kept]
    sigma = np.where(bk >= 0, 1.0, -1.0)
    senses = [lp.rows[i].sense for i in kept]

    rows_i = list(Ak.row)
    cols_i = list(Ak.col)
    data = list(Ak.data * sigma[Ak.row]) if m else []
    ncol = nf
    basis: list[int] = []
    art_cols: list[int] = []
    for r, sense in enumerate(senses):
        slack_coef = {Sense.LE: 1.0, Sense.GE: -1.0}.get(sense)
        slack = -1
        if slack_coef is not None:
            slack = ncol
            rows_i.append(r)
            cols_i.append(ncol)
            data.append(slack_coef * sigma[r])
            ncol += 1
        if slack >= 0 and slack_coef * sigma[r] > 0:
            basis.append(slack)
        else:
            rows_i.append(r)
            cols_i.append(ncol)
            data.append(1.0)
            art_cols.append(ncol)
            basis.append(ncol)
            ncol += 1
    M = sp.csc_matrix((data, (rows_i, cols_i)), shape=(m, ncol))
    bt = np.abs(bk)
    ub = np.full(ncol, math.inf)
    ub[:nf] = up[free] - lo[free]

    budget = cfg.max_iter if cfg.max_iter is not None else 50 * (m + ncol) + 1000
    core = _Core(M, bt, ub, basis, cfg, budget)

    try:
        if art_cols:
            cost1 = np.zeros(ncol)
            cost1[art_cols] = 1.0
            core.run(cost1)
            w = float(core.solution()[art_cols].sum())
            if w > cfg.tol_feas:
                y = core.duals(cost1)
                pi = np.zeros(m0)
                pi[kept] = -y * sigma
                cert = FarkasCertificate(pi / max(float(np.max(np.abs(pi))), 1e-300))
                status = LpStatus.INFEASIBLE
                if certificate_gap(lp, cert.multipliers) <= cfg.tol_cert:
                    status = LpStatus.STALLED
                return LpOutcome(status, certificate=cert, iterations=core.iterations, pivots=core.pivots)
            core.ub[art_cols] = 0.0
        cost2 = np.zeros(ncol)
        cost2[:nf] = c[free]
        state, q, delta = core.run(cost2)
    except _Stalled:
        return LpOutcome(LpStatus.STALLED, iterations=core.iterations, pivots=core.pivots)

    if state == "unbounded":
        dz = np.zeros(ncol)
        dz[q] = -1.0 if core.at_upper[q] else 1.0
        if m:
            dz[core.basis] -= delta
        ray = np.zeros(n)
        ray[free] = dz[:nf]
        return LpOutcome(LpStatus.UNBOUNDED, ray=ray, iterations=core.iterations, pivots=core.pivots)

    z = core.solution()
    x = lo.copy()
    x[free] += np.clip(z[:nf], 0.0, ub[:nf])
    y = np.zeros(m0)
    if m:
        y[kept] = core.duals(cost2) * sigma
    d = c - (A.T @ y if m0 else 0.0)
    return LpOutcome(
        LpStatus.OPTIMAL,
        x=x,
        objective=float(c @ x) + lp.constant,
        duals=y,
        reduced_costs=d,
        iterations=core.iterations,
        pivots=core.pivots,
    )


def dual_objective(lp: LinearProgram, duals: np.ndarray, tol: float = 1e-9) -> float:
    """Lagrangian dual value ``b y + sum_j min over [l_j, u_j] of d_j x_j``.

    Reduced costs within ``tol`` of zero on columns without an upper bound
    count as zero rather than sending the bound to minus infinity.
    """
    A = lp.matrix()
    d = np.asarray(lp.cost) - (A.T @ duals if lp.num_rows else 0.0)
    total = float(lp.rhs() @ duals) + lp.constant
    for j, dj in enumerate(d):
        if dj >= 0 or (math.isinf(lp.upper[j]) and dj > -tol):
            total += dj * lp.lower[j]
        else:
            total += dj * lp.upper[j]
    return total


def solve_lp(lp: LinearProgram, config: LpConfig = LpConfig()) -> LpOutcome:
    """Solve ``lp``; the backend is picked by ``config.backend``."""
    if config.backend == "native":
        return solve_native(lp, config)
    if config.backend == "highs":
        from .highs import solve_highs

        return solve_highs(lp, config)
    raise ValueError(f"unknown LP backend {config.backend!r}")

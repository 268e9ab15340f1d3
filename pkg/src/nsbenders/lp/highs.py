"""HiGHS (via scipy) behind the same outcome contract as the native simplex.

Used for desk-scale batch experiments where the pure-Python simplex is too
slow.  Infeasibility certificates come from the duals of an elastic
phase-one LP, which keeps the certificate contract identical.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .farkas import FarkasCertificate, certificate_gap
from .model import LinearProgram, Sense
from .simplex import LpConfig, LpOutcome, LpStatus


def _split(lp: LinearProgram):
    A = lp.matrix().tocsr()
    b = lp.rhs()
    le = [i for i, r in enumerate(lp.rows) if r.sense is Sense.LE]
    ge = [i for i, r in enumerate(lp.rows) if r.sense is Sense.GE]
    eq = [i for i, r in enumerate(lp.rows) if r.sense is Sense.EQ]
    ub_rows = le + ge
    sign = np.array([1.0] * len(le) + [-1.0] * len(ge))
    A_ub = sp.diags(sign) @ A[ub_rows] if ub_rows else None
    b_ub = sign * b[ub_rows] if ub_rows else None
    A_eq = A[eq] if eq else None
    b_eq = b[eq] if eq else None
    return A_ub, b_ub, A_eq, b_eq, ub_rows, sign, eq


def _bounds(lp: LinearProgram):
    return [(lo, None if math.isinf(up) else up) for lo, up in zip(lp.lower, lp.upper)]


def _phase_one_certificate(lp: LinearProgram) -> np.ndarray:
    """Duals of ``min sum(e)`` over the elastic system, mapped to certificate signs."""
    n = lp.num_vars
    A_ub, b_ub, A_eq, b_eq, ub_rows, sign, eq = _split(lp)
    k_ub, k_eq = len(ub_rows), len(eq)
    parts_ub = [A_ub, -sp.identity(k_ub), sp.csr_matrix((k_ub, 2 * k_eq))] if k_ub else None
    parts_eq = (
        [A_eq, sp.csr_matrix((k_eq, k_ub)), sp.identity(k_eq), -sp.identity(k_eq)] if k_eq else None
    )
    c = np.concatenate([np.zeros(n), np.ones(k_ub + 2 * k_eq)])
    res = linprog(
        c,
        A_ub=sp.hstack(parts_ub).tocsr() if parts_ub else None,
        b_ub=b_ub,
        A_eq=sp.hstack(parts_eq).tocsr() if parts_eq else None,
        b_eq=b_eq,
        bounds=_bounds(lp) + [(0, None)] * (k_ub + 2 * k_eq),
        method="highs",
    )
    pi = np.zeros(lp.num_rows)
    if k_ub:
        pi[ub_rows] = -sign * res.ineqlin.marginals
    if k_eq:
        pi[eq] = -res.eqlin.marginals
    return pi


def solve_highs(lp: LinearProgram, cfg: LpConfig = LpConfig()) -> LpOutcome:
    A_ub, b_ub, A_eq, b_eq, ub_rows, sign, eq = _split(lp)
    c = np.asarray(lp.cost, dtype=float)
    res = linprog(
        c if lp.num_vars else np.zeros(0),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=_bounds(lp),
        method="highs",
    )
    if res.status == 0:
        y = np.zeros(lp.num_rows)
        if ub_rows:
            y[ub_rows] = sign * res.ineqlin.marginals
        if eq:
            y[eq] = res.eqlin.marginals
        x = np.clip(np.asarray(res.x), lp.lower, lp.upper)
        A = lp.matrix()
        return LpOutcome(
            LpStatus.OPTIMAL,
            x=x,
            objective=float(c @ x) + lp.constant,
            duals=y,
            reduced_costs=c - (A.T @ y if lp.num_rows else 0.0),
            iterations=int(res.nit),
        )
    if res.status == 2:
        pi = _phase_one_certificate(lp)
        scale = float(np.max(np.abs(pi), initial=0.0))
        cert = FarkasCertificate(pi / scale if scale > 0 else pi)
        status = LpStatus.INFEASIBLE if certificate_gap(lp, cert.multipliers) > cfg.tol_cert else LpStatus.STALLED
        return LpOutcome(status, certificate=cert, iterations=int(res.nit))
    if res.status == 3:
        return LpOutcome(LpStatus.UNBOUNDED, iterations=int(res.nit))
    return LpOutcome(LpStatus.STALLED, iterations=int(res.nit))

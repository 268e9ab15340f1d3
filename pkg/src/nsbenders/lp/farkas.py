"""Farkas infeasibility certificates and their independent check.

A certificate is one multiplier per row with ``pi >= 0`` on ``<=`` rows,
``pi <= 0`` on ``>=`` rows and free on ``=`` rows.  Every feasible ``x``
then satisfies ``(pi A) x <= pi b``; the certificate proves infeasibility
when the smallest value of ``(pi A) x`` over the variable box already
exceeds ``pi b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LinearProgram, Sense

TOL_CERT = 1e-6
TOL_ZERO = 1e-9


@dataclass(frozen=True)
class FarkasCertificate:
    multipliers: np.ndarray

    def scaled(self, factor: float) -> "FarkasCertificate":
        return FarkasCertificate(self.multipliers * factor)


def certificate_gap(lp: LinearProgram, multipliers, tol_zero: float = TOL_ZERO) -> float:
    """Normalised bound gap ``min_box (pi A) x - pi b``; ``-inf`` when no contradiction is implied.

    ``pi`` is rescaled to unit max-norm first, so the gap does not depend on
    the scale of the ray.
    """
    pi = np.asarray(multipliers, dtype=float)
    if pi.shape != (lp.num_rows,):
        raise ValueError(f"certificate has {pi.size} multipliers for {lp.num_rows} rows")
    scale = float(np.max(np.abs(pi), initial=0.0))
    if not scale > 0 or not math.isfinite(scale):
        return -math.inf
    pi = pi / scale
    for i, row in enumerate(lp.rows):
        if row.sense is Sense.LE and pi[i] < 0:
            if pi[i] < -tol_zero:
                return -math.inf
            pi[i] = 0.0
        elif row.sense is Sense.GE and pi[i] > 0:
            if pi[i] > tol_zero:
                return -math.inf
            pi[i] = 0.0
    g = np.zeros(lp.num_vars)
    for i, row in enumerate(lp.rows):
        if pi[i] != 0.0:
            for j, a in row.coefs.items():
                g[j] += pi[i] * a
    low = 0.0
    for j in range(lp.num_vars):
        gj = g[j]
        if gj >= 0:
            low += gj * lp.lower[j]
        elif math.isinf(lp.upper[j]):
            if gj < -tol_zero:
                return -math.inf
            low += gj * lp.lower[j]
        else:
            low += gj * lp.upper[j]
    return low - float(np.dot(pi, lp.rhs()))


def verify_certificate(lp: LinearProgram, cert, tol_cert: float = TOL_CERT, tol_zero: float = TOL_ZERO) -> bool:
    """True iff ``cert`` proves that ``lp`` has no feasible point.

    Pure recomputation from the rows and bounds; shares nothing with the simplex code.
    """
    multipliers = cert.multipliers if isinstance(cert, FarkasCertificate) else cert
    return certificate_gap(lp, multipliers, tol_zero) > tol_cert

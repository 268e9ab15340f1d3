"""Linear programming kernel: model records, simplex solver, Farkas certificates."""
from .farkas import FarkasCertificate, certificate_gap, verify_certificate
from .lpformat import to_lp_format, write_lp
from .model import LinearProgram, Row, Sense
from .simplex import LpConfig, LpOutcome, LpStatus, dual_objective, solve_lp

__all__ = [
    "FarkasCertificate",
    "LinearProgram",
    "LpConfig",
    "LpOutcome",
    "LpStatus",
    "Row",
    "Sense",
    "certificate_gap",
    "dual_objective",
    "solve_lp",
    "to_lp_format",
    "verify_certificate",
    "write_lp",
]

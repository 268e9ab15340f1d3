"""Network slicing by decomposition: a placement master strengthened with
connectivity and link-capacity inequalities, plus routing feasibility cuts."""
from .benders import CbdConfig, CbdResult, CbdStatus, gap_improvement, solve_cbd
from .formulations import BendersCut, FpVariant, build_fp, build_ns, build_tr, materialize_cut
from .instance import INF, GeneratorConfig, Instance, generate, load, save, validate

__version__ = "0.1.0"

__all__ = [
    "INF",
    "BendersCut",
    "CbdConfig",
    "CbdResult",
    "CbdStatus",
    "FpVariant",
    "GeneratorConfig",
    "Instance",
    "build_fp",
    "build_ns",
    "build_tr",
    "gap_improvement",
    "generate",
    "load",
    "materialize_cut",
    "save",
    "solve_cbd",
    "validate",
]

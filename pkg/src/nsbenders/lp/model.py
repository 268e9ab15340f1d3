"""Solver-agnostic linear program records."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp


class Sense(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass
class Row:
    coefs: dict[int, float]
    sense: Sense
    rhs: float
    name: str = ""


@dataclass
class LinearProgram:
    """``minimize c x + constant`` subject to sparse rows and ``lower <= x <= upper``.

    Lower bounds must be finite; upper bounds may be ``math.inf``.
    """

    names: list[str] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    constant: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf, cost: float = 0.0) -> int:
        if not math.isfinite(lower):
            raise ValueError(f"variable {name}: lower bound must be finite")
        if upper < lower:
            raise ValueError(f"variable {name}: empty bounds [{lower}, {upper}]")
        self.names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.cost.append(float(cost))
        return len(self.names) - 1

    def add_row(self, coefs: Mapping[int, float], sense: Sense | str, rhs: float, name: str = "") -> int:
        if not math.isfinite(rhs):
            raise ValueError(f"row {name}: rhs must be finite")
        merged: dict[int, float] = {}
        for j, a in coefs.items():
            if not 0 <= j < self.num_vars:
                raise IndexError(f"row {name}: unknown variable {j}")
            if a != 0.0:
                merged[j] = merged.get(j, 0.0) + float(a)
        self.rows.append(Row(merged, Sense(sense), float(rhs), name or f"r{len(self.rows)}"))
        return len(self.rows) - 1

    def with_bounds(self, lower, upper) -> "LinearProgram":
        """Same rows and costs, new bounds; shares the cached matrix."""
        return LinearProgram(self.names, list(lower), list(upper), self.cost, self.rows, self.constant, self._cache)

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            list(self.names),
            list(self.lower),
            list(self.upper),
            list(self.cost),
            [Row(dict(r.coefs), r.sense, r.rhs, r.name) for r in self.rows],
            self.constant,
        )

    # dense/sparse views -----------------------------------------------------

    def matrix(self) -> sp.csr_matrix:
        key = (self.num_rows, self.num_vars)
        cached = self._cache.get("matrix")
        if cached is not None and cached[0] == key:
            return cached[1]
        data, ri, ci = [], [], []
        for i, row in enumerate(self.rows):
            for j, a in row.coefs.items():
                ri.append(i)
                ci.append(j)
                data.append(a)
        A = sp.csr_matrix((data, (ri, ci)), shape=key)
        self._cache["matrix"] = (key, A)
        return A

    def rhs(self) -> np.ndarray:
        return np.array([r.rhs for r in self.rows], dtype=float)

    def senses(self) -> list[Sense]:
        return [r.sense for r in self.rows]

    def objective_value(self, x) -> float:
        return float(np.dot(self.cost, x)) + self.constant

    def max_violation(self, x) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        lo, up = np.asarray(self.lower), np.asarray(self.upper)
        if x.size:
            worst = max(worst, float(np.max(lo - x, initial=0.0)), float(np.max(x - up, initial=0.0)))
        for row in self.rows:
            lhs = sum(a * x[j] for j, a in row.coefs.items())
            if row.sense is Sense.LE:
                worst = max(worst, lhs - row.rhs)
            elif row.sense is Sense.GE:
                worst = max(worst, row.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - row.rhs))
        return worst

"""Export to the CPLEX LP text format for cross-checking with external solvers.

Layout written::

    \\ name
    Minimize
     obj: 3 x0 - 2 x1 + 0 x2
    Subject To
     r0: x0 + x1 <= 4
    Bounds
     0 <= x0 <= 1
     x1 >= 0
    Binaries
     x0
    End

Variable names are sanitised to ``[A-Za-z0-9_.]``; the objective constant
is emitted as a comment because the format has no portable slot for it.
"""
from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Iterable

from ..instance import format_number
from .model import LinearProgram, Sense

_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _name(raw: str, j: int) -> str:
    clean = _BAD.sub("_", raw) or f"v{j}"
    if clean[0].isdigit() or clean[0] in "eE.":
        clean = "v_" + clean
    return clean


def _terms(coefs: Iterable[tuple[int, float]], names: list[str]) -> str:
    parts = []
    for j, a in coefs:
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {format_number(abs(a))} {names[j]}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[1:]


def to_lp_format(lp: LinearProgram, binaries: Iterable[int] = (), title: str = "") -> str:
    names = []
    seen: set[str] = set()
    for j, raw in enumerate(lp.names):
        nm = _name(raw, j)
        while nm in seen:
            nm += "_"
        seen.add(nm)
        names.append(nm)
    out = [f"\\ {title}" if title else "\\ nsbenders export"]
    if lp.constant:
        out.append(f"\\ objective constant {format_number(lp.constant)}")
    out.append("Minimize")
    out.append(" obj: " + _terms(((j, c) for j, c in enumerate(lp.cost) if c), names))
    out.append("Subject To")
    ops = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for i, row in enumerate(lp.rows):
        label = _name(row.name, i) if row.name else f"r{i}"
        out.append(f" {label}: {_terms(sorted(row.coefs.items()), names)} {ops[row.sense]} {format_number(row.rhs)}")
    out.append("Bounds")
    for j in range(lp.num_vars):
        lo, up = lp.lower[j], lp.upper[j]
        if lo == up:
            out.append(f" {names[j]} = {format_number(lo)}")
        elif math.isinf(up):
            out.append(f" {names[j]} >= {format_number(lo)}")
        else:
            out.append(f" {format_number(lo)} <= {names[j]} <= {format_number(up)}")
    bins = sorted(set(binaries))
    if bins:
        out.append("Binaries")
        out.extend(f" {names[j]}" for j in bins)
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(lp: LinearProgram, path: str | Path, binaries: Iterable[int] = (), title: str = "") -> None:
    Path(path).write_text(to_lp_format(lp, binaries, title), encoding="utf-8")

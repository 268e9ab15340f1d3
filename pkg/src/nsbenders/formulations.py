"""Optimization models built from an instance, plus feasibility cuts.

Three models share one variable vocabulary:

* the full mixed-binary model (placement ``x``, activation ``y``, routing ``r``),
* the placement master in three strengths (plain, with connectivity rows,
  with connectivity and link-capacity rows),
* the routing LP for a fixed placement.

The right-hand side of flow conservation, which is affine in ``x``, is
produced by :func:`flow_balance` and consumed by both the full model (as
``x`` coefficients) and the routing LP (evaluated at a placement).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .instance import INF, Instance, Service, add_capacities, capacity_value
from .lp import FarkasCertificate, LinearProgram, Sense, certificate_gap
from .lp.farkas import TOL_CERT
from .milp import MixedBinaryProgram
from .reachability import UnreachableSets, compute_unreachable

# (service id, stage s, cloud v): stage s of service k hosted on v
XKey = tuple[str, int, str]
# (service id, flow s, tail, head)
RKey = tuple[str, int, str, str]
# stage (k, s) -> hosting cloud
Placement = Mapping[tuple[str, int], str]


class FpVariant(enum.Enum):
    FP = "fp"
    FP_I = "fp1"
    FP_II = "fp2"


@dataclass
class VariableCatalog:
    x: dict[XKey, int] = field(default_factory=dict)
    y: dict[str, int] = field(default_factory=dict)
    r: dict[RKey, int] = field(default_factory=dict)
    z: dict[XKey, int] = field(default_factory=dict)
    w: dict[XKey, int] = field(default_factory=dict)

    def activated(self, values, tol: float = 0.5) -> list[str]:
        return [v for v, j in self.y.items() if values[j] > tol]

    def routing(self, values, tol: float = 1e-12) -> dict[RKey, float]:
        return {key: float(values[j]) for key, j in self.r.items() if values[j] > tol}


# ------------------------------------------------------------ flow balance


@dataclass(frozen=True)
class AffineForm:
    """``constant + sum(coef * x[key])``."""

    constant: float = 0.0
    terms: tuple[tuple[XKey, float], ...] = ()

    def at(self, placement: Placement) -> float:
        return self.constant + sum(c for (k, s, v), c in self.terms if placement.get((k, s)) == v)


def flow_balance(svc: Service, s: int, node: str, clouds: frozenset[str] | set[str]) -> AffineForm:
    """Inflow minus outflow required of flow ``s`` of ``svc`` at ``node``.

    Flow ``s`` runs from the host of stage ``s`` (the source when ``s = 0``)
    to the host of stage ``s + 1`` (the destination when ``s`` is the last).
    A term is emitted only when the stage is allowed on ``node``; forbidden
    placements are identically zero.
    """
    ell = svc.length
    const = 0.0
    terms: list[tuple[XKey, float]] = []
    if s == 0 and node == svc.source:
        const -= 1.0
    if s == ell and node == svc.destination:
        const += 1.0
    if node in clouds:
        if s < ell and svc.stage(s + 1).allowed(node):
            terms.append(((svc.id, s + 1, node), 1.0))
        if s >= 1 and svc.stage(s).allowed(node):
            terms.append(((svc.id, s, node), -1.0))
    return AffineForm(const, tuple(terms))


# ------------------------------------------------------------- full model


def _add_placement(lp: LinearProgram, cat: VariableCatalog, instance: Instance, blocked=None) -> None:
    net = instance.network
    for c in net.clouds:
        cat.y[c.node] = lp.add_var(f"y[{c.node}]", 0.0, 1.0, c.power)
    for svc, s in instance.stages():
        stage = svc.stage(s)
        skip = blocked.blocked(svc.id) if blocked is not None else frozenset()
        for v in net.cloud_ids:
            if stage.allowed(v) and v not in skip:
                cat.x[(svc.id, s, v)] = lp.add_var(f"x[{v},{svc.id},{s}]", 0.0, 1.0, stage.costs[v])


def _add_placement_rows(lp: LinearProgram, cat: VariableCatalog, instance: Instance) -> None:
    net = instance.network
    for svc, s in instance.stages():
        ids = [cat.x[(svc.id, s, v)] for v in net.cloud_ids if (svc.id, s, v) in cat.x]
        lp.add_row({j: 1.0 for j in ids}, Sense.EQ, 1.0, f"assign[{svc.id},{s}]")
    for (k, s, v), j in cat.x.items():
        lp.add_row({j: 1.0, cat.y[v]: -1.0}, Sense.LE, 0.0, f"open[{v},{k},{s}]")
    for c in net.clouds:
        if c.capacity is INF:
            continue
        coefs = {j: instance.service(k).rate(s) for (k, s, v), j in cat.x.items() if v == c.node}
        coefs[cat.y[c.node]] = -float(c.capacity)
        lp.add_row(coefs, Sense.LE, 0.0, f"node_cap[{c.node}]")


def build_ns(instance: Instance) -> tuple[MixedBinaryProgram, VariableCatalog]:
    """Joint placement and routing model."""
    lp = LinearProgram()
    cat = VariableCatalog()
    net = instance.network
    _add_placement(lp, cat, instance)
    for svc, s in instance.flows():
        for l in net.links:
            cat.r[(svc.id, s, l.tail, l.head)] = lp.add_var(f"r[{l.tail},{l.head},{svc.id},{s}]")
    _add_placement_rows(lp, cat, instance)
    for l in net.links:
        if l.capacity is INF:
            continue
        coefs = {
            cat.r[(svc.id, s, l.tail, l.head)]: svc.rate(s) for svc, s in instance.flows()
        }
        lp.add_row(coefs, Sense.LE, float(l.capacity), f"link_cap[{l.tail},{l.head}]")
    clouds = set(net.cloud_ids)
    for svc, s in instance.flows():
        for i in net.nodes:
            form = flow_balance(svc, s, i, clouds)
            coefs: dict[int, float] = {}
            for l in net.in_links(i):
                coefs[cat.r[(svc.id, s, l.tail, l.head)]] = 1.0
            for l in net.out_links(i):
                coefs[cat.r[(svc.id, s, l.tail, l.head)]] = -1.0
            for key, c in form.terms:
                coefs[cat.x[key]] = coefs.get(cat.x[key], 0.0) - c
            lp.add_row(coefs, Sense.EQ, form.constant, f"balance[{i},{svc.id},{s}]")
    binaries = list(cat.y.values()) + list(cat.x.values())
    return MixedBinaryProgram(lp, binaries, _activation_first(cat)), cat


# ----------------------------------------------------------- placement master


def build_fp(
    instance: Instance, variant: FpVariant = FpVariant.FP, reach: UnreachableSets | None = None
) -> tuple[MixedBinaryProgram, VariableCatalog]:
    """Placement master of the requested strength."""
    if variant is not FpVariant.FP and reach is None:
        reach = compute_unreachable(instance)
    lp = LinearProgram()
    cat = VariableCatalog()
    strong = variant is not FpVariant.FP
    _add_placement(lp, cat, instance, reach if strong else None)
    if variant is FpVariant.FP_II:
        _add_linearization_vars(lp, cat, instance)
    _add_placement_rows(lp, cat, instance)
    if strong:
        _add_connectivity_rows(lp, cat, instance, reach)
    if variant is FpVariant.FP_II:
        _add_link_capacity_rows(lp, cat, instance)
    binaries = list(cat.y.values()) + list(cat.x.values()) + list(cat.z.values()) + list(cat.w.values())
    return MixedBinaryProgram(lp, binaries, _activation_first(cat)), cat


def _activation_first(cat: VariableCatalog) -> dict[int, int]:
    """Branch on cloud activation, then placement, then the linearization binaries."""
    prio = {j: 2 for j in cat.y.values()}
    prio.update({j: 1 for j in cat.x.values()})
    return prio


def _add_connectivity_rows(lp, cat, instance: Instance, reach: UnreachableSets) -> None:
    """The set of clouds able to host stage s+1 must cover the one hosting stage s."""
    clouds = instance.network.cloud_ids
    for svc in instance.services:
        for s in range(1, svc.length):
            seen = set()
            for v0 in clouds:
                cut_off = reach.from_cloud[v0]
                if not cut_off:
                    continue
                keep = tuple(v for v in clouds if v not in cut_off)
                if keep in seen:
                    continue
                seen.add(keep)
                coefs: dict[int, float] = {}
                for v in keep:
                    if (svc.id, s, v) in cat.x:
                        coefs[cat.x[(svc.id, s, v)]] = coefs.get(cat.x[(svc.id, s, v)], 0.0) + 1.0
                    if (svc.id, s + 1, v) in cat.x:
                        coefs[cat.x[(svc.id, s + 1, v)]] = coefs.get(cat.x[(svc.id, s + 1, v)], 0.0) - 1.0
                lp.add_row(coefs, Sense.LE, 0.0, f"reach[{v0},{svc.id},{s}]")


def _capacity_rows_needed(instance: Instance) -> tuple[set[str], set[str]]:
    net = instance.network
    into = {c.node for c in net.clouds if add_capacities(l.capacity for l in net.in_links(c.node)) is not INF}
    out = {c.node for c in net.clouds if add_capacities(l.capacity for l in net.out_links(c.node)) is not INF}
    return into, out


def _add_linearization_vars(lp, cat, instance: Instance) -> None:
    """``z`` marks a stage change entering ``v``, ``w`` one leaving ``v``."""
    into, out = _capacity_rows_needed(instance)
    for svc in instance.services:
        for s in range(1, svc.length):
            for v in instance.network.cloud_ids:
                if v in into and (svc.id, s + 1, v) in cat.x:
                    cat.z[(svc.id, s, v)] = lp.add_var(f"z[{v},{svc.id},{s}]", 0.0, 1.0)
                if v in out and (svc.id, s, v) in cat.x:
                    cat.w[(svc.id, s, v)] = lp.add_var(f"w[{v},{svc.id},{s}]", 0.0, 1.0)


def _add_link_capacity_rows(lp, cat, instance: Instance) -> None:
    net = instance.network
    for (k, s, v), j in cat.z.items():
        coefs = {j: 1.0, cat.x[(k, s + 1, v)]: -1.0}
        if (k, s, v) in cat.x:
            coefs[cat.x[(k, s, v)]] = 1.0
        lp.add_row(coefs, Sense.GE, 0.0, f"enter[{v},{k},{s}]")
    for (k, s, v), j in cat.w.items():
        coefs = {j: 1.0, cat.x[(k, s, v)]: -1.0}
        if (k, s + 1, v) in cat.x:
            coefs[cat.x[(k, s + 1, v)]] = 1.0
        lp.add_row(coefs, Sense.GE, 0.0, f"leave[{v},{k},{s}]")
    into, out = _capacity_rows_needed(instance)
    for c in net.clouds:
        v = c.node
        if v in into:
            coefs = {}
            for svc in instance.services:
                if (svc.id, 1, v) in cat.x:
                    coefs[cat.x[(svc.id, 1, v)]] = svc.rate(0)
                for s in range(1, svc.length):
                    if (svc.id, s, v) in cat.z:
                        coefs[cat.z[(svc.id, s, v)]] = svc.rate(s)
            cap = capacity_value(add_capacities(l.capacity for l in net.in_links(v)))
            coefs[cat.y[v]] = -cap
            lp.add_row(coefs, Sense.LE, 0.0, f"in_cap[{v}]")
        if v in out:
            coefs = {}
            for svc in instance.services:
                ell = svc.length
                if (svc.id, ell, v) in cat.x:
                    coefs[cat.x[(svc.id, ell, v)]] = svc.rate(ell)
                for s in range(1, ell):
                    if (svc.id, s, v) in cat.w:
                        coefs[cat.w[(svc.id, s, v)]] = svc.rate(s)
            cap = capacity_value(add_capacities(l.capacity for l in net.out_links(v)))
            coefs[cat.y[v]] = -cap
            lp.add_row(coefs, Sense.LE, 0.0, f"out_cap[{v}]")


# ------------------------------------------------------------- routing LP


class PlacementError(ValueError):
    pass


@dataclass
class RoutingLp:
    lp: LinearProgram
    catalog: VariableCatalog
    placement: dict[tuple[str, int], str]
    link_rows: dict[tuple[str, str], int]
    balance_rows: dict[tuple[str, int, str], int]


def check_placement(instance: Instance, placement: Placement) -> None:
    """Every stage on exactly one cloud that may host it."""
    expected = {(svc.id, s) for svc, s in instance.stages()}
    extra = set(placement) - expected
    if extra:
        raise PlacementError(f"unknown stages {sorted(extra)}")
    missing = expected - set(placement)
    if missing:
        raise PlacementError(f"stages without a host: {sorted(missing)}")
    clouds = set(instance.network.cloud_ids)
    for (k, s), v in placement.items():
        if v not in clouds:
            raise PlacementError(f"stage ({k}, {s}) placed on non-cloud node {v!r}")
        if not instance.service(k).stage(s).allowed(v):
            raise PlacementError(f"stage ({k}, {s}) cannot run on {v!r}")


def placement_from_vector(instance: Instance, cat: VariableCatalog, values) -> dict[tuple[str, int], str]:
    """Placement encoded by a binary vector; raises if a stage has no or several hosts."""
    chosen: dict[tuple[str, int], list[str]] = {}
    for (k, s, v), j in cat.x.items():
        if values[j] > 0.5:
            chosen.setdefault((k, s), []).append(v)
    out = {}
    for svc, s in instance.stages():
        hosts = chosen.get((svc.id, s), [])
        if len(hosts) != 1:
            raise PlacementError(f"stage ({svc.id}, {s}) has hosts {hosts}")
        out[(svc.id, s)] = hosts[0]
    return out


def build_tr(instance: Instance, placement: Placement) -> RoutingLp:
    """Feasibility LP for routing all flows under a fixed placement."""
    check_placement(instance, placement)
    net = instance.network
    lp = LinearProgram()
    cat = VariableCatalog()
    for svc, s in instance.flows():
        for l in net.links:
            cat.r[(svc.id, s, l.tail, l.head)] = lp.add_var(f"r[{l.tail},{l.head},{svc.id},{s}]")
    link_rows = {}
    for l in net.links:
        if l.capacity is INF:
            continue
        coefs = {cat.r[(svc.id, s, l.tail, l.head)]: svc.rate(s) for svc, s in instance.flows()}
        link_rows[(l.tail, l.head)] = lp.add_row(coefs, Sense.LE, float(l.capacity), f"link_cap[{l.tail},{l.head}]")
    balance_rows = {}
    clouds = set(net.cloud_ids)
    for svc, s in instance.flows():
        for i in net.nodes:
            coefs: dict[int, float] = {}
            for l in net.in_links(i):
                coefs[cat.r[(svc.id, s, l.tail, l.head)]] = 1.0
            for l in net.out_links(i):
                coefs[cat.r[(svc.id, s, l.tail, l.head)]] = -1.0
            rhs = flow_balance(svc, s, i, clouds).at(placement)
            balance_rows[(svc.id, s, i)] = lp.add_row(coefs, Sense.EQ, rhs, f"balance[{i},{svc.id},{s}]")
    return RoutingLp(lp, cat, dict(placement), link_rows, balance_rows)


# ------------------------------------------------------------------ cuts


class CutError(RuntimeError):
    """A certificate did not yield a cut that removes the placement it came from."""

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class BendersCut:
    """``sum(coef * x[key]) + constant >= 0`` over placement variables."""

    coefs: dict[XKey, float]
    constant: float
    iteration: int = 0
    certificate_id: str = ""

    def lhs(self, placement: Placement) -> float:
        return self.constant + sum(c for (k, s, v), c in self.coefs.items() if placement.get((k, s)) == v)

    def lhs_vector(self, cat: VariableCatalog, values) -> float:
        total = self.constant
        for key, c in self.coefs.items():
            j = cat.x.get(key)
            if j is not None:
                total += c * values[j]
        return total

    @property
    def nnz(self) -> int:
        return len(self.coefs)

    def scaled(self, factor: float) -> "BendersCut":
        return BendersCut(
            {k: c * factor for k, c in self.coefs.items()}, self.constant * factor, self.iteration, self.certificate_id
        )


def materialize_cut(
    instance: Instance,
    tr: RoutingLp,
    certificate: FarkasCertificate,
    iteration: int = 0,
    certificate_id: str = "",
    tol_cert: float = TOL_CERT,
    tol_coef: float = 1e-12,
) -> BendersCut:
    """Turn an infeasibility certificate of the routing LP into a cut in ``x``.

    The cut says that the capacity-weighted link multipliers plus the
    balance multipliers applied to the placement-dependent right-hand side
    must be nonnegative; at the placement that produced the certificate the
    left-hand side equals ``pi b`` which the certificate makes negative.
    """
    pi = np.asarray(certificate.multipliers, dtype=float)
    gap = certificate_gap(tr.lp, pi)
    if not gap > tol_cert:
        raise CutError(f"certificate fails verification (gap {gap})", certificate)
    scale = float(np.max(np.abs(pi)))
    pi = pi / scale
    net = instance.network
    constant = 0.0
    for (i, j), row in tr.link_rows.items():
        alpha = max(float(pi[row]), 0.0)
        constant += alpha * tr.lp.rows[row].rhs
    coefs: dict[XKey, float] = {}
    clouds = set(net.cloud_ids)
    for (k, s, i), row in tr.balance_rows.items():
        beta = float(pi[row])
        if beta == 0.0:
            continue
        form = flow_balance(instance.service(k), s, i, clouds)
        constant += beta * form.constant
        for key, c in form.terms:
            coefs[key] = coefs.get(key, 0.0) + beta * c
    coefs = {key: c for key, c in coefs.items() if abs(c) > tol_coef}
    cut = BendersCut(coefs, constant, iteration, certificate_id)
    at = cut.lhs(tr.placement)
    if not at < -tol_cert:
        raise CutError(f"cut does not remove its placement (lhs {at:.3g})", certificate)
    return cut


def add_cut(p: MixedBinaryProgram, cat: VariableCatalog, cut: BendersCut, name: str = "") -> int:
    """Append ``cut`` as a row; variables fixed out of the model contribute zero."""
    coefs = {cat.x[key]: c for key, c in cut.coefs.items() if key in cat.x}
    return p.lp.add_row(coefs, Sense.GE, -cut.constant, name or f"cut[{cut.iteration}]")


def placement_cost(instance: Instance, placement: Placement) -> float:
    """Objective of a placement: placement costs plus power of every used cloud."""
    used = set(placement.values())
    power = sum(c.power for c in instance.network.clouds if c.node in used)
    return power + sum(instance.service(k).stage(s).costs[v] for (k, s), v in placement.items())


def node_loads_ok(instance: Instance, placement: Placement, tol: float = 1e-9) -> bool:
    """Whether the hosted rates respect every finite node capacity."""
    load: dict[str, float] = {}
    for (k, s), v in placement.items():
        load[v] = load.get(v, 0.0) + instance.service(k).rate(s)
    for c in instance.network.clouds:
        if c.capacity is not INF and load.get(c.node, 0.0) > float(c.capacity) + tol:
            return False
    return True


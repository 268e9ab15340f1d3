"""Shared test fixtures: tiny random instances and the three connectivity families.

The families are written here on purpose, independently of the production
master: ``simple`` forbids the first/last stage on unreachable clouds and
consecutive stages on mutually unreachable pairs, ``pairwise`` extends the
fixings to every stage and the pair rule to every later stage, and
``aggregated`` is the fixings plus the covering rows the production master
uses.
"""
from __future__ import annotations

import itertools

from nsbenders.instance import GeneratorConfig, Instance, generate
from nsbenders.lp import LinearProgram, Sense
from nsbenders.reachability import compute_unreachable


def tiny_config(seed: int, infinite_links: bool = False) -> GeneratorConfig:
    """At most 3 clouds, 3 services and chains of length 2 (oracle-sized)."""
    return GeneratorConfig(
        nodes=6,
        clouds=3,
        services=1 + seed % 3,
        chain_length=(1, 2),
        function_pool=3,
        functions_per_cloud=2,
        cloud_capacity=(10, 40),
        link_capacity=None if infinite_links else (5, 30),
        rates=(1, 10),
        same_rate=seed % 2 == 0,
        activation_power=(1, 20),
        placement_cost=(1, 5),
        radius=0.6,
        removal_prob=0.3,
        seed=seed,
    )


def tiny_instance(seed: int, infinite_links: bool = False) -> Instance:
    return generate(tiny_config(seed, infinite_links))


def small_config(seed: int) -> GeneratorConfig:
    """A little larger than tiny, with sparse links so reachability matters."""
    return GeneratorConfig(
        nodes=8,
        clouds=4,
        services=1 + seed % 3,
        chain_length=(2, 3),
        function_pool=4,
        functions_per_cloud=3,
        cloud_capacity=(20, 60),
        link_capacity=(5, 40),
        rates=(1, 10),
        radius=0.5,
        removal_prob=0.35,
        seed=seed,
    )


# ---------------------------------------------------------------- families


def connectivity_rows(instance: Instance, family: str) -> list[tuple[dict, Sense, float]]:
    """Rows over placement keys ``(k, s, v)`` for one connectivity family."""
    reach = compute_unreachable(instance)
    clouds = instance.network.cloud_ids
    rows: list[tuple[dict, Sense, float]] = []
    for svc in instance.services:
        k, ell = svc.id, svc.length
        v_s, v_d = reach.from_source[k], reach.to_destination[k]
        if family == "simple":
            rows += [({(k, 1, v): 1.0}, Sense.EQ, 0.0) for v in sorted(v_s)]
            rows += [({(k, ell, v): 1.0}, Sense.EQ, 0.0) for v in sorted(v_d)]
            for s in range(1, ell):
                for v0 in clouds:
                    for v in sorted(reach.from_cloud[v0]):
                        rows.append(({(k, s, v0): 1.0, (k, s + 1, v): 1.0}, Sense.LE, 1.0))
            continue
        for s in range(1, ell + 1):
            rows += [({(k, s, v): 1.0}, Sense.EQ, 0.0) for v in sorted(v_s | v_d)]
        if family == "pairwise":
            for s in range(1, ell):
                for s0 in range(s + 1, ell + 1):
                    for v0 in clouds:
                        for v in sorted(reach.from_cloud[v0]):
                            rows.append(({(k, s, v0): 1.0, (k, s0, v): 1.0}, Sense.LE, 1.0))
        elif family == "aggregated":
            for s in range(1, ell):
                for v0 in clouds:
                    if not reach.from_cloud[v0]:
                        continue
                    keep = [v for v in clouds if v not in reach.from_cloud[v0]]
                    coefs: dict = {}
                    for v in keep:
                        coefs[(k, s, v)] = coefs.get((k, s, v), 0.0) + 1.0
                        coefs[(k, s + 1, v)] = coefs.get((k, s + 1, v), 0.0) - 1.0
                    rows.append((coefs, Sense.LE, 0.0))
        else:
            raise ValueError(family)
    return rows


def add_family(lp: LinearProgram, xcols: dict, rows) -> None:
    """Append family rows to a model whose placement columns are ``xcols``; absent keys are zero."""
    for coefs, sense, rhs in rows:
        mapped = {xcols[key]: c for key, c in coefs.items() if key in xcols}
        lp.add_row(mapped, sense, rhs)


def satisfies(rows, x: dict, tol: float = 1e-9) -> bool:
    for coefs, sense, rhs in rows:
        lhs = sum(c * x.get(key, 0.0) for key, c in coefs.items())
        if sense is Sense.EQ and abs(lhs - rhs) > tol:
            return False
        if sense is Sense.LE and lhs > rhs + tol:
            return False
        if sense is Sense.GE and lhs < rhs - tol:
            return False
    return True


def assignment_model(instance: Instance) -> tuple[LinearProgram, dict]:
    """``x`` over every (stage, cloud) pair with one cloud per stage, box [0, 1]."""
    lp = LinearProgram()
    cols = {}
    for svc, s in instance.stages():
        for v in instance.network.cloud_ids:
            cols[(svc.id, s, v)] = lp.add_var(f"x[{v},{svc.id},{s}]", 0.0, 1.0)
    for svc, s in instance.stages():
        lp.add_row({cols[(svc.id, s, v)]: 1.0 for v in instance.network.cloud_ids}, Sense.EQ, 1.0)
    return lp, cols


def binary_assignments(instance: Instance):
    """Every binary ``x`` with exactly one cloud per stage."""
    stages = [(svc.id, s) for svc, s in instance.stages()]
    clouds = instance.network.cloud_ids
    for combo in itertools.product(clouds, repeat=len(stages)):
        yield {(k, s, v): 1.0 for (k, s), v in zip(stages, combo)}

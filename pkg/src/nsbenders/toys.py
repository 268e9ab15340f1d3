"""The two small networks used as worked examples throughout the tests and docs."""
from __future__ import annotations

from .instance import INF, Instance, Service, Stage, build_instance


def chain_example() -> Instance:
    """Line network S -> 1 -> 2 -> 3 -> D with three cloud nodes.

    One service with chain f1 -> f2 at rate 2.  Node 3 holds only 3 units,
    and placing f1 on nodes 1 or 2 costs 1 (everything else is free), so the
    optimum is 1.  Link capacities are unlimited.
    """
    links = [("S", "1", INF), ("1", "2", INF), ("2", "3", INF), ("3", "D", INF)]
    clouds = [("1", INF, 0.0), ("2", INF, 0.0), ("3", 3.0, 0.0)]
    svc = Service(
        "k1",
        "S",
        "D",
        2.0,
        (
            Stage("f1", 2.0, {"1": 1.0, "2": 1.0, "3": 0.0}),
            Stage("f2", 2.0, {"1": 0.0, "2": 0.0, "3": 0.0}),
        ),
    )
    return build_instance(["S", "1", "2", "3", "D"], links, clouds, [svc], name="chain-example")


def diamond_example() -> Instance:
    """Diamond A -> {B, C} -> D where link capacities, not node capacities, bind.

    Two unit-rate single-function services from A to D; activating B costs
    1 and C costs 2.  Only one service fits through each cloud, so the
    optimum is 3.
    """
    links = [("A", "B", 1.0), ("A", "C", 2.0), ("B", "D", 2.0), ("C", "D", 1.0)]
    clouds = [("B", 2.0, 1.0), ("C", 2.0, 2.0)]
    services = [
        Service(k, "A", "D", 1.0, (Stage("f", 1.0, {"B": 0.0, "C": 0.0}),)) for k in ("k1", "k2")
    ]
    return build_instance(["A", "B", "C", "D"], links, clouds, services, name="diamond-example")

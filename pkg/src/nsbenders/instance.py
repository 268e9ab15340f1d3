"""Network-slicing problem instances: data model, validation, generation and JSON I/O."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

SCHEMA_VERSION = 1


class Unlimited(enum.Enum):
    """Marker for an infinite node or link capacity."""

    INF = "inf"

    def __repr__(self) -> str:
        return "INF"


INF = Unlimited.INF
Capacity = Union[float, Unlimited]


def is_unlimited(value: Capacity) -> bool:
    return value is INF


def capacity_value(value: Capacity) -> float:
    """Numeric view of a capacity (``math.inf`` for unlimited)."""
    return math.inf if value is INF else float(value)


def add_capacities(values: Iterable[Capacity]) -> Capacity:
    total = 0.0
    for v in values:
        if v is INF:
            return INF
        total += v
    return total


@dataclass(frozen=True)
class Link:
    tail: str
    head: str
    capacity: Capacity


@dataclass(frozen=True)
class CloudNode:
    node: str
    capacity: Capacity
    power: float


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    links: tuple[Link, ...]
    clouds: tuple[CloudNode, ...]

    @property
    def cloud_ids(self) -> tuple[str, ...]:
        return tuple(c.node for c in self.clouds)

    def cloud(self, node: str) -> CloudNode:
        for c in self.clouds:
            if c.node == node:
                return c
        raise KeyError(node)

    def in_links(self, node: str) -> list[Link]:
        return [l for l in self.links if l.head == node]

    def out_links(self, node: str) -> list[Link]:
        return [l for l in self.links if l.tail == node]


@dataclass(frozen=True)
class Stage:
    """One function of a chain.

    ``costs`` maps each cloud node able to run the function to its placement
    cost; clouds absent from the map cannot host it.
    """

    function: str
    rate: float
    costs: Mapping[str, float]

    def allowed(self, cloud: str) -> bool:
        return cloud in self.costs


@dataclass(frozen=True)
class Service:
    id: str
    source: str
    destination: str
    rate_in: float
    chain: tuple[Stage, ...]

    @property
    def length(self) -> int:
        return len(self.chain)

    def rate(self, s: int) -> float:
        """Data rate of flow ``s`` (0 = before the first function)."""
        return self.rate_in if s == 0 else self.chain[s - 1].rate

    def stage(self, s: int) -> Stage:
        """Stage ``s`` with 1-based indexing, matching flow numbering."""
        return self.chain[s - 1]


@dataclass(frozen=True)
class Instance:
    network: Network
    services: tuple[Service, ...] = ()
    name: str = ""

    def service(self, k: str) -> Service:
        for svc in self.services:
            if svc.id == k:
                return svc
        raise KeyError(k)

    def stages(self) -> Iterator[tuple[Service, int]]:
        """Iterate (service, s) for every function s = 1..len of every service."""
        for svc in self.services:
            for s in range(1, svc.length + 1):
                yield svc, s

    def flows(self) -> Iterator[tuple[Service, int]]:
        """Iterate (service, s) for every flow s = 0..len of every service."""
        for svc in self.services:
            for s in range(0, svc.length + 1):
                yield svc, s


# ---------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def add(self, message: str) -> None:
        self.violations.append(message)


def _check_capacity(report: ValidationReport, what: str, value) -> None:
    if value is INF:
        return
    if not isinstance(value, (int, float)) or math.isnan(value) or value < 0 or math.isinf(value):
        report.add(f"{what}: capacity must be a finite number >= 0 or INF, got {value!r}")


def validate(instance: Instance) -> ValidationReport:
    """Collect every violated invariant; never raises."""
    report = ValidationReport()
    net = instance.network
    nodes = set(net.nodes)
    if len(nodes) != len(net.nodes):
        report.add("duplicate node id")
    seen_links: set[tuple[str, str]] = set()
    for link in net.links:
        tag = f"link {link.tail}->{link.head}"
        for end in (link.tail, link.head):
            if end not in nodes:
                report.add(f"{tag}: unknown endpoint {end!r}")
        if link.tail == link.head:
            report.add(f"{tag}: self-loop")
        if (link.tail, link.head) in seen_links:
            report.add(f"{tag}: duplicate link")
        seen_links.add((link.tail, link.head))
        _check_capacity(report, tag, link.capacity)
    cloud_ids = [c.node for c in net.clouds]
    if len(set(cloud_ids)) != len(cloud_ids):
        report.add("duplicate cloud node")
    for c in net.clouds:
        if c.node not in nodes:
            report.add(f"cloud {c.node!r}: unknown node")
        _check_capacity(report, f"cloud {c.node}", c.capacity)
        if not c.power >= 0:
            report.add(f"cloud {c.node}: power must be >= 0")
    clouds = set(cloud_ids)

    ids = [svc.id for svc in instance.services]
    if len(set(ids)) != len(ids):
        report.add("duplicate service id")
    for svc in instance.services:
        tag = f"service {svc.id}"
        for role, node in (("source", svc.source), ("destination", svc.destination)):
            if node not in nodes:
                report.add(f"{tag}: unknown {role} node {node!r}")
            elif node in clouds:
                report.add(f"{tag}: {role} inside cloud set")
        if svc.length < 1:
            report.add(f"{tag}: empty function chain")
        if not svc.rate_in > 0:
            report.add(f"{tag}: rates must be > 0")
        for s, stage in enumerate(svc.chain, start=1):
            if not stage.rate > 0:
                report.add(f"{tag} stage {s}: rates must be > 0")
            for v, cost in stage.costs.items():
                if v not in clouds:
                    report.add(f"{tag} stage {s}: cost for non-cloud node {v!r}")
                elif not cost >= 0:
                    report.add(f"{tag} stage {s}: negative placement cost at {v}")
    return report


class InstanceError(ValueError):
    """Raised for malformed instance files."""


# ------------------------------------------------------------ serialization


def format_number(x: float) -> str:
    """Shortest decimal string that parses back to exactly ``x``."""
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def _capacity_to_text(c: Capacity) -> str:
    return "inf" if c is INF else format_number(c)


def to_dict(instance: Instance) -> dict:
    net = instance.network
    return {
        "schema_version": SCHEMA_VERSION,
        "name": instance.name,
        "nodes": list(net.nodes),
        "links": [
            {"tail": l.tail, "head": l.head, "capacity": _capacity_to_text(l.capacity)}
            for l in net.links
        ],
        "clouds": [
            {"node": c.node, "capacity": _capacity_to_text(c.capacity), "power": format_number(c.power)}
            for c in net.clouds
        ],
        "services": [
            {
                "id": svc.id,
                "source": svc.source,
                "destination": svc.destination,
                "rate_in": format_number(svc.rate_in),
                "chain": [
                    {
                        "function": st.function,
                        "rate": format_number(st.rate),
                        "costs": {v: format_number(c) for v, c in st.costs.items()},
                    }
                    for st in svc.chain
                ],
            }
            for svc in instance.services
        ],
    }


def dumps(instance: Instance) -> str:
    return json.dumps(to_dict(instance), indent=2) + "\n"


def save(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps(instance), encoding="utf-8")


def _require(obj: Mapping, key: str, where: str):
    if not isinstance(obj, Mapping):
        raise InstanceError(f"{where}: expected an object")
    if key not in obj:
        raise InstanceError(f"{where}: missing field {key!r}")
    return obj[key]


def _parse_number(text, where: str) -> float:
    if isinstance(text, bool):
        raise InstanceError(f"{where}: expected a decimal string, got {text!r}")
    if isinstance(text, (int, float)):
        return float(text)
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise InstanceError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise InstanceError(f"{where}: non-finite number {text!r}")
    return value


def _parse_capacity(text, where: str) -> Capacity:
    if isinstance(text, str) and text.strip().lower() == "inf":
        return INF
    return _parse_number(text, where)


def from_dict(data: Mapping) -> Instance:
    version = _require(data, "schema_version", "instance")
    if version != SCHEMA_VERSION:
        raise InstanceError(f"instance: schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
    nodes = tuple(str(n) for n in _require(data, "nodes", "instance"))
    links = []
    for i, l in enumerate(_require(data, "links", "instance")):
        where = f"links[{i}]"
        links.append(
            Link(
                str(_require(l, "tail", where)),
                str(_require(l, "head", where)),
                _parse_capacity(_require(l, "capacity", where), where + ".capacity"),
            )
        )
    clouds = []
    for i, c in enumerate(_require(data, "clouds", "instance")):
        where = f"clouds[{i}]"
        clouds.append(
            CloudNode(
                str(_require(c, "node", where)),
                _parse_capacity(_require(c, "capacity", where), where + ".capacity"),
                _parse_number(_require(c, "power", where), where + ".power"),
            )
        )
    services = []
    for i, s in enumerate(_require(data, "services", "instance")):
        where = f"services[{i}]"
        chain = []
        for j, st in enumerate(_require(s, "chain", where)):
            w2 = f"{where}.chain[{j}]"
            costs = _require(st, "costs", w2)
            if not isinstance(costs, Mapping):
                raise InstanceError(f"{w2}.costs: expected an object")
            chain.append(
                Stage(
                    str(_require(st, "function", w2)),
                    _parse_number(_require(st, "rate", w2), w2 + ".rate"),
                    {str(v): _parse_number(c, f"{w2}.costs.{v}") for v, c in costs.items()},
                )
            )
        services.append(
            Service(
                str(_require(s, "id", where)),
                str(_require(s, "source", where)),
                str(_require(s, "destination", where)),
                _parse_number(_require(s, "rate_in", where), where + ".rate_in"),
                tuple(chain),
            )
        )
    return Instance(Network(nodes, tuple(links), tuple(clouds)), tuple(services), str(data.get("name", "")))


def loads(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_dict(data)


def load(path: str | Path) -> Instance:
    return loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- generator


@dataclass(frozen=True)
class GeneratorConfig:
    """Random instance parameters; the defaults describe a moderately loaded 20-node network.

    Ranges are inclusive integer ranges ``(low, high)``.  ``link_capacity=None``
    makes every link unlimited.
    """

    nodes: int = 20
    topology: str = "geometric"  # "geometric" | "grid" | "complete"
    radius: float = 0.4
    removal_prob: float = 0.1
    clouds: int = 6
    cloud_capacity: tuple[int, int] = (200, 600)
    link_capacity: tuple[int, int] | None = (20, 220)
    services: int = 5
    chain_length: tuple[int, int] = (4, 4)
    function_pool: int = 5
    functions_per_cloud: int = 3
    rates: tuple[int, int] = (1, 40)
    same_rate: bool = True
    activation_power: tuple[int, int] = (1, 200)
    placement_cost: tuple[int, int] = (1, 20)
    common_destination: bool = True
    seed: int = 0

    def check(self) -> None:
        pairs = {
            "cloud_capacity": self.cloud_capacity,
            "chain_length": self.chain_length,
            "rates": self.rates,
            "activation_power": self.activation_power,
            "placement_cost": self.placement_cost,
        }
        if self.link_capacity is not None:
            pairs["link_capacity"] = self.link_capacity
        for name, (lo, hi) in pairs.items():
            if lo > hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
        if not 0.0 <= self.removal_prob <= 1.0:
            raise ValueError("removal_prob must lie in [0, 1]")
        if self.rates[0] <= 0 or self.chain_length[0] < 1:
            raise ValueError("rates must be positive and chains nonempty")
        if self.chain_length[1] > self.function_pool:
            raise ValueError(
                f"chain length up to {self.chain_length[1]} needs more distinct functions "
                f"than the pool of {self.function_pool}"
            )
        if not 1 <= self.functions_per_cloud <= self.function_pool:
            raise ValueError("functions_per_cloud must be in [1, function_pool]")
        spare = 1 if self.common_destination else 2
        if self.services > 0 and self.nodes - self.clouds < spare:
            raise ValueError("not enough non-cloud nodes for sources and destinations")
        if self.clouds > self.nodes or self.clouds < 1:
            raise ValueError("clouds must be in [1, nodes]")


def _topology(cfg: GeneratorConfig, rng: np.random.Generator) -> list[tuple[int, int]]:
    n = cfg.nodes
    pairs: list[tuple[int, int]] = []
    if cfg.topology == "grid":
        width = max(1, int(math.ceil(math.sqrt(n))))
        for i in range(n):
            r, c = divmod(i, width)
            for j in (i + 1 if c + 1 < width else None, i + width):
                if j is not None and j < n:
                    pairs += [(i, j), (j, i)]
    elif cfg.topology == "geometric":
        pos = rng.random((n, 2))
        for i in range(n):
            for j in range(n):
                if i != j and np.hypot(*(pos[i] - pos[j])) <= cfg.radius:
                    pairs.append((i, j))
    elif cfg.topology == "complete":
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    else:
        raise ValueError(f"unknown topology {cfg.topology!r}")
    keep = rng.random(len(pairs)) >= cfg.removal_prob
    return [p for p, k in zip(pairs, keep) if k]


def generate(cfg: GeneratorConfig) -> Instance:
    """Draw a random instance; the same config always yields the same instance."""
    cfg.check()
    rng = np.random.default_rng(cfg.seed)

    def draw(rng_range: tuple[int, int]) -> float:
        return float(rng.integers(rng_range[0], rng_range[1] + 1))

    names = [str(i) for i in range(cfg.nodes)]
    links = []
    for i, j in _topology(cfg, rng):
        cap: Capacity = INF if cfg.link_capacity is None else draw(cfg.link_capacity)
        links.append(Link(names[i], names[j], cap))

    cloud_idx = sorted(rng.choice(cfg.nodes, size=cfg.clouds, replace=False).tolist())
    functions = [f"f{i + 1}" for i in range(cfg.function_pool)]
    clouds = []
    unit_cost: dict[str, dict[str, float]] = {}
    for i in cloud_idx:
        clouds.append(CloudNode(names[i], draw(cfg.cloud_capacity), draw(cfg.activation_power)))
        hosted = rng.choice(cfg.function_pool, size=cfg.functions_per_cloud, replace=False)
        unit_cost[names[i]] = {functions[f]: draw(cfg.placement_cost) for f in sorted(hosted.tolist())}

    plain = [names[i] for i in range(cfg.nodes) if i not in set(cloud_idx)]
    services = []
    common = plain[int(rng.integers(len(plain)))] if plain else None
    for k in range(cfg.services):
        if cfg.common_destination:
            dest = common
            candidates = [v for v in plain if v != dest]
            src = candidates[int(rng.integers(len(candidates)))]
        else:
            a, b = rng.choice(len(plain), size=2, replace=False)
            src, dest = plain[int(a)], plain[int(b)]
        length = int(rng.integers(cfg.chain_length[0], cfg.chain_length[1] + 1))
        chain_fns = [functions[f] for f in rng.choice(cfg.function_pool, size=length, replace=False)]
        if cfg.same_rate:
            rate = draw(cfg.rates)
            rates = [rate] * (length + 1)
        else:
            rates = [draw(cfg.rates) for _ in range(length + 1)]
        chain = tuple(
            Stage(fn, rates[s + 1], {v: c[fn] for v, c in unit_cost.items() if fn in c})
            for s, fn in enumerate(chain_fns)
        )
        services.append(Service(f"k{k + 1}", src, dest, rates[0], chain))

    return Instance(
        Network(tuple(names), tuple(links), tuple(clouds)),
        tuple(services),
        name=f"gen-seed{cfg.seed}",
    )


def build_instance(
    nodes: Sequence[str],
    links: Iterable[tuple[str, str, Capacity]],
    clouds: Iterable[tuple[str, Capacity, float]],
    services: Iterable[Service] = (),
    name: str = "",
) -> Instance:
    """Convenience constructor from plain tuples."""
    return Instance(
        Network(tuple(nodes), tuple(Link(*l) for l in links), tuple(CloudNode(*c) for c in clouds)),
        tuple(services),
        name,
    )

"""Declarative scenario files (JSON).

A scenario names its kind, seed, ledger parameters, node roster with
policies, network topology and partition schedule, and a kind-specific
workload. Scenario plus seed determine the whole run.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..ledger import InvalidParams, LedgerParams
from ..netsim import Cut, Latency, LinkModel, ScheduleConflict, check_schedule
from ..node import NodePolicy

KINDS = ("enrolment", "stale_permission", "smart_vehicle", "sensor_network", "cap_dichotomy")


class ScenarioConfig(ValueError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    name: str
    role: str
    policy: NodePolicy = NodePolicy()
    cap: int | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "role": self.role, "policy": self.policy.to_dict(),
                "cap": self.cap}


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    link: LinkModel

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "latency": self.link.latency.to_dict(),
                "up": self.link.up}


@dataclass
class Scenario:
    name: str
    kind: str
    seed: int
    ledger: LedgerParams = field(default_factory=LedgerParams)
    nodes: list[NodeSpec] = field(default_factory=list)
    latency: Latency = Latency.constant(20.0)
    channel_cap: int = 1_000_000
    links: list[LinkSpec] = field(default_factory=list)
    cuts: list[Cut] = field(default_factory=list)
    queue_on_partition: bool = False
    workload: dict = field(default_factory=dict)

    def role(self, role: str) -> list[NodeSpec]:
        return [n for n in self.nodes if n.role == role]

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise ScenarioConfig(f"scenario has no node named {name!r}")

    def with_seed(self, seed: int | None) -> "Scenario":
        if seed is None:
            return self
        other = copy.deepcopy(self)
        other.seed = int(seed)
        return other

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "seed": self.seed,
            "ledger": self.ledger.to_dict(),
            "nodes": [n.to_dict() for n in self.nodes],
            "network": {
                "latency": self.latency.to_dict(),
                "channel_cap": self.channel_cap,
                "links": [l.to_dict() for l in self.links],
                "cuts": [c.to_dict() for c in self.cuts],
                "queue_on_partition": self.queue_on_partition,
            },
            "workload": copy.deepcopy(self.workload),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            kind = d["kind"]
            if kind not in KINDS:
                raise ScenarioConfig(f"unknown scenario kind {kind!r}; expected one of {KINDS}")
            net = d.get("network", {})
            nodes = [NodeSpec(n["name"], n["role"], NodePolicy.from_dict(n.get("policy") or {}),
                              n.get("cap")) for n in d.get("nodes", [])]
            names = [n.name for n in nodes]
            if len(set(names)) != len(names):
                raise ScenarioConfig("duplicate node names")
            links = [LinkSpec(l["a"], l["b"], LinkModel(Latency.from_dict(l["latency"]),
                                                        l.get("up", True)))
                     for l in net.get("links", [])]
            cuts = check_schedule(Cut.from_dict(c) for c in net.get("cuts", []))
            for item in [*(n for l in links for n in (l.a, l.b)),
                         *(n for c in cuts for n in c.a | c.b)]:
                if item not in names:
                    raise ScenarioConfig(f"topology refers to unknown node {item!r}")
            return cls(
                name=d["name"],
                kind=kind,
                seed=int(d.get("seed", 0)),
                ledger=LedgerParams(**d.get("ledger", {})),
                nodes=nodes,
                latency=Latency.from_dict(net.get("latency", {"dist": "constant", "ms": 20.0})),
                channel_cap=int(net.get("channel_cap", 1_000_000)),
                links=links,
                cuts=cuts,
                queue_on_partition=bool(net.get("queue_on_partition", False)),
                workload=dict(d.get("workload", {})),
            )
        except ScheduleConflict:
            raise
        except (KeyError, TypeError, ValueError, InvalidParams) as exc:
            if isinstance(exc, ScenarioConfig):
                raise
            raise ScenarioConfig(f"invalid scenario: {exc!r}") from exc


def load_scenario(source: str | Path) -> Scenario:
    """Load from a path, or a built-in scenario by name (e.g. ``enrolment``)."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    else:
        ref = resources.files("ledger_iam").joinpath("scenarios", f"{source}.json")
        if not ref.is_file():
            raise ScenarioConfig(f"no scenario file or built-in scenario named {source!r}")
        text = ref.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioConfig(f"scenario is not valid JSON: {exc}") from exc
    return Scenario.from_dict(data)


def builtin_scenarios() -> list[str]:
    root = resources.files("ledger_iam").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def derive_seed(seed: int, label: str) -> int:
    h = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(h[:8], "big")

from __future__ import annotations

import hashlib
import random

from ..contracts import (
    ContractState,
    Identity,
    create_grant,
    create_imprinting_contract,
    generate_identity,
)
from ..ledger import Block, export_chain
from ..netsim import LinkModel, Network, SimClock
from ..node import AccessDecision, LedgerService, Node, NodePolicy, Outcome
from .scenario import Scenario, ScenarioConfig, derive_seed


class World:
    """Clock, network, identities, ledger service and nodes built from a scenario."""

    def __init__(self, scenario: Scenario, channel_cap: int | None = None) -> None:
        self.scenario = scenario
        self.params = scenario.ledger
        self.clock = SimClock()
        cap = scenario.channel_cap if channel_cap is None else channel_cap
        self.net = Network(self.clock, derive_seed(scenario.seed, "network"),
                           LinkModel(scenario.latency), cap, scenario.queue_on_partition)
        self._id_rng = random.Random(derive_seed(scenario.seed, "identities"))
        self.identities: dict[str, Identity] = {}
        self.admin = self.identity("admin")
        self.imprinter = self.identity("imprinter")
        self.ledger: LedgerService | None = None
        self.nodes: dict[str, Node] = {}

    def identity(self, name: str) -> Identity:
        if name not in self.identities:
            self.identities[name] = generate_identity(self._id_rng)
        return self.identities[name]

    def add_ledger(self, name: str | None = None) -> LedgerService:
        if name is None:
            specs = self.scenario.role("ledger")
            if len(specs) != 1:
                raise ScenarioConfig("scenario needs exactly one node with role 'ledger'")
            name = specs[0].name
        state = ContractState(imprinters={self.imprinter.public_key})
        self.ledger = LedgerService(name, self.params, self.net, state)
        return self.ledger

    def add_node(self, name: str, policy: NodePolicy | None = None, ledger: str | None = "",
                 keep_blocks: bool = False, cap: int | None = None) -> Node:
        if ledger == "":
            ledger = self.ledger.name if self.ledger else None
        spec = next((n for n in self.scenario.nodes if n.name == name), None)
        if policy is None:
            policy = spec.policy if spec else NodePolicy()
        if cap is None and spec is not None:
            cap = spec.cap
        node = Node(name, self.identity(name), self.params, policy, self.net, ledger,
                    keep_blocks, derive_seed(self.scenario.seed, f"node:{name}"), cap=cap)
        self.nodes[name] = node
        return node

    def add_plain(self, name: str, handler=None) -> None:
        spec = next((n for n in self.scenario.nodes if n.name == name), None)
        self.net.add_node(name, handler, spec.cap if spec else None)

    def finish_topology(self) -> None:
        for link in self.scenario.links:
            self.net.set_link(link.a, link.b, link.link)
        self.net.load_schedule(self.scenario.cuts)

    def bootstrap(self, devices: list[Identity], grants=()) -> list[Block]:
        """Imprint ``devices`` under the scenario admin, then include ``grants``.

        ``grants`` holds (provider_id, requestor_id, acl, expiry) tuples.
        Both blocks are mined at the current simulated instant.
        """
        led = self.ledger
        for dev in devices:
            led.submit(create_imprinting_contract(dev.public, self.admin.public_key,
                                                  self.imprinter, led.state))
        blocks = [led.mine()]
        if grants:
            for serial, (provider, requestor, acl, expiry) in enumerate(grants):
                led.submit(create_grant(self.admin, provider, requestor, acl, expiry, led.state,
                                        serial))
            blocks.append(led.mine())
        return blocks

    def request_series(self, requestor: str, provider: str, times, slot: int = 0,
                       timeout: float = 10_000.0) -> None:
        """Schedule ``requestor`` to ask ``provider`` for ``slot`` at each time in ``times``."""
        req, prov = self.nodes[requestor], self.nodes[provider]
        for t in times:
            self.clock.schedule_at(float(t), lambda: req.request_access(prov.name, prov.id, slot,
                                                                        timeout),
                                   "request", f"{requestor}->{provider}")

    def decision_log(self) -> list[AccessDecision]:
        """Provider decisions plus requestor-side timeouts, in time order."""
        out = [d for n in self.nodes.values() for d in n.decisions]
        out += [d for n in self.nodes.values() for d in n.outcomes
                if d.outcome is Outcome.TIMED_OUT]
        return sorted(out, key=lambda d: (d.time, d.node))

    def chain_text(self) -> str | None:
        return export_chain(self.ledger.chain, self.params) if self.ledger else None

    def trace_digest(self) -> str:
        return self.clock.trace_digest()


def combine_digests(digests: list[str]) -> str:
    return hashlib.sha256("".join(digests).encode()).hexdigest()

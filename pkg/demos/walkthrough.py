"""One device, one grant, one revocation, driven by hand on a tiny network.

Run with: python3 demos/walkthrough.py
"""
from __future__ import annotations

import random

from ledger_iam.contracts import (
    ContractState,
    acl_mask,
    create_grant,
    create_imprinting_contract,
    create_revocation,
    generate_identity,
)
from ledger_iam.ledger import LedgerParams
from ledger_iam.netsim import Cut, Latency, LinkModel, Network, SimClock
from ledger_iam.node import LedgerService, Node, NodePolicy, sync


def main() -> None:
    rng = random.Random(42)
    admin, imprinter = generate_identity(rng), generate_identity(rng)
    params = LedgerParams(difficulty_bits=8)
    clock = SimClock()
    net = Network(clock, 1, LinkModel(Latency.constant(20.0)))
    ledger = LedgerService("ledger", params, net, ContractState(imprinters={imprinter.public_key}))
    lock = Node("lock", generate_identity(rng), params, NodePolicy(freshness_threshold=500), net,
                "ledger", seed=1)
    phone = Node("phone", generate_identity(rng), params, NodePolicy(), net, "ledger", seed=2)

    ledger.submit(create_imprinting_contract(lock.identity.public, admin.public_key, imprinter))
    ledger.mine(0)
    grant = create_grant(admin, lock.id, phone.id, acl_mask(0), None, ledger.state)
    ledger.submit(grant)
    block = ledger.mine(0)
    print(f"lock imprinted, grant mined in block {block.height}")
    sync(lock, ledger)

    outcomes = []

    def ask(label: str) -> None:
        outcomes.append((label, phone.request_access("lock", lock.id, 0, 5_000)))

    clock.schedule_at(1_000, lambda: ask("connected"))
    clock.schedule_at(2_000, lambda: ledger.submit(
        create_revocation(admin, grant.digest, ledger.state)))
    clock.schedule_at(2_000, lambda: ledger.mine(clock.now))
    net.load_schedule([Cut({"lock", "phone"}, {"ledger"}, 1_500, 10_000)])
    clock.schedule_at(3_000, lambda: ask("partitioned, revoked on ledger"))
    clock.schedule_at(11_000, lambda: ask("healed"))
    clock.run_until(20_000)

    for label, pending in outcomes:
        d = pending.decision
        basis = d.basis.value if d.basis else "-"
        print(f"{label:32s} {d.outcome.value:9s} basis={basis}")


if __name__ == "__main__":
    main()

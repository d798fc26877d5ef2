"""Stale-permission attack.

The requestor's grant is revoked on the ledger while the provider sits behind
a partition. A provider that trades consistency for availability keeps
honouring its cached copy of the grant until it heals and syncs; one with an
infinite freshness threshold never does.
"""
from __future__ import annotations

import math

from ..contracts import acl_mask, create_revocation
from ..ledger import TxKind
from ..node import MS_PER_MIN, Basis, Outcome
from .report import Report, check
from .scenario import Scenario, ScenarioConfig
from .world import World


def _first_sync_covering(node, height: int, after: float) -> float | None:
    for t, h in node.sync_log:
        if t >= after and h > height:
            return t
    return None


def run_stale_permission_attack(scenario: Scenario) -> Report:
    w = scenario.workload
    world = World(scenario)
    clock = world.clock
    ledger = world.add_ledger()
    providers = [world.add_node(s.name) for s in scenario.role("provider")]
    requestors = [world.add_node(s.name) for s in scenario.role("requestor")]
    if not providers or len(requestors) != 1:
        raise ScenarioConfig("attack needs providers and exactly one requestor")
    mallory = requestors[0]
    slot = int(w.get("slot", 0))

    blocks = world.bootstrap([p.identity for p in providers],
                             [(p.id, mallory.id, acl_mask(slot), None) for p in providers])
    grant_height = blocks[-1].height
    targets = {p.name: ledger.chain.blocks[grant_height].txs[i].digest
               for i, p in enumerate(providers)}
    for p in providers:
        p.apply_fetch(ledger.fetch(0, p.watch))
        p.start_refresh()

    revoke_at = float(w["revoke_at_ms"])
    revocation: dict = {}

    def revoke() -> None:
        for p in providers:
            ledger.submit(create_revocation(world.admin, targets[p.name], ledger.state))

    def on_block(block) -> None:
        if "height" not in revocation and any(tx.kind is TxKind.REVOKE for tx in block.txs):
            revocation.update(height=block.height, time=clock.now)

    ledger.block_listeners.append(on_block)
    clock.schedule_at(revoke_at, revoke, "revoke", "admin")
    ledger.start_mining(clock)

    period = float(w.get("request_every_ms", 30_000))
    start = float(w.get("first_request_ms", 10_000))
    horizon = float(w["horizon_ms"])
    times = [start + k * period for k in range(int((horizon - start) // period) + 1)]
    for p in providers:
        world.request_series(mallory.name, p.name, times, slot, float(w.get("timeout_ms", 10_000)))
    world.finish_topology()
    clock.run_until(horizon)
    ledger.stop_mining()

    t_r = revocation.get("time")
    checks = [check("revocation mined", t_r is not None,
                    f"height {revocation.get('height')} at {t_r} ms")]
    per_provider = {}
    for p in providers:
        target = targets[p.name]
        grants = [d for d in p.decisions if d.granted and d.contract_digest == target]
        t_h = (_first_sync_covering(p, revocation["height"], t_r) if t_r is not None else None)
        end = math.inf if t_h is None else t_h
        window = [d for d in grants if t_r is not None and t_r < d.time < end]
        after = [d for d in grants if t_h is not None and d.time > t_h]
        label = f"{p.name} (threshold {p.policy.to_dict()['freshness_threshold_ms']})"
        per_provider[p.name] = {
            "threshold_ms": p.policy.freshness_threshold,
            "revocation_time_ms": t_r,
            "heal_sync_time_ms": t_h,
            "stale_window_min": None if t_h is None or t_r is None else (t_h - t_r) / MS_PER_MIN,
            "stale_grants": [{"time_ms": d.time, "basis": d.basis.value, "waited_ms": d.waited}
                             for d in window],
            "grants_after_sync": len(after),
        }
        checks += [
            check(f"{label}: heal and sync observed after revocation", t_h is not None,
                  f"t_h = {t_h} ms"),
            check(f"{label}: every grant in (t_r, t_h) is LocalCache",
                  all(d.basis is Basis.LOCAL_CACHE for d in window),
                  f"{len(window)} stale grant(s)"),
            check(f"{label}: no grant on the revoked contract after t_h", not after,
                  f"{len(after)} after {t_h} ms"),
        ]
        if p.policy.consistent:
            cached = [d for d in p.decisions
                      if d.outcome is Outcome.GRANTED and d.basis is Basis.LOCAL_CACHE]
            checks.append(check(f"{label}: never grants from cache", not cached,
                                f"{len(cached)} LocalCache grant(s)"))
        elif w.get("expect_stale_window", True):
            checks.append(check(f"{label}: stale-grant window is exercised", bool(window),
                                f"{len(window)} grant(s) between revocation and resync"))
    decisions = [d.to_record() for d in world.decision_log()]
    results = {"revocation": revocation, "providers": per_provider,
               "requests_per_provider": len(times)}
    return Report(scenario, results, checks, world.trace_digest(), decisions, world.chain_text())

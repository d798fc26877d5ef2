"""Freshness-threshold sweep under a scheduled partition.

Providers with thresholds 0, finite and infinite serve the same requestor
while a cut separates them from the ledger. The runner checks the three sides
of the tradeoff: infinite never grants from cache, zero never waits, and a
finite threshold waits exactly min(T, fetch round trip).
"""
from __future__ import annotations

import math

from ..contracts import acl_mask
from ..node import Basis, Outcome
from .report import Report, check
from .scenario import Scenario, ScenarioConfig
from .world import World


def expected_wait(threshold: float, start: float, rtt: float, cuts) -> float | None:
    """Exact wait for an authorization starting at ``start``, or None near a cut boundary.

    ``cuts`` are the windows separating the provider from the ledger.
    """
    def overlaps(lo: float, hi: float) -> bool:
        return any(c.start <= hi and (c.end is None or lo < c.end) for c in cuts)

    def covered(lo: float, hi: float) -> bool:
        return any(c.start <= lo and (c.end is None or hi < c.end) for c in cuts)

    if not overlaps(start, start + rtt):
        return min(threshold, rtt)
    if not math.isinf(threshold) and covered(start, start + threshold):
        return threshold
    return None


def run_cap_dichotomy(scenario: Scenario) -> Report:
    w = scenario.workload
    world = World(scenario)
    clock = world.clock
    ledger = world.add_ledger()
    providers = [world.add_node(s.name) for s in scenario.role("provider")]
    requestors = [world.add_node(s.name) for s in scenario.role("requestor")]
    if not providers or len(requestors) != 1:
        raise ScenarioConfig("cap scenario needs providers and exactly one requestor")
    client = requestors[0]
    slot = int(w.get("slot", 0))
    world.bootstrap([p.identity for p in providers],
                    [(p.id, client.id, acl_mask(slot), None) for p in providers])
    for p in providers:
        p.apply_fetch(ledger.fetch(0, p.watch))

    times = [float(t) for t in w["request_times_ms"]]
    timeout = float(w.get("timeout_ms", 10_000))
    for p in providers:
        world.request_series(client.name, p.name, times, slot, timeout)
    world.finish_topology()
    horizon = float(w.get("horizon_ms", max(times) + 10 * timeout))
    clock.run_until(horizon)

    checks = []
    summary = {}
    for p in providers:
        T = p.policy.freshness_threshold
        lat = world.net.link(p.name, ledger.name).latency
        rtt = 2 * lat.a if lat.dist == "constant" else None
        cuts = [c for c in scenario.cuts if c.separates(p.name, ledger.name)]
        ds = p.decisions
        asked = [o for o in client.outcomes if o.provider_id == p.id]
        label = f"{p.name} (threshold {p.policy.to_dict()['freshness_threshold_ms']})"
        row = {
            "threshold_ms": T,
            "decisions": len(ds),
            "granted_fresh": sum(d.granted and d.basis is Basis.FRESH_LEDGER for d in ds),
            "granted_cache": sum(d.granted and d.basis is Basis.LOCAL_CACHE for d in ds),
            "requestor_timeouts": sum(o.outcome is Outcome.TIMED_OUT for o in asked),
            "max_wait_ms": max((d.waited for d in ds), default=0.0),
        }
        if math.isinf(T):
            checks.append(check(f"{label}: zero Granted(LocalCache)", row["granted_cache"] == 0,
                                f"{row['granted_cache']} cache grants, "
                                f"{row['requestor_timeouts']} requestor timeouts"))
        elif T == 0:
            waits = [d for d in ds if d.waited != 0]
            timeouts = row["requestor_timeouts"] + sum(d.outcome is Outcome.TIMED_OUT for d in ds)
            checks.append(check(f"{label}: never waits", not waits and timeouts == 0,
                                f"{len(waits)} waits, {timeouts} timeouts"))
        else:
            exact, skipped, mismatched = 0, 0, []
            for d in ds:
                # without constant latency only the upper bound T is exact
                want = None if rtt is None else expected_wait(T, d.time - d.waited, rtt, cuts)
                if rtt is None:
                    if d.waited > T:
                        mismatched.append(d)
                elif want is None:
                    skipped += 1
                elif d.waited == want:
                    exact += 1
                else:
                    mismatched.append(d)
            row.update(exact=exact, boundary_excluded=skipped)
            checks.append(check(f"{label}: wait equals min(T, fetch latency)",
                                not mismatched and (rtt is None or exact > 0),
                                f"{exact} exact, {len(mismatched)} off, {skipped} near a boundary"))
        summary[p.name] = row
    all_grants = [d for p in providers for d in p.decisions if d.granted]
    checks.append(check("every grant carries a recorded basis",
                        all(d.basis is not None for d in all_grants), f"{len(all_grants)} grants"))
    decisions = [d.to_record() for d in world.decision_log()]
    return Report(scenario, {"providers": summary}, checks, world.trace_digest(), decisions,
                  world.chain_text())

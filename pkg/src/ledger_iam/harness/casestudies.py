"""Two deployments run end to end: a phone unlocking a vehicle, and offline sensors."""
from __future__ import annotations

from ..contracts import acl_mask, create_grant, grant_payload
from ..ledger import Transaction, TxKind, seal_block
from ..node import Basis, Outcome, dispatch_blocks
from .baseline import TraditionalIAM
from .report import Report, check
from .scenario import Scenario, ScenarioConfig
from .world import World, combine_digests


def _one(scenario: Scenario, role: str) -> str:
    specs = scenario.role(role)
    if len(specs) != 1:
        raise ScenarioConfig(f"scenario needs exactly one node with role {role!r}")
    return specs[0].name


def run_smart_vehicle(scenario: Scenario) -> Report:
    w = scenario.workload
    slot = int(w.get("slot", 0))
    times = [float(t) for t in w["unlock_times_ms"]]
    timeout = float(w.get("timeout_ms", 10_000))
    horizon = float(w.get("horizon_ms", max(times) + 10 * timeout))
    cloud_name = _one(scenario, "auth_server")

    world = World(scenario)
    ledger = world.add_ledger()
    phone = world.add_node(_one(scenario, "requestor"))
    vehicle = world.add_node(_one(scenario, "provider"))
    world.add_plain(cloud_name)
    world.bootstrap([vehicle.identity], [(vehicle.id, phone.id, acl_mask(slot), None)])
    for n in (phone, vehicle):
        n.apply_fetch(ledger.fetch(0, n.watch))
    vehicle.start_refresh()
    pendings = []
    for t in times:
        world.clock.schedule_at(t, lambda: pendings.append(
            phone.request_access(vehicle.name, vehicle.id, slot, timeout)), "unlock", phone.name)
    world.finish_topology()
    world.clock.run_until(horizon)

    legacy = World(scenario)
    legacy.add_plain(ledger.name)
    flow = TraditionalIAM(legacy.net, cloud_name, phone.name, vehicle.name, timeout=timeout)
    legacy_results = []
    for t in times:
        legacy.clock.schedule_at(t, lambda: legacy_results.append(flow.request()), "unlock",
                                 phone.name)
    legacy.finish_topology()
    legacy.clock.run_until(horizon)

    net = world.net
    attempts = []
    for t, p, base in zip(times, pendings, legacy_results):
        during = any(c.covers(t) and c.separates(vehicle.name, cloud_name) for c in scenario.cuts)
        d = p.decision
        attempts.append({
            "time_ms": t,
            "cloud_cut": during,
            "ledger_iam": {"outcome": d.outcome.value if d else None,
                           "basis": d.basis.value if d and d.basis else None,
                           "messages_sent": net.sent[p.flow],
                           "messages_delivered": net.delivered[p.flow]},
            "traditional": base.to_dict(legacy.net),
        })

    checks = []
    cut_attempts = [a for a in attempts if a["cloud_cut"]]
    ok_base = [a["traditional"]["messages_sent"] for a in attempts
               if a["traditional"]["outcome"] == "Granted"]
    checks.append(check("at least one unlock attempted during the cloud cut", bool(cut_attempts),
                        f"{len(cut_attempts)} attempt(s)"))
    for a in cut_attempts:
        ours, theirs = a["ledger_iam"], a["traditional"]
        at = f"t={a['time_ms']:g} ms"
        checks += [
            check(f"unlock during cut granted from cache ({at})",
                  ours["outcome"] == Outcome.GRANTED.value
                  and ours["basis"] == Basis.LOCAL_CACHE.value,
                  f"{ours['outcome']}({ours['basis']})"),
            check(f"traditional flow fails during cut ({at})", theirs["outcome"] != "Granted",
                  theirs["outcome"]),
            check(f"fewer messages than a successful traditional flow ({at})",
                  bool(ok_base) and ours["messages_sent"] < min(ok_base),
                  f"{ours['messages_sent']} < {min(ok_base) if ok_base else 'n/a'}"),
        ]
    for a in attempts:
        if not a["cloud_cut"]:
            checks.append(check(f"unlock with cloud reachable granted (t={a['time_ms']:g} ms)",
                                a["ledger_iam"]["outcome"] == Outcome.GRANTED.value,
                                f"{a['ledger_iam']['outcome']}({a['ledger_iam']['basis']}), "
                                f"traditional {a['traditional']['outcome']} with "
                                f"{a['traditional']['messages_sent']} messages"))
    digest = combine_digests([world.trace_digest(), legacy.trace_digest()])
    decisions = [d.to_record() for d in world.decision_log()]
    return Report(scenario, {"attempts": attempts}, checks, digest, decisions, world.chain_text())


def forge_chain(blocks, at: int, forged_tx, bits: int) -> list:
    """Replace block ``at``'s body with ``forged_tx`` and re-mine it and its descendants."""
    out = list(blocks[:at])
    prev = blocks[at].prev_hash
    for b in blocks[at:]:
        txs = (forged_tx,) if b.height == at else b.txs
        sealed = seal_block(b.height, prev, txs, b.timestamp, bits)
        out.append(sealed)
        prev = sealed.block_hash
    return out


def run_sensor_network(scenario: Scenario) -> Report:
    w = scenario.workload
    read, configure = int(w.get("read_slot", 0)), int(w.get("configure_slot", 1))
    world = World(scenario)
    clock = world.clock
    ledger = world.add_ledger()
    operator = world.add_node(_one(scenario, "operator"), keep_blocks=True)
    rogue = world.add_node(_one(scenario, "rogue"), ledger=None, keep_blocks=True)
    sensors = [world.add_node(s.name, ledger=None) for s in scenario.role("sensor")]
    if len(sensors) < 2:
        raise ScenarioConfig("sensor network needs at least two sensors")
    visited, spare = sensors[:-1], sensors[-1]
    world.bootstrap([s.identity for s in sensors],
                    [(s.id, operator.id, acl_mask(read), None) for s in sensors])
    ledger.start_mining(clock)
    # a later, wider grant for the first sensor reaches it only through the operator
    clock.schedule_at(float(w.get("upgrade_at_ms", 180_000)), lambda: ledger.submit(create_grant(
        world.admin, sensors[0].id, operator.id, acl_mask(read, configure), None, ledger.state, 1)),
        "grant", "admin")

    timeout = float(w.get("timeout_ms", 10_000))
    ask = lambda req, node, s: req.request_access(node.name, node.id, s, timeout)
    clock.schedule_at(float(w.get("early_request_ms", 30_000)), lambda: ask(operator, sensors[0], read),
                      "request", "early")
    sync_at = float(w.get("operator_sync_ms", 660_000))
    clock.schedule_at(sync_at, lambda: operator.request_sync("operator-sync"), "sync", operator.name)

    visit_at = float(w.get("visit_ms", 720_000))
    dispatches: dict[str, dict] = {}
    forged: dict = {}

    def visit() -> None:
        dispatches["ledger_height"] = ledger.chain.height
        for s in visited:
            r = dispatch_blocks(operator, s)
            dispatches[s.name] = {"offered": r.offered, "accepted": r.accepted,
                                  "rejected": r.rejected}

    def pulls() -> None:
        for s in visited:
            for sl in (read, configure):
                ask(operator, s, sl)

    def rogue_visit() -> None:
        at = int(w.get("forge_height", 1))
        # signed by the rogue itself, which governs nothing
        fake = Transaction.signed(TxKind.GRANT, grant_payload(spare.id, rogue.id,
                                                              acl_mask(read, configure), None),
                                  rogue.identity)
        rogue.blocks = forge_chain(operator.blocks, at, fake, scenario.ledger.difficulty_bits)
        before = spare.headers.height
        r = dispatch_blocks(rogue, spare)
        forged.update(at=at, offered=r.offered, accepted=r.accepted, rejected=r.rejected,
                      tip_before=before, tip_after=spare.headers.height)
        ask(rogue, spare, read)

    def catch_up() -> None:
        r = dispatch_blocks(operator, spare)
        forged["honest_after"] = {"offered": r.offered, "accepted": r.accepted,
                                  "rejected": r.rejected}
        ask(operator, spare, read)

    clock.schedule_at(visit_at, visit, "visit", operator.name)
    clock.schedule_at(visit_at + 60_000, pulls, "pull", operator.name)
    clock.schedule_at(visit_at + 120_000, rogue_visit, "visit", rogue.name)
    clock.schedule_at(visit_at + 180_000, catch_up, "visit", operator.name)
    world.finish_topology()
    clock.run_until(visit_at + 240_000)

    chain_len = dispatches.pop("ledger_height", None)
    op_len = len(operator.blocks)
    outcome = {}
    for o in operator.outcomes + rogue.outcomes:
        provider = next(s.name for s in sensors if s.id == o.provider_id)
        outcome.setdefault(provider, []).append(
            {"time_ms": o.time, "requestor": "rogue" if o in rogue.outcomes else "operator",
             "slot": o.slot, "outcome": o.outcome.value,
             "basis": o.basis.value if o.basis else None})

    def got(requestor, sensor, slot, after):
        return [o["outcome"] for o in outcome.get(sensor.name, [])
                if o["requestor"] == requestor and o["slot"] == slot and o["time_ms"] > after]

    early = got("operator", sensors[0], read, 0)[:1]
    checks = [
        check("offline sensor refuses before any dispatch", early == ["Denied"], str(early)),
        check("operator synced the full chain", op_len == chain_len and op_len > 2,
              f"{op_len}/{chain_len} blocks"),
    ]
    for s in visited:
        d = dispatches.get(s.name, {})
        checks.append(check(f"dispatch updates {s.name}",
                            d.get("accepted") == op_len and d.get("rejected") == 0,
                            f"{d.get('accepted')}/{d.get('offered')} accepted"))
    grants_for = {}
    for s in visited:
        eff = {}
        for sl in (read, configure):
            res = got("operator", s, sl, visit_at)
            cached = ledger.state.resolve(s.id, operator.id, None)
            want = "Granted" if cached is not None and cached.allows(sl) else "Denied"
            eff[sl] = (res, want)
            checks.append(check(f"{s.name} slot {sl} pull follows the ledger ACL",
                                res == [want], f"{res} expected {want}"))
        grants_for[s.name] = {str(k): v[0] for k, v in eff.items()}
    at = forged.get("at", 0)
    checks += [
        check("forged block and descendants rejected",
              forged.get("accepted") == at and forged.get("rejected") == forged.get("offered", 0) - at
              and forged.get("offered", 0) > at,
              f"{forged.get('accepted')} accepted, {forged.get('rejected')} rejected of "
              f"{forged.get('offered')} (forged at height {at})"),
        check("rogue gains no access", got("rogue", spare, read, 0) == ["Denied"],
              str(got("rogue", spare, read, 0))),
        check("honest dispatch repairs the sensor after the forgery",
              spare.headers.height == op_len
              and got("operator", spare, read, visit_at + 180_000) == ["Granted"],
              f"tip {spare.headers.height}/{op_len}"),
    ]
    cache_only = all(d.basis in (Basis.LOCAL_CACHE, None) for s in sensors for d in s.decisions)
    checks.append(check("offline sensors decide from cache only", cache_only, ""))
    results = {"chain_height": chain_len, "dispatches": dispatches, "forgery": forged,
               "pulls": grants_for, "outcomes": outcome}
    decisions = [d.to_record() for d in world.decision_log()]
    return Report(scenario, results, checks, world.trace_digest(), decisions, world.chain_text())

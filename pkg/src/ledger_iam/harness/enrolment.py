"""Enrolment pipeline: generate, announce to an imprinter, imprint on the ledger.

Each client generates identities back to back and announces each one as soon
as it exists. An announcement holds one of the client's concurrent channels to
the imprinter for ``service_time_min``; with a small channel cap the queue for
channels becomes the bottleneck. The imprinter turns each announcement into an
imprinting transaction and submits it to the ledger, which mines on a fixed
interval.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from ..contracts import AlreadyImprinted, PublicIdentity, create_imprinting_contract, generate_identity
from ..ledger import theoretical_upper_bound
from ..netsim import Latency
from ..node import MS_PER_MIN
from .report import Check, Report, check
from .scenario import Scenario, ScenarioConfig, derive_seed
from .stats import StageStats
from .world import World, combine_digests

ANNOUNCE_TOPIC = "imprint/announce"


def split_workload(identities: int, clients: int) -> list[int]:
    base, extra = divmod(identities, clients)
    return [base + (1 if i < extra else 0) for i in range(clients)]


def fit_service_time(target_announce_min: float, identities: int, clients: int, cap: int) -> float:
    """Channel service time giving a mean announce delay near ``target_announce_min``.

    Assumes generation is instantaneous next to the service time, so the k-th
    identity of a client completes its announcement after (k // cap + 1)
    service periods.
    """
    rounds = [k // cap + 1 for n in split_workload(identities, clients) for k in range(n)]
    return target_announce_min / (sum(rounds) / len(rounds))


@dataclass
class EnrolmentRun:
    cap: int
    service_time_min: float
    identities: int
    imprinted: int
    generation: StageStats
    announce: StageStats
    imprint: StageStats
    total_min: float
    rate_per_min: float
    blocks: list[tuple[int, float, int]] = field(default_factory=list)
    peak_open: dict[str, int] = field(default_factory=dict)
    trace_digest: str = ""
    chain_text: str | None = None

    def to_dict(self) -> dict:
        return {
            "cap": self.cap,
            "service_time_min": self.service_time_min,
            "identities": self.identities,
            "imprinted": self.imprinted,
            "stages": [s.to_dict() for s in (self.generation, self.announce, self.imprint)],
            "total_min": self.total_min,
            "rate_per_min": self.rate_per_min,
            "blocks_mined": len(self.blocks),
            "max_block_txs": max((b[2] for b in self.blocks), default=0),
            "peak_open_channels": dict(sorted(self.peak_open.items())),
            "trace_digest": self.trace_digest,
        }


def resolve_service_time(scenario: Scenario, cap: int) -> float:
    w = scenario.workload
    st = w.get("service_time_min", 1.0)
    if isinstance(st, dict):
        target = st.get("fit_announce_mean_min")
        if target is None:
            raise ScenarioConfig("service_time_min needs a number or fit_announce_mean_min")
        fit_cap = st.get("fit_cap", cap)
        return fit_service_time(float(target), int(w.get("identities", 1000)),
                                int(w.get("clients", 7)), int(fit_cap))
    return float(st)


def simulate_enrolment(scenario: Scenario, cap: int | None = None,
                       service_time_min: float | None = None) -> EnrolmentRun:
    w = scenario.workload
    n_ids = int(w.get("identities", 1000))
    n_clients = int(w.get("clients", 7))
    if n_ids < 1 or n_clients < 1:
        raise ScenarioConfig("enrolment needs at least one client and one identity")
    cap = scenario.channel_cap if cap is None else cap
    service_ms = (resolve_service_time(scenario, cap) if service_time_min is None
                  else service_time_min) * MS_PER_MIN
    gen_latency = Latency.from_dict(w.get("generation_ms", {"dist": "uniform", "low": 6.0,
                                                             "high": 7.2}))
    processing_ms = float(w.get("imprinter_processing_ms", 0.0))
    horizon_ms = float(w.get("horizon_min", 7 * 24 * 60)) * MS_PER_MIN

    world = World(scenario, channel_cap=cap)
    clock, net = world.clock, world.net
    ledger = world.add_ledger()
    imprinter_spec = scenario.role("imprinter")
    imprinter = imprinter_spec[0].name if imprinter_spec else "imprinter"

    generated_at: dict[bytes, float] = {}
    announced_at: dict[bytes, float] = {}
    tx_device: dict[bytes, bytes] = {}
    gen_samples: list[float] = []
    announce_samples: list[float] = []
    imprint_samples: list[float] = []
    blocks: list[tuple[int, float, int]] = []
    seen: set[bytes] = set()

    def on_announce(msg) -> None:
        device: PublicIdentity = msg.body
        announced_at[device.id] = clock.now
        announce_samples.append((clock.now - generated_at[device.id]) / MS_PER_MIN)

        def submit() -> None:
            try:
                tx = create_imprinting_contract(device, world.admin.public_key, world.imprinter, seen)
            except AlreadyImprinted:
                return
            seen.add(device.id)
            tx_device[tx.digest] = device.id
            net.send(imprinter, ledger.name, "submit", tx)

        clock.schedule(processing_ms, submit, "imprint", device.id.hex()[:8])

    world.add_plain(imprinter, on_announce)
    net.subscribe(ANNOUNCE_TOPIC, imprinter)

    def on_block(block) -> None:
        t = clock.now
        blocks.append((block.height, block.timestamp, len(block.txs)))
        for tx in block.txs:
            dev = tx_device.get(tx.digest)
            if dev is not None:
                imprint_samples.append((t - announced_at[dev]) / MS_PER_MIN)
        if len(imprint_samples) == n_ids:
            ledger.stop_mining()

    ledger.block_listeners.append(on_block)

    gen_rng = random.Random(derive_seed(scenario.seed, "generation"))
    for i, count in enumerate(split_workload(n_ids, n_clients)):
        name = f"client-{i}"
        world.add_plain(name)
        key_rng = random.Random(derive_seed(scenario.seed, f"keys:{name}"))
        t = 0.0
        for _ in range(count):
            g = gen_latency.sample(gen_rng)
            t += g

            def generated(name=name, key_rng=key_rng, g=g) -> None:
                ident = generate_identity(key_rng)
                generated_at[ident.id] = clock.now
                gen_samples.append(g)

                def opened(ch, device=ident.public) -> None:
                    def transfer() -> None:
                        net.publish(ANNOUNCE_TOPIC, device, name)
                        net.close_channel(ch)

                    clock.schedule(service_ms, transfer, "announce", f"{name} #{ch.id}")

                net.open_channel(name, imprinter, on_open=opened)

            clock.schedule_at(t, generated, "generate", name)

    world.finish_topology()
    ledger.start_mining(clock)
    step = scenario.ledger.avg_mining_time_min * MS_PER_MIN
    while len(imprint_samples) < n_ids and clock.now < horizon_ms:
        clock.run_until(min(clock.now + step, horizon_ms))
    clock.run_until(clock.now)

    last = max((ts for _, ts, n in blocks if n), default=0.0)
    total_min = last
    rate = len(imprint_samples) / total_min if total_min > 0 else 0.0
    peak = {k: v for k, v in net.peak_open.items() if k.startswith("client-")}
    return EnrolmentRun(
        cap=cap,
        service_time_min=service_ms / MS_PER_MIN,
        identities=n_ids,
        imprinted=len(imprint_samples),
        generation=StageStats("generation", "ms", tuple(gen_samples)),
        announce=StageStats("announce", "min", tuple(announce_samples)),
        imprint=StageStats("imprint", "min", tuple(imprint_samples)),
        total_min=total_min,
        rate_per_min=rate,
        blocks=blocks,
        peak_open=peak,
        trace_digest=world.trace_digest(),
        chain_text=world.chain_text(),
    )


def run_checks(run: EnrolmentRun, scenario: Scenario, label: str) -> list[Check]:
    bound = theoretical_upper_bound(scenario.ledger)
    capacity = scenario.ledger.capacity
    gen_ms = run.generation.mean
    imprint_ms = run.imprint.mean * MS_PER_MIN if run.imprint.count else math.inf
    announce_ms = run.announce.mean * MS_PER_MIN if run.announce.count else math.inf
    return [
        check(f"{label}: all identities imprinted", run.imprinted == run.identities,
              f"{run.imprinted}/{run.identities}"),
        check(f"{label}: throughput within ledger bound", run.rate_per_min <= bound,
              f"{run.rate_per_min:.3f}/min <= {bound:g}/min"),
        check(f"{label}: block capacity respected", all(n <= capacity for _, _, n in run.blocks),
              f"max {max((n for _, _, n in run.blocks), default=0)} <= {capacity}"),
        check(f"{label}: channel cap respected",
              all(v <= run.cap for v in run.peak_open.values()),
              f"peak {max(run.peak_open.values(), default=0)} <= {run.cap}"),
    ] + ([check(f"{label}: stage ordering generation < imprint < announce",
                gen_ms < imprint_ms < announce_ms,
                f"{gen_ms:.3f} ms < {imprint_ms:.1f} ms < {announce_ms:.1f} ms")]
         if scenario.workload.get("expect_bottleneck", True) else [])


def run_enrolment(scenario: Scenario) -> Report:
    base = simulate_enrolment(scenario)
    checks = run_checks(base, scenario, f"cap={base.cap}")
    results = {"base": base.to_dict(),
               "bound_per_min": theoretical_upper_bound(scenario.ledger)}
    digests = [base.trace_digest]
    compare = scenario.workload.get("compare_cap")
    if compare is not None:
        other = simulate_enrolment(scenario, cap=int(compare),
                                   service_time_min=base.service_time_min)
        checks += run_checks(other, scenario, f"cap={other.cap}")
        checks.append(check(f"raising cap {base.cap}->{other.cap} shortens enrolment",
                            other.total_min < base.total_min,
                            f"{other.total_min:.2f} min < {base.total_min:.2f} min"))
        results["compare"] = other.to_dict()
        digests.append(other.trace_digest)
    min_rate = scenario.workload.get("min_rate_per_min")
    if min_rate is not None:
        checks.append(check("sustained enrolment rate reached", base.rate_per_min >= min_rate,
                            f"{base.rate_per_min:.3f}/min >= {min_rate}/min"))
    digest = digests[0] if len(digests) == 1 else combine_digests(digests)
    return Report(scenario, results, checks, digest, [], base.chain_text)

"""One test per acceptance criterion; each prints a single PASS/FAIL line."""
from __future__ import annotations

import math
import random
import time

import pytest

from ledger_iam.cli import main
from ledger_iam.contracts import generate_identity
from ledger_iam.harness import builtin_scenarios, load_scenario, run_scenario, summarize
from ledger_iam.ledger import (
    Block,
    Chain,
    LedgerParams,
    MalformedBlock,
    MalformedTx,
    Mempool,
    Transaction,
    TxKind,
    mine_block,
    submit_tx,
    validate_block,
)
from ledger_iam.merkle import MerkleProof, build_proof, verify_proof


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
        assert ok, detail
    return emit


def test_criterion_1_bound_and_block_capacity(verdict, capsys):
    code = main(["bound", "--block-size", "1000000", "--tx-size", "400", "--mining-time", "2.5"])
    printed = capsys.readouterr().out.strip()
    signer = generate_identity(random.Random(1))
    pool, chain = Mempool(), Chain()
    for i in range(3000):
        submit_tx(pool, Transaction.signed(TxKind.GRANT, i.to_bytes(4, "big"), signer))
    block = mine_block(pool, chain, LedgerParams(), 2.5)
    ok = code == 0 and printed == "1000 enrolments/minute" and len(block.txs) == 2500 \
        and len(pool) == 500
    verdict(1, "throughput bound is exact", ok,
            f"printed {printed!r}, block held {len(block.txs)}, {len(pool)} left pooled")


def test_criterion_2_enrolment(verdict):
    t0 = time.perf_counter()
    main_run = run_scenario(load_scenario("enrolment"))
    internal = run_scenario(load_scenario("enrolment-internal"))
    elapsed = time.perf_counter() - t0
    base, cmp_ = main_run.results["base"], main_run.results["compare"]
    gen, ann, imp = (s["mean"] for s in base["stages"])
    ok = (
        base["imprinted"] == 1000 and base["cap"] == 5
        and gen < imp * 60_000 < ann * 60_000
        and base["rate_per_min"] <= 1000
        and cmp_["cap"] == 50 and cmp_["total_min"] < base["total_min"]
        and internal.results["base"]["rate_per_min"] >= 400
        and main_run.passed and internal.passed and elapsed < 30
    )
    verdict(2, "enrolment ordering, ceiling and cap increase", ok,
            f"gen {gen:.2f} ms < imprint {imp:.2f} min < announce {ann:.2f} min; "
            f"{base['rate_per_min']:.2f}/min <= 1000; duration {base['total_min']:.1f} -> "
            f"{cmp_['total_min']:.1f} min at cap 50; internal "
            f"{internal.results['base']['rate_per_min']:.1f}/min; {elapsed:.1f} s")


def _flip(b: bytes, bit: int) -> bytes:
    out = bytearray(b)
    out[bit // 8] ^= 1 << (bit % 8)
    return bytes(out)


def test_criterion_3_merkle_and_tamper(verdict):
    t0 = time.perf_counter()
    rng = random.Random(3)
    proofs_ok = mutations_caught = mutations = 0
    for _ in range(1000):
        leaves = [rng.randbytes(rng.randint(1, 48)) for _ in range(rng.randint(1, 64))]
        i = rng.randrange(len(leaves))
        p = build_proof(leaves, i)
        proofs_ok += verify_proof(leaves[i], p)
        candidates = [(_flip(leaves[i], rng.randrange(8 * len(leaves[i]))), p),
                      (leaves[i], MerkleProof(i, p.siblings, _flip(p.root, rng.randrange(256))))]
        if p.siblings:
            k = rng.randrange(len(p.siblings))
            sib = list(p.siblings)
            sib[k] = _flip(sib[k], rng.randrange(256))
            candidates.append((leaves[i], MerkleProof(i, tuple(sib), p.root)))
        for leaf, proof in candidates:
            mutations += 1
            mutations_caught += not verify_proof(leaf, proof)

    params = LedgerParams()
    signer = generate_identity(rng)
    pool, chain = Mempool(), Chain()
    for b in range(5):
        for k in range(rng.randint(0, 6)):
            submit_tx(pool, Transaction.signed(TxKind.GRANT, bytes([b, k]), signer))
        mine_block(pool, chain, params, 2.5 * (b + 1))
    rejected = 0
    for _ in range(1000):
        h = rng.randrange(chain.height)
        raw = bytearray(chain.blocks[h].to_bytes())
        pos = rng.randrange(len(raw))
        raw[pos] = (raw[pos] + rng.randint(1, 255)) % 256
        prefix = Chain()
        for blk in chain.blocks[:h]:
            prefix.append(blk)
        try:
            bad = Block.from_bytes(bytes(raw))
        except (MalformedBlock, MalformedTx, ValueError):
            rejected += 1
            continue
        rejected += not validate_block(bad, prefix, params)
    elapsed = time.perf_counter() - t0
    ok = proofs_ok == 1000 and mutations_caught == mutations and rejected == 1000 and elapsed < 10
    verdict(3, "Merkle soundness and tamper detection", ok,
            f"{proofs_ok}/1000 honest proofs, {mutations_caught}/{mutations} mutations caught, "
            f"{rejected}/1000 tampered blocks rejected, {elapsed:.1f} s")


def test_criterion_4_cap_dichotomy(verdict):
    t0 = time.perf_counter()
    reports = [run_scenario(load_scenario("cap-dichotomy").with_seed(s)) for s in (11, 12, 13)]
    elapsed = time.perf_counter() - t0
    failed = [c.name for r in reports for c in r.checks if not c.passed]
    rows = reports[0].results["providers"]
    ok = not failed and elapsed < 10 and rows["strict"]["granted_cache"] == 0
    verdict(4, "CAP dichotomy under partition", ok,
            f"inf cache grants {rows['strict']['granted_cache']}, zero-threshold max wait "
            f"{rows['avail']['max_wait_ms']} ms, finite exact waits "
            f"{rows['short']['exact']}+{rows['long']['exact']}, {elapsed:.2f} s"
            + (f"; failed {failed}" if failed else ""))


def test_criterion_5_stale_permission(verdict):
    t0 = time.perf_counter()
    report = run_scenario(load_scenario("stale-permission"))
    elapsed = time.perf_counter() - t0
    door = report.results["providers"]["door"]
    ok = report.passed and elapsed < 5 and door["grants_after_sync"] == 0 and all(
        g["basis"] == "LocalCache" for g in door["stale_grants"])
    verdict(5, "stale-grant window bounded by heal and sync", ok,
            f"{len(door['stale_grants'])} LocalCache grants over "
            f"{door['stale_window_min']:.2f} min, {door['grants_after_sync']} after sync, "
            f"{elapsed:.2f} s")


def test_criterion_6_case_studies(verdict):
    t0 = time.perf_counter()
    car = run_scenario(load_scenario("smart-vehicle"))
    t1 = time.perf_counter()
    sensors = run_scenario(load_scenario("sensor-network"))
    t2 = time.perf_counter()
    cut = [a for a in car.results["attempts"] if a["cloud_cut"]]
    forged = sensors.results["forgery"]
    ok = car.passed and sensors.passed and t1 - t0 < 10 and t2 - t1 < 10 and cut
    verdict(6, "smart vehicle and sensor network", bool(ok),
            f"unlock during cut {cut[0]['ledger_iam']['outcome']}"
            f"({cut[0]['ledger_iam']['basis']}) with {cut[0]['ledger_iam']['messages_sent']} "
            f"messages vs 8; forged block: {forged['accepted']} accepted, "
            f"{forged['rejected']} rejected of {forged['offered']}")


def test_criterion_7_determinism(verdict):
    mismatched = []
    names = builtin_scenarios()
    for name in names:
        sc = load_scenario(name)
        a, b = run_scenario(sc), run_scenario(sc)
        if (a.to_json() != b.to_json() or a.trace_digest != b.trace_digest
                or a.decisions_jsonl() != b.decisions_jsonl() or a.chain_text != b.chain_text):
            mismatched.append(name)
    verdict(7, "byte-identical replays", not mismatched,
            f"{len(names) - len(mismatched)}/{len(names)} scenarios identical")


def test_criterion_8_statistics(verdict):
    vectors = [
        ([5.0], 5.0, 0.0),
        ([1, 2, 3, 4, 5], 3.0, math.sqrt(0.5)),
        ([2, 4, 4, 4, 5, 5, 7, 9], 5.0, math.sqrt(4 / 7)),
        ([0.1, 0.2, 0.3], 0.2, 0.1 / math.sqrt(3)),
    ]
    bad = []
    for xs, mean, se in vectors:
        s = summarize(xs)
        if not (math.isclose(s.mean, mean, rel_tol=1e-12)
                and math.isclose(s.se, se, rel_tol=1e-12, abs_tol=0 if se else 1e-300)):
            bad.append((xs, s))
    verdict(8, "summary statistics match hand computation", not bad,
            f"{len(vectors) - len(bad)}/{len(vectors)} vectors within 1e-12")

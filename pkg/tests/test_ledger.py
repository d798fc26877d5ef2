from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from ledger_iam.contracts import create_imprinting_contract
from ledger_iam.ledger import (
    EMPTY_ROOT,
    TX_SIZE,
    Block,
    Chain,
    ChainImportError,
    DuplicateTx,
    InvalidParams,
    LedgerParams,
    MalformedBlock,
    MalformedTx,
    Mempool,
    RejectedTx,
    Transaction,
    TxKind,
    export_chain,
    import_chain,
    meets_difficulty,
    mine_block,
    seal_block,
    submit_tx,
    theoretical_upper_bound,
    validate_block,
)
from ledger_iam.merkle import verify_proof


def blank_txs(signer, n, tag=b"t"):
    return [Transaction.signed(TxKind.GRANT, tag + i.to_bytes(4, "big"), signer) for i in range(n)]


@pytest.mark.parametrize("block, tx, minutes, expected", [
    (1_000_000, 400, 2.5, 1000.0),
    (1_000_000, 400, 1.0, 2500.0),
    (400, 400, 2.0, 0.5),
])
def test_upper_bound_examples(block, tx, minutes, expected):
    assert theoretical_upper_bound(LedgerParams(block, tx, minutes)) == expected


@pytest.mark.parametrize("kwargs", [
    {"block_size_bytes": 0}, {"tx_size_bytes": 0}, {"tx_size_bytes": -400},
    {"avg_mining_time_min": 0.0}, {"avg_mining_time_min": -1.0},
    {"avg_mining_time_min": float("inf")}, {"difficulty_bits": 40},
])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidParams):
        LedgerParams(**kwargs)


def test_capacity_is_floor():
    assert LedgerParams().capacity == 2500
    assert LedgerParams(999, 400).capacity == 2


def test_transaction_is_400_bytes_and_round_trips(keys):
    tx = Transaction.signed(TxKind.REVOKE, b"\x01" * 32, keys["a"])
    raw = tx.to_bytes()
    assert len(raw) == TX_SIZE
    back = Transaction.from_bytes(raw)
    assert back == tx and back.to_bytes() == raw
    assert back.verify_signature()


def test_transaction_rejects_bad_layouts(keys):
    tx = Transaction.signed(TxKind.REVOKE, b"\x01" * 32, keys["a"])
    raw = bytearray(tx.to_bytes())
    with pytest.raises(MalformedTx):
        Transaction.from_bytes(bytes(raw[:-1]))
    padded = bytearray(raw)
    padded[200] = 7  # inside the zero padding
    with pytest.raises(MalformedTx):
        Transaction.from_bytes(bytes(padded))
    bad_kind = bytearray(raw)
    bad_kind[1] = 99
    with pytest.raises(MalformedTx):
        Transaction.from_bytes(bytes(bad_kind))
    with pytest.raises(MalformedTx):
        Transaction(TxKind.GRANT, keys["a"].public_key, b"x" * 301)


def test_submit_rejects_bad_signature_and_duplicates(keys):
    pool = Mempool()
    tx = Transaction.signed(TxKind.GRANT, b"payload", keys["a"])
    submit_tx(pool, tx)
    with pytest.raises(DuplicateTx):
        submit_tx(pool, tx)
    forged = Transaction(tx.kind, keys["b"].public_key, tx.payload, tx.signature)
    with pytest.raises(RejectedTx):
        submit_tx(pool, forged)
    assert len(pool) == 1


def test_block_of_3000_takes_2500(keys, params):
    pool, chain = Mempool(), Chain()
    for tx in blank_txs(keys["a"], 3000):
        submit_tx(pool, tx)
    block = mine_block(pool, chain, params, 2.5)
    assert len(block.txs) == 2500
    assert len(pool) == 500
    assert chain.height == 1
    rest = mine_block(pool, chain, params, 5.0)
    assert len(rest.txs) == 500 and len(pool) == 0


def test_empty_pool_mines_empty_block(params):
    chain = Chain()
    block = mine_block(Mempool(), chain, params, 0.0)
    assert block.txs == () and block.merkle_root == EMPTY_ROOT
    assert chain.height == 1
    assert meets_difficulty(block.block_hash, params.difficulty_bits)


def test_single_tx_block_proof(keys, params):
    pool, chain = Mempool(), Chain()
    tx = blank_txs(keys["a"], 1)[0]
    submit_tx(pool, tx)
    block = mine_block(pool, chain, params, 1.0)
    assert block.txs == (tx,)
    assert verify_proof(tx.to_bytes(), block.proof(0), block.merkle_root)
    assert chain.proof_for(tx.digest)[1] == 0


def test_validate_honest_and_mutated(keys, params):
    pool, chain = Mempool(), Chain()
    for tx in blank_txs(keys["a"], 4):
        submit_tx(pool, tx)
    block = mine_block(pool, Chain(), params, 1.0)
    assert validate_block(block, chain, params)
    raw = bytearray(block.to_bytes())
    raw[-10] ^= 1  # inside the last signature
    mutated = Block.from_bytes(bytes(raw))
    assert not validate_block(mutated, chain, params)


def test_nonce_failing_difficulty_rejected(params):
    chain = Chain()
    block = mine_block(Mempool(), Chain(), params, 0.0)
    nonce = block.nonce + 1
    while True:
        candidate = Block(block.height, block.prev_hash, block.merkle_root, nonce,
                          block.timestamp, block.txs, block.bits)
        if not meets_difficulty(candidate.block_hash, params.difficulty_bits):
            break
        nonce += 1
    assert not validate_block(candidate, chain, params)


def test_wrong_link_and_backwards_time_rejected(params):
    chain = Chain()
    mine_block(Mempool(), chain, params, 5.0)
    orphan = seal_block(1, bytes(32), (), 6.0, params.difficulty_bits)
    assert not validate_block(orphan, chain, params)
    early = seal_block(1, chain.tip_hash, (), 4.0, params.difficulty_bits)
    assert not validate_block(early, chain, params)
    ok = seal_block(1, chain.tip_hash, (), 6.0, params.difficulty_bits)
    assert validate_block(ok, chain, params)


def test_replayed_transaction_rejected(keys, params):
    pool, chain = Mempool(), Chain()
    tx = blank_txs(keys["a"], 1)[0]
    submit_tx(pool, tx)
    mine_block(pool, chain, params, 1.0)
    replay = seal_block(chain.height, chain.tip_hash, (tx,), 2.0, params.difficulty_bits)
    assert not validate_block(replay, chain, params)


def test_oversized_block_rejected(keys):
    small = LedgerParams(block_size_bytes=800, difficulty_bits=4)
    block = seal_block(0, bytes(32), blank_txs(keys["a"], 3), 0.0, 4)
    assert not validate_block(block, Chain(), small)


def test_block_bytes_round_trip(keys, params):
    pool = Mempool()
    for tx in blank_txs(keys["a"], 3):
        submit_tx(pool, tx)
    block = mine_block(pool, Chain(), params, 1.0)
    assert Block.from_bytes(block.to_bytes()) == block
    with pytest.raises(MalformedBlock):
        Block.from_bytes(block.to_bytes()[:-1])


def test_governed_chain_drops_unauthorised(keys, governed, params):
    chain, pool = governed
    dev = keys["dev"]
    good = create_imprinting_contract(dev.public, keys["admin"].public_key, keys["imprinter"])
    bad = create_imprinting_contract(keys["dev2"].public, keys["admin"].public_key, keys["rogue"])
    submit_tx(pool, good)
    submit_tx(pool, bad)
    block = mine_block(pool, chain, params, 1.0)
    assert block.txs == (good,)
    assert pool.dropped == [bad]
    assert chain.state.is_imprinted(dev.id)


def test_export_import_round_trip(keys, governed, params, tmp_path):
    chain, pool = governed
    for i in range(3):
        d = keys[f"dev{i}"]
        submit_tx(pool, create_imprinting_contract(d.public, keys["admin"].public_key,
                                                   keys["imprinter"]))
        mine_block(pool, chain, params, 2.5 * (i + 1))
    text = export_chain(chain, params)
    assert text.splitlines()[0].startswith("# ledger-iam-chain v1 hash=sha256 sig=ed25519")
    again, p2 = import_chain(text)
    assert p2 == params
    assert [b.block_hash for b in again.blocks] == [b.block_hash for b in chain.blocks]
    lines = text.splitlines()
    lines[2] = lines[2][:-2] + ("00" if lines[2][-2:] != "00" else "01")
    with pytest.raises(ChainImportError):
        import_chain("\n".join(lines))
    with pytest.raises(ChainImportError):
        import_chain("no header\n")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 40), st.integers(1, 12))
def test_capacity_law(n, cap):
    from ledger_iam.contracts import generate_identity
    signer = generate_identity(random.Random(n))
    params = LedgerParams(block_size_bytes=400 * cap, difficulty_bits=4)
    pool, chain = Mempool(), Chain()
    for tx in blank_txs(signer, n):
        submit_tx(pool, tx)
    mined = []
    t = 0.0
    while len(pool):
        t += 1.0
        block = mine_block(pool, chain, params, t)
        assert len(block.txs) <= params.capacity
        if len(pool):
            assert len(block.txs) == params.capacity
        mined.extend(block.txs)
    # conservation: every submitted tx mined exactly once
    assert sorted(tx.digest for tx in mined) == sorted(tx.digest for tx in blank_txs(signer, n))

"""Simulated proof-of-work ledger.

Transactions have a fixed 400-byte canonical layout::

    offset  size  field
    0       1     layout version (1)
    1       1     kind
    2       2     payload length, big endian
    4       32    signer public key
    36      300   payload, zero padded
    336     64    signature over bytes [0, 336)

Blocks serialize as a 93-byte header, the 32-byte header digest the miner
claims, then the transactions back to back. Mining cost is kept negligible
(small leading-zero-bit target) because block timing comes from the
simulation clock, not from hashing.
"""
from __future__ import annotations

import enum
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Protocol

from . import crypto
from .merkle import DIGEST_SIZE, HASH_NAME, MerkleProof, build_proof, digest, merkle_root

TX_SIZE = 400
TX_VERSION = 1
TX_HEADER = struct.Struct(">BBH")
PAYLOAD_OFFSET = TX_HEADER.size + crypto.PUBKEY_SIZE
SIGNATURE_OFFSET = TX_SIZE - crypto.SIGNATURE_SIZE
MAX_PAYLOAD = SIGNATURE_OFFSET - PAYLOAD_OFFSET

BLOCK_HEADER = struct.Struct(">Q32s32sdQBI")
GENESIS_PREV = bytes(DIGEST_SIZE)
EMPTY_ROOT = bytes(DIGEST_SIZE)
CHAIN_FORMAT = "ledger-iam-chain"
CHAIN_FORMAT_VERSION = 1


class LedgerError(Exception):
    pass


class InvalidParams(LedgerError, ValueError):
    pass


class MalformedTx(LedgerError, ValueError):
    pass


class MalformedBlock(LedgerError, ValueError):
    pass


class RejectedTx(LedgerError):
    """Transaction failed signature verification."""


class DuplicateTx(LedgerError):
    """Transaction digest already seen by this pool; the pool is unchanged."""


class ChainImportError(LedgerError):
    pass


class TxKind(enum.IntEnum):
    IMPRINT = 1
    GRANT = 2
    REVOKE = 3
    TRANSFER_OWNERSHIP = 4


@dataclass(frozen=True)
class LedgerParams:
    block_size_bytes: int = 1_000_000
    tx_size_bytes: int = TX_SIZE
    avg_mining_time_min: float = 2.5
    difficulty_bits: int = 8

    def __post_init__(self) -> None:
        if not self.tx_size_bytes > 0:
            raise InvalidParams("tx_size_bytes must be positive")
        if self.block_size_bytes < self.tx_size_bytes:
            raise InvalidParams("block_size_bytes must be at least tx_size_bytes")
        if not self.avg_mining_time_min > 0 or not math.isfinite(self.avg_mining_time_min):
            raise InvalidParams("avg_mining_time_min must be positive and finite")
        if not 0 <= self.difficulty_bits <= 32:
            raise InvalidParams("difficulty_bits must be within [0, 32]")

    @property
    def capacity(self) -> int:
        """Transactions per block."""
        return self.block_size_bytes // self.tx_size_bytes

    def to_dict(self) -> dict:
        return {
            "block_size_bytes": self.block_size_bytes,
            "tx_size_bytes": self.tx_size_bytes,
            "avg_mining_time_min": self.avg_mining_time_min,
            "difficulty_bits": self.difficulty_bits,
        }


def theoretical_upper_bound(params: LedgerParams) -> float:
    """Enrolments per minute the ledger can absorb at best."""
    if not isinstance(params, LedgerParams):
        raise InvalidParams("expected LedgerParams")
    return params.block_size_bytes / (params.tx_size_bytes * params.avg_mining_time_min)


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    signer: bytes
    payload: bytes
    signature: bytes = b""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TxKind(self.kind))
        if len(self.signer) != crypto.PUBKEY_SIZE:
            raise MalformedTx("signer must be a 32-byte public key")
        if len(self.payload) > MAX_PAYLOAD:
            raise MalformedTx(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")
        if self.signature and len(self.signature) != crypto.SIGNATURE_SIZE:
            raise MalformedTx("signature must be 64 bytes")

    @classmethod
    def signed(cls, kind: TxKind, payload: bytes, signer) -> "Transaction":
        """Build and sign; ``signer`` needs ``public_key`` and ``sign(msg)``."""
        unsigned = cls(kind, signer.public_key, payload)
        return cls(kind, signer.public_key, payload, signer.sign(unsigned.signing_bytes()))

    def signing_bytes(self) -> bytes:
        head = TX_HEADER.pack(TX_VERSION, int(self.kind), len(self.payload))
        return head + self.signer + self.payload.ljust(MAX_PAYLOAD, b"\0")

    def to_bytes(self) -> bytes:
        return self.signing_bytes() + self.signature.ljust(crypto.SIGNATURE_SIZE, b"\0")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Transaction":
        if len(raw) != TX_SIZE:
            raise MalformedTx(f"transaction must be {TX_SIZE} bytes, got {len(raw)}")
        version, kind, length = TX_HEADER.unpack_from(raw)
        if version != TX_VERSION:
            raise MalformedTx(f"unknown layout version {version}")
        try:
            kind = TxKind(kind)
        except ValueError:
            raise MalformedTx(f"unknown transaction kind {kind}") from None
        if length > MAX_PAYLOAD:
            raise MalformedTx("payload length field out of range")
        body = raw[PAYLOAD_OFFSET:SIGNATURE_OFFSET]
        if any(body[length:]):
            raise MalformedTx("non-zero payload padding")
        return cls(kind, raw[TX_HEADER.size:PAYLOAD_OFFSET], body[:length], raw[SIGNATURE_OFFSET:])

    @cached_property
    def digest(self) -> bytes:
        return digest(self.to_bytes())

    def verify_signature(self) -> bool:
        return crypto.verify(self.signer, self.signing_bytes(), self.signature)


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    timestamp: float
    nonce: int
    bits: int
    tx_count: int

    def to_bytes(self) -> bytes:
        return BLOCK_HEADER.pack(self.height, self.prev_hash, self.merkle_root,
                                 self.timestamp, self.nonce, self.bits, self.tx_count)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BlockHeader":
        return cls(*BLOCK_HEADER.unpack(raw))

    @cached_property
    def hash(self) -> bytes:
        return digest(self.to_bytes())


def meets_difficulty(block_hash: bytes, bits: int) -> bool:
    return int.from_bytes(block_hash, "big") >> (8 * len(block_hash) - bits) == 0


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    nonce: int
    timestamp: float
    txs: tuple[Transaction, ...]
    bits: int
    block_hash: bytes = b""

    def __post_init__(self) -> None:
        object.__setattr__(self, "txs", tuple(self.txs))
        if not self.block_hash:
            object.__setattr__(self, "block_hash", self.header.hash)

    @cached_property
    def header(self) -> BlockHeader:
        return BlockHeader(self.height, self.prev_hash, self.merkle_root, self.timestamp,
                           self.nonce, self.bits, len(self.txs))

    @property
    def tx_bytes(self) -> int:
        return TX_SIZE * len(self.txs)

    def leaves(self) -> list[bytes]:
        return [tx.to_bytes() for tx in self.txs]

    def proof(self, index: int) -> MerkleProof:
        return build_proof(self.leaves(), index)

    def to_bytes(self) -> bytes:
        return b"".join([self.header.to_bytes(), self.block_hash, *self.leaves()])

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Block":
        head = BLOCK_HEADER.size + DIGEST_SIZE
        if len(raw) < head:
            raise MalformedBlock("truncated block")
        header = BlockHeader.from_bytes(raw[:BLOCK_HEADER.size])
        body = raw[head:]
        if len(body) != header.tx_count * TX_SIZE:
            raise MalformedBlock("transaction count does not match body length")
        txs = tuple(Transaction.from_bytes(body[i:i + TX_SIZE])
                    for i in range(0, len(body), TX_SIZE))
        return cls(header.height, header.prev_hash, header.merkle_root, header.nonce,
                   header.timestamp, txs, header.bits, raw[BLOCK_HEADER.size:head])


def compute_root(txs: Iterable[Transaction]) -> bytes:
    leaves = [tx.to_bytes() for tx in txs]
    return merkle_root(leaves) if leaves else EMPTY_ROOT


class ContractRules(Protocol):
    """What a chain consults to decide whether a transaction may be included."""

    def admits(self, tx: Transaction) -> bool: ...

    def apply(self, tx: Transaction, height: int, index: int) -> None: ...

    def copy(self) -> "ContractRules": ...


class HeaderChain:
    """Validated headers only, as held by a lightweight node."""

    def __init__(self) -> None:
        self.headers: list[BlockHeader] = []

    @property
    def height(self) -> int:
        """Height the next block must carry (number of blocks held)."""
        return len(self.headers)

    @property
    def tip_hash(self) -> bytes:
        return self.headers[-1].hash if self.headers else GENESIS_PREV

    @property
    def tip_timestamp(self) -> float:
        return self.headers[-1].timestamp if self.headers else float("-inf")

    def append_header(self, header: BlockHeader) -> None:
        self.headers.append(header)


class Chain(HeaderChain):
    """Full chain: blocks, a transaction index and optional contract rules."""

    def __init__(self, state: ContractRules | None = None) -> None:
        super().__init__()
        self.blocks: list[Block] = []
        self.state = state
        self.tx_index: dict[bytes, tuple[int, int]] = {}

    def append(self, block: Block) -> None:
        for i, tx in enumerate(block.txs):
            self.tx_index[tx.digest] = (block.height, i)
            if self.state is not None:
                self.state.apply(tx, block.height, i)
        self.blocks.append(block)
        self.append_header(block.header)

    def locate(self, tx_digest: bytes) -> tuple[int, int] | None:
        return self.tx_index.get(tx_digest)

    def proof_for(self, tx_digest: bytes) -> tuple[Transaction, int, MerkleProof]:
        height, index = self.tx_index[tx_digest]
        block = self.blocks[height]
        return block.txs[index], height, block.proof(index)

    def iter_txs(self, start_height: int = 0):
        for block in self.blocks[start_height:]:
            for i, tx in enumerate(block.txs):
                yield block.height, i, tx


class Mempool:
    """FIFO transaction pool deduplicated by digest, for the life of the pool."""

    def __init__(self) -> None:
        self._queue: deque[Transaction] = deque()
        self._seen: set[bytes] = set()
        self.dropped: list[Transaction] = []

    def __len__(self) -> int:
        return len(self._queue)

    def __contains__(self, tx_digest: bytes) -> bool:
        return any(tx.digest == tx_digest for tx in self._queue)

    def pending(self) -> list[Transaction]:
        return list(self._queue)


def submit_tx(pool: Mempool, tx: Transaction) -> bytes:
    """Queue ``tx``; returns its digest as the acknowledgement."""
    if not tx.verify_signature():
        raise RejectedTx(f"bad signature on {tx.kind.name} transaction")
    if tx.digest in pool._seen:
        raise DuplicateTx(tx.digest.hex())
    pool._seen.add(tx.digest)
    pool._queue.append(tx)
    return tx.digest


def _solve(height, prev_hash, root, timestamp, bits, n) -> tuple[int, bytes]:
    nonce = 0
    while True:
        h = BlockHeader(height, prev_hash, root, timestamp, nonce, bits, n).hash
        if meets_difficulty(h, bits):
            return nonce, h
        nonce += 1


def seal_block(height: int, prev_hash: bytes, txs: Iterable[Transaction], timestamp: float,
               bits: int) -> Block:
    """Assemble ``txs`` into a block and search a nonce; no chain rules are consulted."""
    txs = tuple(txs)
    root = compute_root(txs)
    nonce, block_hash = _solve(height, prev_hash, root, float(timestamp), bits, len(txs))
    return Block(height, prev_hash, root, nonce, float(timestamp), txs, bits, block_hash)


def mine_block(pool: Mempool, chain: Chain, params: LedgerParams, now: float) -> Block:
    """Mine the next block at simulated time ``now`` (minutes) and append it.

    Takes pooled transactions in FIFO order up to the block capacity. When the
    chain carries contract rules, transactions they refuse are dropped from the
    pool (recorded in ``pool.dropped``) instead of being included.
    """
    trial = chain.state.copy() if chain.state is not None else None
    chosen: list[Transaction] = []
    while pool._queue and len(chosen) < params.capacity:
        tx = pool._queue.popleft()
        if trial is not None:
            if not trial.admits(tx):
                pool.dropped.append(tx)
                continue
            trial.apply(tx, chain.height, len(chosen))
        chosen.append(tx)
    timestamp = max(float(now), chain.tip_timestamp)
    block = seal_block(chain.height, chain.tip_hash, chosen, timestamp, params.difficulty_bits)
    if not validate_block(block, chain, params):
        raise LedgerError("freshly mined block failed validation")
    chain.append(block)
    return block


def validate_header(header: BlockHeader, block_hash: bytes, chain: HeaderChain,
                    params: LedgerParams) -> bool:
    """Link, claimed-digest and proof-of-work checks; no body needed."""
    return (
        block_hash == header.hash
        and header.bits == params.difficulty_bits
        and meets_difficulty(block_hash, header.bits)
        and header.height == chain.height
        and header.prev_hash == chain.tip_hash
        and header.timestamp >= chain.tip_timestamp
        and header.tx_count * TX_SIZE <= params.block_size_bytes
    )


def validate_block(block: Block, chain: HeaderChain, params: LedgerParams) -> bool:
    if not validate_header(block.header, block.block_hash, chain, params):
        return False
    if block.tx_bytes > params.block_size_bytes or len(block.txs) > params.capacity:
        return False
    if compute_root(block.txs) != block.merkle_root:
        return False
    digests = [tx.digest for tx in block.txs]
    if len(set(digests)) != len(digests):
        return False
    index = getattr(chain, "tx_index", {})
    if any(d in index for d in digests):
        return False
    if not all(tx.verify_signature() for tx in block.txs):
        return False
    state = getattr(chain, "state", None)
    if state is not None:
        trial = state.copy()
        for i, tx in enumerate(block.txs):
            if not trial.admits(tx):
                return False
            trial.apply(tx, block.height, i)
    return True


def chain_header_line(params: LedgerParams) -> str:
    return (f"# {CHAIN_FORMAT} v{CHAIN_FORMAT_VERSION} hash={HASH_NAME} "
            f"sig={crypto.SIGNATURE_SCHEME} block_size={params.block_size_bytes} "
            f"tx_size={params.tx_size_bytes} mining_min={params.avg_mining_time_min!r} "
            f"difficulty_bits={params.difficulty_bits}")


def export_chain(chain: Chain, params: LedgerParams) -> str:
    lines = [chain_header_line(params)]
    lines.extend(block.to_bytes().hex() for block in chain.blocks)
    return "\n".join(lines) + "\n"


def write_chain(chain: Chain, params: LedgerParams, path: str | Path) -> None:
    Path(path).write_text(export_chain(chain, params))


def _parse_chain_header(line: str) -> LedgerParams:
    fields = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
    if CHAIN_FORMAT not in line or fields.get("hash") != HASH_NAME:
        raise ChainImportError(f"unsupported chain header: {line!r}")
    return LedgerParams(int(fields["block_size"]), int(fields["tx_size"]),
                        float(fields["mining_min"]), int(fields["difficulty_bits"]))


def import_chain(text: str, state: ContractRules | None = None) -> tuple[Chain, LedgerParams]:
    """Rebuild and fully re-validate a chain from its exported text."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ChainImportError("missing chain header line")
    params = _parse_chain_header(lines[0])
    chain = Chain(state)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            block = Block.from_bytes(bytes.fromhex(line.strip()))
        except ValueError as exc:
            raise ChainImportError(f"line {lineno}: {exc}") from exc
        if not validate_block(block, chain, params):
            raise ChainImportError(f"line {lineno}: block {block.height} failed validation")
        chain.append(block)
    return chain, params


def read_chain(path: str | Path, state: ContractRules | None = None) -> tuple[Chain, LedgerParams]:
    return import_chain(Path(path).read_text(), state)

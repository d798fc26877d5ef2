"""Device-side protocol.

A ``Node`` keeps validated block headers plus the contracts that concern it,
each with a Merkle proof against one of those headers. Access requests run a
three-message nonce handshake (request, challenge, signed response) followed
by the provider's decision.

The provider decides with the freshness threshold of its ``NodePolicy``: it
tries to fetch fresh ledger state for up to that many simulated milliseconds
and decides on it if it arrives. Otherwise a finite threshold falls back to
the verified local cache, while an infinite one keeps waiting. Every decision
records which basis it used.

``LedgerService`` is the ledger endpoint nodes talk to: it owns the full
chain and mempool, mines on the simulation clock and answers fetches.
"""
from __future__ import annotations

import enum
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .contracts import (
    AccessContract,
    ContractState,
    Identity,
    ImprintingContract,
    OwnershipTransfer,
    Revocation,
    decode,
    identity_id,
)
from . import crypto
from .ledger import (
    Block,
    BlockHeader,
    Chain,
    DuplicateTx,
    HeaderChain,
    LedgerParams,
    Mempool,
    RejectedTx,
    Transaction,
    mine_block,
    submit_tx,
    validate_block,
    validate_header,
)
from .merkle import MerkleProof, verify_proof
from .netsim import Message, Network, SimClock, SimEvent

MS_PER_MIN = 60_000.0
NONCE_SIZE = 16
ACCESS_TAG = b"ledger-iam/access/v1"


class LinkDown(RuntimeError):
    pass


def _threshold(value) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinity", "consistency"):
        return math.inf
    return float(value)


@dataclass(frozen=True)
class NodePolicy:
    """How long to chase fresh ledger state before deciding.

    freshness_threshold: simulated ms; 0 decides from cache at once (pure
        availability), ``math.inf`` never decides from cache (pure consistency).
    cache_ttl: simulated minutes a cache entry stays usable after refresh;
        None keeps entries through partitions indefinitely.
    retry_interval: ms between fetch attempts while a decision waits.
    refresh_interval: ms between background syncs; None disables them.
    """

    freshness_threshold: float = 0.0
    cache_ttl: float | None = None
    retry_interval: float = 500.0
    refresh_interval: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "freshness_threshold", _threshold(self.freshness_threshold))
        if math.isnan(self.freshness_threshold) or self.freshness_threshold < 0:
            raise ValueError("freshness_threshold must be >= 0")
        if not self.retry_interval > 0:
            raise ValueError("retry_interval must be positive")
        if self.cache_ttl is not None and self.cache_ttl < 0:
            raise ValueError("cache_ttl must be >= 0")

    @property
    def consistent(self) -> bool:
        return math.isinf(self.freshness_threshold)

    def to_dict(self) -> dict:
        t = self.freshness_threshold
        return {"freshness_threshold_ms": "inf" if math.isinf(t) else t,
                "cache_ttl_min": self.cache_ttl, "retry_interval_ms": self.retry_interval,
                "refresh_interval_ms": self.refresh_interval}

    @classmethod
    def from_dict(cls, d: dict) -> "NodePolicy":
        return cls(d.get("freshness_threshold_ms", 0.0), d.get("cache_ttl_min"),
                   d.get("retry_interval_ms", 500.0), d.get("refresh_interval_ms"))


class Outcome(str, enum.Enum):
    GRANTED = "Granted"
    DENIED = "Denied"
    TIMED_OUT = "TimedOut"


class Basis(str, enum.Enum):
    FRESH_LEDGER = "FreshLedger"
    LOCAL_CACHE = "LocalCache"


@dataclass(frozen=True)
class AccessRequest:
    requestor_id: bytes
    provider_id: bytes
    slot: int
    nonce: bytes
    requestor_pubkey: bytes
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return (ACCESS_TAG + self.requestor_id + self.provider_id
                + self.slot.to_bytes(1, "big") + self.nonce)

    @classmethod
    def signed(cls, requestor: Identity, provider_id: bytes, slot: int,
               nonce: bytes) -> "AccessRequest":
        req = cls(requestor.id, provider_id, slot, nonce, requestor.public_key)
        return cls(req.requestor_id, provider_id, slot, nonce, requestor.public_key,
                   requestor.sign(req.signing_bytes()))

    def verify(self) -> bool:
        return (0 <= self.slot < 256
                and identity_id(self.requestor_pubkey) == self.requestor_id
                and crypto.verify(self.requestor_pubkey, self.signing_bytes(), self.signature))


@dataclass(frozen=True)
class AccessDecision:
    time: float
    requestor_id: bytes
    provider_id: bytes
    slot: int
    outcome: Outcome
    basis: Basis | None
    as_of_height: int | None
    contract_digest: bytes | None = None
    waited: float = 0.0
    reason: str = ""
    node: str = ""

    @property
    def granted(self) -> bool:
        return self.outcome is Outcome.GRANTED

    def to_record(self) -> dict:
        return {
            "time_ms": self.time,
            "node": self.node,
            "requestor": self.requestor_id.hex(),
            "provider": self.provider_id.hex(),
            "slot": self.slot,
            "decision": self.outcome.value,
            "basis": self.basis.value if self.basis else None,
            "height": self.as_of_height,
            "contract": self.contract_digest.hex() if self.contract_digest else None,
            "waited_ms": self.waited,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class CacheEntry:
    contract: AccessContract
    tx: Transaction
    proof: MerkleProof
    block_height: int
    as_of_height: int
    cached_at: float


class ContractCache:
    """Effective grant per (provider_id, requestor_id), each with its proof."""

    def __init__(self) -> None:
        self.entries: dict[tuple[bytes, bytes], CacheEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, provider_id: bytes, requestor_id: bytes) -> CacheEntry | None:
        return self.entries.get((provider_id, requestor_id))

    def put(self, entry: CacheEntry) -> None:
        c = entry.contract
        self.entries[(c.provider_id, c.requestor_id)] = entry

    def drop(self, provider_id: bytes, requestor_id: bytes) -> None:
        self.entries.pop((provider_id, requestor_id), None)


@dataclass
class FetchReply:
    from_height: int
    headers: list[tuple[BlockHeader, bytes]]
    relevant: list[tuple[Transaction, int, int, MerkleProof]]
    blocks: list[Block] = field(default_factory=list)


@dataclass(frozen=True)
class DispatchResult:
    offered: int
    accepted: int
    rejected: int


def is_relevant(contract, watch: frozenset, grants: dict[bytes, AccessContract]) -> bool:
    if isinstance(contract, (ImprintingContract, OwnershipTransfer)):
        return contract.device_id in watch
    if isinstance(contract, AccessContract):
        return contract.provider_id in watch
    if isinstance(contract, Revocation):
        g = grants.get(contract.target)
        return g is not None and g.provider_id in watch
    return False


class LedgerService:
    """Full ledger endpoint: chain, mempool, periodic mining and fetch answers."""

    def __init__(self, name: str, params: LedgerParams, network: Network | None = None,
                 state: ContractState | None = None) -> None:
        self.name = name
        self.params = params
        self.network = network
        self.chain = Chain(state if state is not None else ContractState())
        self.pool = Mempool()
        self.rejected: list[tuple[Transaction, str]] = []
        self.block_listeners: list[Callable[[Block], Any]] = []
        self._decoded: dict[bytes, Any] = {}
        self._mining: SimEvent | None = None
        if network is not None:
            network.add_node(name, self.handle)

    @property
    def state(self) -> ContractState:
        return self.chain.state

    def submit(self, tx: Transaction) -> bytes | None:
        try:
            return submit_tx(self.pool, tx)
        except (RejectedTx, DuplicateTx) as exc:
            self.rejected.append((tx, type(exc).__name__))
            return None

    def mine(self, now_ms: float | None = None) -> Block:
        if now_ms is None:
            now_ms = self.network.clock.now if self.network is not None else 0.0
        block = mine_block(self.pool, self.chain, self.params, now_ms / MS_PER_MIN)
        for listener in self.block_listeners:
            listener(block)
        return block

    def start_mining(self, clock: SimClock, first_at: float | None = None) -> None:
        """Mine every ``avg_mining_time_min`` of simulated time."""
        interval = self.params.avg_mining_time_min * MS_PER_MIN
        at = clock.now + interval if first_at is None else first_at

        def tick() -> None:
            self.mine(clock.now)
            self._mining = clock.schedule(interval, tick, "mine", self.name)

        self._mining = clock.schedule_at(at, tick, "mine", self.name)

    def stop_mining(self) -> None:
        SimClock.cancel(self._mining)

    def _contract(self, tx: Transaction):
        c = self._decoded.get(tx.digest)
        if c is None:
            c = self._decoded[tx.digest] = decode(tx)
        return c

    def fetch(self, from_height: int, watch: Iterable[bytes], full: bool = False) -> FetchReply:
        watch = frozenset(watch)
        blocks = self.chain.blocks[from_height:]
        headers = [(b.header, b.block_hash) for b in blocks]
        relevant = []
        for b in blocks:
            for i, tx in enumerate(b.txs):
                if is_relevant(self._contract(tx), watch, self.state.grants):
                    relevant.append((tx, b.height, i, b.proof(i)))
        return FetchReply(from_height, headers, relevant, list(blocks) if full else [])

    def handle(self, msg: Message) -> None:
        if msg.kind == "submit":
            self.submit(msg.body)
        elif msg.kind == "fetch":
            body = msg.body
            reply = self.fetch(body["from"], body["watch"], body.get("full", False))
            self.network.send(self.name, msg.src, "fetch-reply", {"id": body["id"], "reply": reply},
                              msg.flow)


@dataclass
class _PendingAuth:
    request: AccessRequest
    start: float
    reply: tuple[str, int, str | None] | None
    done: bool = False
    timer: SimEvent | None = None


@dataclass
class PendingRequest:
    tag: int
    provider: str
    provider_id: bytes
    slot: int
    started: float
    flow: str
    on_done: Callable[[AccessDecision], Any] | None = None
    timer: SimEvent | None = None
    decision: AccessDecision | None = None


class Node:
    """An SPV-style device taking part in the access protocol."""

    def __init__(self, name: str, identity: Identity, params: LedgerParams,
                 policy: NodePolicy | None = None, network: Network | None = None,
                 ledger: str | None = None, keep_blocks: bool = False, seed: int = 0,
                 clock: SimClock | None = None, cap: int | None = None) -> None:
        self.name = name
        self.identity = identity
        self.params = params
        self.policy = policy or NodePolicy()
        self.network = network
        self.clock = network.clock if network is not None else (clock or SimClock())
        self.ledger = ledger
        self.keep_blocks = keep_blocks
        self.rng = random.Random(seed)
        self.headers = HeaderChain()
        self.state = ContractState()
        self.cache = ContractCache()
        self.proofs: dict[bytes, tuple[Transaction, int, MerkleProof]] = {}
        self.blocks: list[Block] = []
        self.decisions: list[AccessDecision] = []
        self.outcomes: list[AccessDecision] = []
        self.staleness: list[tuple[float, str]] = []
        self.rejected_blocks = 0
        self.last_sync: float | None = None
        self._challenges: dict[bytes, tuple[bytes, int]] = {}
        self._pending: list[_PendingAuth] = []
        self._requests: dict[int, PendingRequest] = {}
        self._fetches: dict[int, float] = {}
        self._poll_event: SimEvent | None = None
        self.sync_log: list[tuple[float, int]] = []
        self._ids = itertools.count()
        if network is not None:
            network.add_node(name, self.handle, cap)

    @property
    def id(self) -> bytes:
        return self.identity.id

    @property
    def watch(self) -> frozenset:
        return frozenset({self.id})

    @property
    def now(self) -> float:
        return self.clock.now

    @property
    def tip_height(self) -> int | None:
        return self.headers.height - 1 if self.headers.height else None

    # ledger synchronisation
    def request_sync(self, flow: str | None = None) -> int | None:
        """Send one fetch to the ledger; the reply is applied when it arrives."""
        if self.network is None or self.ledger is None:
            self.staleness.append((self.now, "no ledger link"))
            return None
        fid = next(self._ids)
        self._fetches[fid] = self.now
        body = {"id": fid, "from": self.headers.height, "watch": self.watch,
                "full": self.keep_blocks}
        if self.network.send(self.name, self.ledger, "fetch", body, flow) is None:
            self.staleness.append((self.now, "ledger unreachable"))
        return fid

    def start_refresh(self) -> None:
        interval = self.policy.refresh_interval
        if interval is None:
            return

        def tick() -> None:
            self.request_sync()
            self.clock.schedule(interval, tick, "refresh", self.name)

        self.clock.schedule(interval, tick, "refresh", self.name)

    def apply_fetch(self, reply: FetchReply) -> None:
        if self.keep_blocks and reply.blocks:
            for block in reply.blocks:
                if block.height >= self.headers.height and not self.accept_block(block):
                    break
        else:
            for header, block_hash in reply.headers:
                if header.height < self.headers.height:
                    continue
                if not validate_header(header, block_hash, self.headers, self.params):
                    self.rejected_blocks += 1
                    break
                self.headers.append_header(header)
            for tx, height, index, proof in reply.relevant:
                self._absorb(tx, height, index, proof)
        self.last_sync = self.now
        self.sync_log.append((self.now, self.headers.height))
        self._refresh_cache()

    def accept_block(self, block: Block) -> bool:
        """Validate a full block against local headers and keep what concerns us.

        Besides the structural checks, every transaction that concerns this
        node must be admissible under the governance it already knows (e.g. a
        grant must be signed by the device's administrator), so a re-mined
        forgery is refused even though its proof of work is valid.
        """
        ok = validate_block(block, self.headers, self.params)
        trial = self.state.copy()
        relevant = []
        for i, tx in enumerate(block.txs if ok else ()):
            try:
                contract = decode(tx)
            except ValueError:
                ok = False
                break
            if is_relevant(contract, self.watch, trial.grants):
                if not trial.admits(tx):
                    ok = False
                    break
                trial.apply(tx, block.height, i)
                relevant.append(i)
        if not ok:
            self.rejected_blocks += 1
            return False
        self.headers.append_header(block.header)
        if self.keep_blocks:
            self.blocks.append(block)
        for i in relevant:
            self._absorb(block.txs[i], block.height, i, block.proof(i))
        self._refresh_cache()
        return True

    def _absorb(self, tx: Transaction, height: int, index: int, proof: MerkleProof) -> bool:
        if tx.digest in self.proofs or height >= self.headers.height:
            return False
        root = self.headers.headers[height].merkle_root
        if proof.leaf_index != index or not verify_proof(tx.to_bytes(), proof, root):
            return False
        if not self.state.admits(tx):
            return False
        self.state.apply(tx, height, index)
        self.proofs[tx.digest] = (tx, height, proof)
        return True

    def _refresh_cache(self) -> None:
        tip = self.tip_height
        if tip is None:
            return
        requestors = {g.requestor_id for g in self.state.grants.values() if g.provider_id == self.id}
        for rid in sorted(requestors):
            eff = self.state.resolve(self.id, rid, tip)
            if eff is None:
                self.cache.drop(self.id, rid)
                continue
            tx, height, proof = self.proofs[eff.digest]
            self.cache.put(CacheEntry(eff, tx, proof, height, tip, self.now))

    # provider side
    def issue_challenge(self, requestor_id: bytes, slot: int) -> bytes:
        nonce = self.rng.getrandbits(8 * NONCE_SIZE).to_bytes(NONCE_SIZE, "big")
        self._challenges[nonce] = (requestor_id, slot)
        return nonce

    def _check_request(self, request: AccessRequest) -> str | None:
        if request.provider_id != self.id:
            return "request addressed to another provider"
        if not request.verify():
            return "bad request signature"
        outstanding = self._challenges.pop(request.nonce, None)
        if outstanding != (request.requestor_id, request.slot):
            return "unknown or replayed nonce"
        return None

    def _decision(self, request: AccessRequest, outcome: Outcome, basis: Basis | None,
                  waited: float, reason: str = "", contract: bytes | None = None) -> AccessDecision:
        return AccessDecision(self.now, request.requestor_id, request.provider_id, request.slot,
                              outcome, basis, self.tip_height, contract, waited, reason, self.name)

    def _judge(self, request: AccessRequest, contract: AccessContract | None, tx, proof, height,
               basis: Basis, waited: float) -> AccessDecision:
        if contract is None:
            return self._decision(request, Outcome.DENIED, basis, waited, "no effective grant")
        # proof gate: never grant on a contract that does not verify against a held header
        if (height >= self.headers.height
                or not verify_proof(tx.to_bytes(), proof, self.headers.headers[height].merkle_root)):
            return self._decision(request, Outcome.DENIED, basis, waited,
                                  "grant proof does not verify", contract.digest)
        if contract.expired(self.now / MS_PER_MIN):
            return self._decision(request, Outcome.DENIED, basis, waited, "grant expired",
                                  contract.digest)
        if not contract.allows(request.slot):
            return self._decision(request, Outcome.DENIED, basis, waited, "slot not in ACL",
                                  contract.digest)
        return self._decision(request, Outcome.GRANTED, basis, waited, "", contract.digest)

    def decide_from_cache(self, request: AccessRequest, waited: float = 0.0) -> AccessDecision:
        entry = self.cache.get(self.id, request.requestor_id)
        if entry is None:
            return self._judge(request, None, None, None, 0, Basis.LOCAL_CACHE, waited)
        ttl = self.policy.cache_ttl
        if ttl is not None and (self.now - entry.cached_at) / MS_PER_MIN > ttl:
            return self._decision(request, Outcome.DENIED, Basis.LOCAL_CACHE, waited,
                                  "cache entry past ttl", entry.contract.digest)
        return self._judge(request, entry.contract, entry.tx, entry.proof, entry.block_height,
                           Basis.LOCAL_CACHE, waited)

    def decide_from_ledger(self, request: AccessRequest, waited: float) -> AccessDecision:
        tip = self.tip_height
        eff = None if tip is None else self.state.resolve(self.id, request.requestor_id, tip)
        if eff is None:
            return self._judge(request, None, None, None, 0, Basis.FRESH_LEDGER, waited)
        tx, height, proof = self.proofs[eff.digest]
        return self._judge(request, eff, tx, proof, height, Basis.FRESH_LEDGER, waited)

    def authorize(self, request: AccessRequest,
                  reply: tuple[str, int, str | None] | None = None) -> AccessDecision | None:
        """Decide ``request`` now, or return None and decide once fresh state or the threshold arrives."""
        reason = self._check_request(request)
        if reason is not None:
            return self._finish(self._decision(request, Outcome.DENIED, None, 0.0, reason), reply)
        threshold = self.policy.freshness_threshold
        if threshold == 0:
            return self._finish(self.decide_from_cache(request), reply)
        if self.network is None or self.ledger is None:
            if math.isinf(threshold):
                return self._finish(self._decision(request, Outcome.TIMED_OUT, None, 0.0,
                                                   "no ledger link"), reply)
            return self._finish(self.decide_from_cache(request), reply)
        pa = _PendingAuth(request, self.now, reply)
        self._pending.append(pa)
        self.request_sync(flow=reply[2] if reply else None)
        if self._poll_event is None:
            self._poll_event = self.clock.schedule(self.policy.retry_interval, self._poll,
                                                   "retry", self.name)
        if not math.isinf(threshold):
            pa.timer = self.clock.schedule(threshold, lambda: self._fall_back(pa), "threshold",
                                           self.name)
        return None

    def _poll(self) -> None:
        self._poll_event = None
        if not self._pending:
            return
        self.request_sync()
        self._poll_event = self.clock.schedule(self.policy.retry_interval, self._poll, "retry",
                                               self.name)

    def _fall_back(self, pa: _PendingAuth) -> None:
        if pa.done:
            return
        self.staleness.append((self.now, "freshness threshold reached"))
        self._close(pa, self.decide_from_cache(pa.request, self.now - pa.start))

    def _close(self, pa: _PendingAuth, decision: AccessDecision) -> None:
        pa.done = True
        SimClock.cancel(pa.timer)
        self._pending.remove(pa)
        self._finish(decision, pa.reply)

    def _finish(self, decision: AccessDecision,
                reply: tuple[str, int, str | None] | None) -> AccessDecision:
        self.decisions.append(decision)
        if reply is not None and self.network is not None:
            dst, tag, flow = reply
            self.network.send(self.name, dst, "access-decision",
                              {"tag": tag, "decision": decision}, flow)
        return decision

    # requestor side
    def request_access(self, provider: str, provider_id: bytes, slot: int,
                       timeout: float = 10_000.0,
                       on_done: Callable[[AccessDecision], Any] | None = None) -> PendingRequest:
        """Start the handshake with ``provider``; the outcome lands in ``outcomes``."""
        if self.network is None:
            raise LinkDown("request_access needs a network")
        tag = next(self._ids)
        pending = PendingRequest(tag, provider, provider_id, slot, self.now,
                                 f"{self.name}#{tag}", on_done)
        self._requests[tag] = pending
        self.network.send(self.name, provider, "access-request",
                          {"tag": tag, "requestor_id": self.id, "slot": slot}, pending.flow)
        pending.timer = self.clock.schedule(timeout, lambda: self._give_up(tag), "timeout",
                                            self.name)
        return pending

    def _give_up(self, tag: int) -> None:
        pending = self._requests.pop(tag, None)
        if pending is None:
            return
        self._record_outcome(pending, AccessDecision(
            self.now, self.id, pending.provider_id, pending.slot, Outcome.TIMED_OUT, None,
            self.tip_height, None, self.now - pending.started, "no decision before timeout",
            self.name))

    def _record_outcome(self, pending: PendingRequest, decision: AccessDecision) -> None:
        pending.decision = decision
        self.outcomes.append(decision)
        if pending.on_done is not None:
            pending.on_done(decision)

    def handle(self, msg: Message) -> None:
        body = msg.body
        kind = msg.kind
        if kind == "fetch-reply":
            sent_at = self._fetches.pop(body["id"], self.now)
            self.apply_fetch(body["reply"])
            for pa in [p for p in self._pending if p.start <= sent_at]:
                self._close(pa, self.decide_from_ledger(pa.request, self.now - pa.start))
        elif kind == "access-request":
            nonce = self.issue_challenge(body["requestor_id"], body["slot"])
            self.network.send(self.name, msg.src, "challenge",
                              {"tag": body["tag"], "nonce": nonce, "slot": body["slot"]}, msg.flow)
        elif kind == "challenge":
            pending = self._requests.get(body["tag"])
            if pending is None or body["slot"] != pending.slot:
                return
            req = AccessRequest.signed(self.identity, pending.provider_id, pending.slot,
                                       body["nonce"])
            self.network.send(self.name, msg.src, "access-response",
                              {"tag": body["tag"], "request": req}, msg.flow)
        elif kind == "access-response":
            self.authorize(body["request"], reply=(msg.src, body["tag"], msg.flow))
        elif kind == "access-decision":
            pending = self._requests.pop(body["tag"], None)
            if pending is None:
                return
            SimClock.cancel(pending.timer)
            self._record_outcome(pending, body["decision"])


def sync(node: Node, ledger_link: LedgerService | None) -> bool:
    """Pull straight from ``ledger_link`` (no simulated latency).

    A missing link, or one the network cannot currently reach, leaves the node
    untouched and records the staleness.
    """
    if ledger_link is None or (node.network is not None
                               and ledger_link.name in node.network.handlers
                               and not node.network.reachable(node.name, ledger_link.name)):
        node.staleness.append((node.now, "ledger unreachable"))
        return False
    node.apply_fetch(ledger_link.fetch(node.headers.height, node.watch, node.keep_blocks))
    return True


def request_access(requestor: Node, provider: str, provider_id: bytes, slot: int,
                   timeout: float = 10_000.0) -> PendingRequest:
    return requestor.request_access(provider, provider_id, slot, timeout)


def authorize(provider: Node, request: AccessRequest) -> AccessDecision | None:
    return provider.authorize(request)


def dispatch_blocks(carrier: Node, target: Node) -> DispatchResult:
    """Hand every block the carrier holds beyond the target's tip to the target.

    Blocks failing validation are rejected; since each later block links to
    its predecessor, everything after a rejected block is rejected too.
    """
    net = carrier.network
    if net is not None and target.name in net.handlers and not net.reachable(carrier.name, target.name):
        raise LinkDown(f"{carrier.name} cannot reach {target.name}")
    offered = [b for b in carrier.blocks if b.height >= target.headers.height]
    accepted = sum(target.accept_block(b) for b in offered)
    carrier.clock.record("dispatch", f"{carrier.name}->{target.name} {accepted}/{len(offered)}")
    return DispatchResult(len(offered), accepted, len(offered) - accepted)

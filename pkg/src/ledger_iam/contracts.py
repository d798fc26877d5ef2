"""Identities, contract payloads and the rules that govern them on the ledger.

Every device is bound to an administrator key by an imprinting contract.
Only the current administrator may transfer the device, grant access to its
functions or revoke such grants. ``ContractState`` enforces these rules when a
chain includes transactions, and ``resolve`` answers which grant is in force
for a (provider, requestor) pair at a given height.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Union

from . import crypto
from .ledger import Transaction, TxKind
from .merkle import digest

ID_SIZE = 20
ACL_WIDTH = 32

_IMPRINT = struct.Struct(">20s32s32s")
_TRANSFER = struct.Struct(">20s32sI")
_GRANT = struct.Struct(">20s20sIBdQ")
_REVOKE = struct.Struct(">32s")


class ContractError(Exception):
    pass


class AlreadyImprinted(ContractError):
    pass


class NotAuthorized(ContractError):
    pass


class UnknownContract(ContractError, KeyError):
    pass


def identity_id(public_key: bytes) -> bytes:
    """160-bit identifier derived from a public key."""
    return digest(public_key)[:ID_SIZE]


@dataclass(frozen=True)
class PublicIdentity:
    """What a device announces: its public key and derived id."""

    public_key: bytes
    id: bytes

    @classmethod
    def from_key(cls, public_key: bytes) -> "PublicIdentity":
        return cls(public_key, identity_id(public_key))


@dataclass(frozen=True)
class Identity:
    private_key: object = field(repr=False, compare=False)
    public_key: bytes
    id: bytes

    def sign(self, message: bytes) -> bytes:
        return self.private_key.sign(message)

    def verify(self, message: bytes, signature: bytes) -> bool:
        return crypto.verify(self.public_key, message, signature)

    @property
    def public(self) -> PublicIdentity:
        return PublicIdentity(self.public_key, self.id)


def generate_identity(rng) -> Identity:
    """Deterministic keypair from a seeded ``random.Random`` or numpy Generator."""
    if hasattr(rng, "getrandbits"):
        seed = rng.getrandbits(8 * crypto.SEED_SIZE).to_bytes(crypto.SEED_SIZE, "big")
    else:
        seed = rng.bytes(crypto.SEED_SIZE)
    key = crypto.private_key_from_seed(seed)
    public_key = crypto.public_bytes(key)
    return Identity(key, public_key, identity_id(public_key))


@dataclass(frozen=True)
class ImprintingContract:
    """Current binding of a device to its administrator.

    ``transfers`` counts ownership transfers so far; a transfer transaction
    must quote it, which keeps every transfer digest unique.
    """

    device_id: bytes
    device_pubkey: bytes
    admin_pubkey: bytes
    imprinter_signature: bytes
    imprinter_pubkey: bytes = b""
    transfers: int = 0
    digest: bytes = b""
    height: int | None = None


@dataclass(frozen=True)
class OwnershipTransfer:
    device_id: bytes
    new_admin_pubkey: bytes
    seq: int
    admin_signature: bytes
    admin_pubkey: bytes
    digest: bytes = b""


@dataclass(frozen=True)
class AccessContract:
    provider_id: bytes
    requestor_id: bytes
    acl: int
    expiry: float | None
    admin_signature: bytes
    admin_pubkey: bytes
    serial: int = 0
    digest: bytes = b""
    valid_from: int | None = None
    index: int | None = None

    def allows(self, slot: int) -> bool:
        return 0 <= slot < ACL_WIDTH and bool(self.acl >> slot & 1)

    def expired(self, now: float | None) -> bool:
        """``now`` and ``expiry`` are simulated minutes."""
        return now is not None and self.expiry is not None and now >= self.expiry


@dataclass(frozen=True)
class Revocation:
    target: bytes
    admin_signature: bytes
    admin_pubkey: bytes
    digest: bytes = b""


Contract = Union[ImprintingContract, OwnershipTransfer, AccessContract, Revocation]


def decode(tx: Transaction) -> Contract:
    """Decode the contract body carried by ``tx``; raises ValueError if malformed."""
    p = tx.payload
    try:
        if tx.kind is TxKind.IMPRINT:
            device_id, device_pub, admin_pub = _IMPRINT.unpack(p)
            return ImprintingContract(device_id, device_pub, admin_pub, tx.signature,
                                      tx.signer, 0, tx.digest)
        if tx.kind is TxKind.TRANSFER_OWNERSHIP:
            device_id, new_admin, seq = _TRANSFER.unpack(p)
            return OwnershipTransfer(device_id, new_admin, seq, tx.signature, tx.signer, tx.digest)
        if tx.kind is TxKind.GRANT:
            provider, requestor, acl, has_expiry, expiry, serial = _GRANT.unpack(p)
            if has_expiry not in (0, 1) or (has_expiry and not math.isfinite(expiry)):
                raise ValueError("malformed expiry field")
            return AccessContract(provider, requestor, acl, expiry if has_expiry else None,
                                  tx.signature, tx.signer, serial, tx.digest)
        if tx.kind is TxKind.REVOKE:
            (target,) = _REVOKE.unpack(p)
            return Revocation(target, tx.signature, tx.signer, tx.digest)
    except struct.error as exc:
        raise ValueError(f"malformed {tx.kind.name} payload: {exc}") from None
    raise ValueError(f"unsupported kind {tx.kind!r}")


def imprint_payload(device: PublicIdentity, admin_pubkey: bytes) -> bytes:
    return _IMPRINT.pack(device.id, device.public_key, admin_pubkey)


def transfer_payload(device_id: bytes, new_admin_pubkey: bytes, seq: int) -> bytes:
    return _TRANSFER.pack(device_id, new_admin_pubkey, seq)


def grant_payload(provider_id: bytes, requestor_id: bytes, acl: int,
                  expiry: float | None, serial: int = 0) -> bytes:
    if not 0 <= acl < 1 << ACL_WIDTH:
        raise ValueError(f"acl must fit in {ACL_WIDTH} bits")
    return _GRANT.pack(provider_id, requestor_id, acl, int(expiry is not None),
                       0.0 if expiry is None else float(expiry), serial)


def revoke_payload(target: bytes) -> bytes:
    return _REVOKE.pack(target)


@dataclass(frozen=True)
class ContractEvent:
    """An included access-layer contract, ordered by (height, index)."""

    height: int
    index: int
    contract: Contract


class ContractState:
    """Replayed contract state of a chain; plugs into ``Chain`` as its rules.

    ``imprinters`` optionally restricts which keys may imprint devices.
    """

    def __init__(self, imprinters: Iterable[bytes] | None = None) -> None:
        self.imprinters = frozenset(imprinters) if imprinters is not None else None
        self.devices: dict[bytes, ImprintingContract] = {}
        self.grants: dict[bytes, AccessContract] = {}
        self.revoked: dict[bytes, Revocation] = {}
        self.events: list[ContractEvent] = []
        self.height = 0

    def copy(self) -> "ContractState":
        other = ContractState.__new__(ContractState)
        other.imprinters = self.imprinters
        other.devices = dict(self.devices)
        other.grants = dict(self.grants)
        other.revoked = dict(self.revoked)
        other.events = list(self.events)
        other.height = self.height
        return other

    def admin_of(self, device_id: bytes) -> bytes | None:
        ic = self.devices.get(device_id)
        return ic.admin_pubkey if ic else None

    def imprint_of(self, device_id: bytes) -> ImprintingContract:
        try:
            return self.devices[device_id]
        except KeyError:
            raise UnknownContract(device_id.hex()) from None

    def is_imprinted(self, device_id: bytes) -> bool:
        return device_id in self.devices

    def refusal(self, tx: Transaction) -> str | None:
        """Why ``tx`` may not be included next, or None when it may."""
        try:
            c = decode(tx)
        except ValueError as exc:
            return str(exc)
        if isinstance(c, ImprintingContract):
            if identity_id(c.device_pubkey) != c.device_id:
                return "device id does not match device key"
            if c.device_id in self.devices:
                return "device already imprinted"
            if self.imprinters is not None and tx.signer not in self.imprinters:
                return "signer is not an appointed imprinter"
            return None
        if isinstance(c, OwnershipTransfer):
            ic = self.devices.get(c.device_id)
            if ic is None:
                return "unknown device"
            if tx.signer != ic.admin_pubkey:
                return "signer is not the device administrator"
            if c.seq != ic.transfers:
                return "stale transfer sequence number"
            return None
        if isinstance(c, AccessContract):
            if self.admin_of(c.provider_id) != tx.signer:
                return "signer does not govern the provider"
            return None
        grant = self.grants.get(c.target)
        if grant is None:
            return "unknown contract"
        if c.target in self.revoked:
            return "contract already revoked"
        if self.admin_of(grant.provider_id) != tx.signer:
            return "signer does not govern the provider"
        return None

    def admits(self, tx: Transaction) -> bool:
        return self.refusal(tx) is None

    def apply(self, tx: Transaction, height: int, index: int) -> None:
        reason = self.refusal(tx)
        if reason is not None:
            raise NotAuthorized(reason)
        c = decode(tx)
        if isinstance(c, ImprintingContract):
            self.devices[c.device_id] = replace(c, height=height)
        elif isinstance(c, OwnershipTransfer):
            ic = self.devices[c.device_id]
            self.devices[c.device_id] = replace(ic, admin_pubkey=c.new_admin_pubkey,
                                                transfers=ic.transfers + 1)
        elif isinstance(c, AccessContract):
            c = replace(c, valid_from=height, index=index)
            self.grants[c.digest] = c
            self.events.append(ContractEvent(height, index, c))
        else:
            self.revoked[c.target] = c
            self.events.append(ContractEvent(height, index, c))
        self.height = max(self.height, height)

    def resolve(self, provider_id: bytes, requestor_id: bytes,
                at_height: int | None = None, now: float | None = None) -> AccessContract | None:
        h = self.height if at_height is None else at_height
        return resolve(self.events, provider_id, requestor_id, h, now)


def resolve(chain_view: Sequence[ContractEvent], provider_id: bytes, requestor_id: bytes,
            at_height: int, now: float | None = None) -> AccessContract | None:
    """Latest unrevoked, unexpired grant for the pair among events up to ``at_height``.

    Ordering is (block height, intra-block index). A revocation included at
    height ``h`` is effective for queries at ``h`` and above.
    """
    revoked = {e.contract.target for e in chain_view
               if isinstance(e.contract, Revocation) and e.height <= at_height}
    best: ContractEvent | None = None
    for e in chain_view:
        c = e.contract
        if (e.height <= at_height and isinstance(c, AccessContract)
                and c.provider_id == provider_id and c.requestor_id == requestor_id
                and c.digest not in revoked and not c.expired(now)
                and (best is None or (e.height, e.index) > (best.height, best.index))):
            best = e
    return None if best is None else best.contract


def _already_imprinted(view, device_id: bytes) -> bool:
    if view is None:
        return False
    if isinstance(view, ContractState):
        return view.is_imprinted(device_id)
    return device_id in view


def create_imprinting_contract(device: PublicIdentity, admin_pubkey: bytes, imprinter: Identity,
                               view=None) -> Transaction:
    """Imprint transaction binding ``device`` to ``admin_pubkey``.

    ``view`` is whatever the imprinter knows about existing imprints: a
    ``ContractState`` or a set of device ids.
    """
    if _already_imprinted(view, device.id):
        raise AlreadyImprinted(device.id.hex())
    return Transaction.signed(TxKind.IMPRINT, imprint_payload(device, admin_pubkey), imprinter)


def transfer_ownership(contract: ImprintingContract, new_admin_pubkey: bytes,
                       current_admin: Identity) -> Transaction:
    if current_admin.public_key != contract.admin_pubkey:
        raise NotAuthorized("signer is not the current administrator")
    payload = transfer_payload(contract.device_id, new_admin_pubkey, contract.transfers)
    return Transaction.signed(TxKind.TRANSFER_OWNERSHIP, payload, current_admin)


def create_grant(admin: Identity, provider_id: bytes, requestor_id: bytes, acl: int,
                 expiry: float | None, view: ContractState, serial: int = 0) -> Transaction:
    if view.admin_of(provider_id) != admin.public_key:
        raise NotAuthorized("signer does not govern the provider")
    return Transaction.signed(TxKind.GRANT,
                              grant_payload(provider_id, requestor_id, acl, expiry, serial), admin)


def create_revocation(admin: Identity, contract_digest: bytes, view: ContractState) -> Transaction:
    grant = view.grants.get(contract_digest)
    if grant is None:
        raise UnknownContract(contract_digest.hex())
    if view.admin_of(grant.provider_id) != admin.public_key:
        raise NotAuthorized("signer does not govern the provider")
    return Transaction.signed(TxKind.REVOKE, revoke_payload(contract_digest), admin)


def acl_mask(*slots: int) -> int:
    mask = 0
    for s in slots:
        if not 0 <= s < ACL_WIDTH:
            raise ValueError(f"function slot {s} outside 0..{ACL_WIDTH - 1}")
        mask |= 1 << s
    return mask

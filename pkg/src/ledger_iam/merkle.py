"""Binary Merkle trees over SHA-256 with compact inclusion proofs.

Leaves are hashed once before pairing, so a one-leaf tree has root
``sha256(leaf)``. Odd-width layers duplicate their last node, the rule used by
Bitcoin-family ledgers.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

HASH_NAME = "sha256"
DIGEST_SIZE = 32


class EmptyTree(ValueError):
    """Raised when a tree or proof is requested over zero leaves."""


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _parent(left: bytes, right: bytes) -> bytes:
    return digest(left + right)


def _next_layer(layer: list[bytes]) -> list[bytes]:
    if len(layer) % 2:
        layer = layer + [layer[-1]]
    return [_parent(layer[i], layer[i + 1]) for i in range(0, len(layer), 2)]


@dataclass(frozen=True)
class MerkleProof:
    """Inclusion proof for the leaf at ``leaf_index``.

    ``siblings`` run bottom-up; bit ``k`` of ``leaf_index`` says whether the
    running hash sits on the right (1) or left (0) at layer ``k``.
    """

    leaf_index: int
    siblings: tuple[bytes, ...]
    root: bytes

    def __post_init__(self) -> None:
        if self.leaf_index < 0:
            raise ValueError(f"leaf_index must be non-negative, got {self.leaf_index}")
        object.__setattr__(self, "siblings", tuple(self.siblings))

    def to_dict(self) -> dict:
        return {
            "leaf_index": self.leaf_index,
            "siblings": [s.hex() for s in self.siblings],
            "root": self.root.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MerkleProof":
        return cls(d["leaf_index"], tuple(bytes.fromhex(s) for s in d["siblings"]),
                   bytes.fromhex(d["root"]))


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Root digest of ``leaves`` (raw byte strings, hashed here)."""
    if not leaves:
        raise EmptyTree("cannot compute the root of an empty tree")
    layer = [digest(leaf) for leaf in leaves]
    while len(layer) > 1:
        layer = _next_layer(layer)
    return layer[0]


def build_proof(leaves: Sequence[bytes], index: int) -> MerkleProof:
    if not leaves:
        raise EmptyTree("cannot build a proof over an empty tree")
    if not 0 <= index < len(leaves):
        raise IndexError(f"leaf index {index} out of range for {len(leaves)} leaves")
    layer = [digest(leaf) for leaf in leaves]
    siblings = []
    pos = index
    while len(layer) > 1:
        if len(layer) % 2:
            layer = layer + [layer[-1]]
        siblings.append(layer[pos ^ 1])
        layer = _next_layer(layer)
        pos //= 2
    return MerkleProof(index, tuple(siblings), layer[0])


def root_from_proof(leaf: bytes, proof: MerkleProof) -> bytes:
    node = digest(leaf)
    pos = proof.leaf_index
    for sibling in proof.siblings:
        node = _parent(sibling, node) if pos & 1 else _parent(node, sibling)
        pos >>= 1
    return node


def verify_proof(leaf: bytes, proof: MerkleProof, root: bytes | None = None) -> bool:
    """True iff folding ``leaf`` up through ``proof`` reproduces the root.

    When ``root`` is given the proof must also be *for* that root, which is how
    callers anchor a proof to a header they validated themselves.
    """
    if root is not None and root != proof.root:
        return False
    # leftover index bits mean the proof claims a position the tree cannot have
    if proof.leaf_index >> len(proof.siblings):
        return False
    return root_from_proof(leaf, proof) == proof.root

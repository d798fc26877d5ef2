"""Ledger-anchored identity and access management for IoT devices, simulated end to end."""
from .contracts import (
    AccessContract,
    ContractState,
    Identity,
    ImprintingContract,
    Revocation,
    acl_mask,
    create_grant,
    create_imprinting_contract,
    create_revocation,
    generate_identity,
    resolve,
    transfer_ownership,
)
from .ledger import (
    Block,
    Chain,
    LedgerParams,
    Mempool,
    Transaction,
    TxKind,
    mine_block,
    seal_block,
    submit_tx,
    theoretical_upper_bound,
    validate_block,
)
from .merkle import MerkleProof, build_proof, merkle_root, verify_proof
from .netsim import Cut, Latency, LinkModel, Network, SimClock
from .node import (
    AccessDecision,
    AccessRequest,
    Basis,
    LedgerService,
    Node,
    NodePolicy,
    Outcome,
    dispatch_blocks,
    sync,
)

__version__ = "0.1.0"

from __future__ import annotations

import random

import pytest

from ledger_iam.contracts import ContractState, generate_identity
from ledger_iam.ledger import Chain, LedgerParams, Mempool


class Keyring:
    """Deterministic identities handed out by name."""

    def __init__(self, seed: int = 1234) -> None:
        self.rng = random.Random(seed)
        self.ids = {}

    def __getitem__(self, name):
        if name not in self.ids:
            self.ids[name] = generate_identity(self.rng)
        return self.ids[name]


@pytest.fixture
def keys():
    return Keyring()


@pytest.fixture
def params():
    return LedgerParams()


@pytest.fixture
def governed(keys):
    """Chain with contract rules, an empty pool and the admin/imprinter keys."""
    state = ContractState(imprinters={keys["imprinter"].public_key})
    return Chain(state), Mempool()

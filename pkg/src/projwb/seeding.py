"""Deterministic seed derivation.

Every random choice in the workbench flows from one explicit master seed.
Sub-seeds are derived by hashing the master seed together with a path of
string tokens, so independent units of work (sweep cells, shuffled rating
queues, CV folds) get decorrelated streams that are reproducible regardless
of scheduling order.
"""

from __future__ import annotations

import hashlib

MAX_SEED = 2**64 - 1


def derive_seed(master: int, *tokens: object) -> int:
    """Derive a 64-bit sub-seed from a master seed and a token path."""
    material = "\x1f".join([str(int(master))] + [str(t) for t in tokens])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")

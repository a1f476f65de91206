"""Reproducible random streams.

Streams are built on the Philox counter-based generator.  A stream is
keyed by (seed, chain index), and every annealing move draws a fixed
number of variates, so the stream position at any (sweep, move) is a pure
function of those indices.  Chains can therefore run in any order, or in
parallel, without changing results.

The command-line layer fans a single global seed out to per-component
seeds with ``derive_seed``: the component label and seed are hashed with
SHA-256 and the first 8 bytes (little-endian) become the component seed.
"""

import hashlib

import numpy as np


def derive_seed(seed: int, label: str) -> int:
    """Deterministic per-component seed from a global seed and a label."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def chain_stream(seed: int, chain: int = 0) -> np.random.Generator:
    """Independent generator for one annealing chain."""
    key = derive_seed(seed, f"chain:{chain}")
    return np.random.Generator(np.random.Philox(key=key))

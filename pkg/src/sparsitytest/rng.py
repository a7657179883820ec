"""Seed derivation and counter-based block streams.

Every random quantity is drawn from a Philox generator keyed by
``(seed, block_index)``. A block covers a fixed number of rows, so the
values produced for a row never depend on how the work was chunked.
"""

from __future__ import annotations

import hashlib

import numpy as np

BLOCK_ROWS = 8192
_MASK64 = (1 << 64) - 1


def derive_seed(master: int, index: int) -> int:
    """Return the 64-bit seed of trial ``index`` under ``master``.

    The value is the first 8 bytes (little endian) of
    ``blake2b(f"{master}:{index}", digest_size=8)``, so any single trial can be
    replayed by external tools.
    """
    token = f"{int(master) & _MASK64}:{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(token, digest_size=8).digest(), "little")


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Independent generator for row block ``block`` of stream ``seed``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def iter_blocks(total: int, block_rows: int = BLOCK_ROWS):
    """Yield ``(block_index, start, stop)`` covering ``range(total)``."""
    for b, start in enumerate(range(0, total, block_rows)):
        yield b, start, min(start + block_rows, total)

"""Deterministic seed derivation.

Replica and stage seeds are derived from a master seed with a splitmix64
chain, so a run is reproducible from (config, seed) alone regardless of
execution order or thread count.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> int:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def hash64(*values: int) -> int:
    """Mix any number of integers into one 64-bit seed."""
    h = 0x243F6A8885A308D3  # arbitrary nonzero start
    for v in values:
        h = _splitmix64((h ^ (int(v) & _MASK)) & _MASK)
    return h

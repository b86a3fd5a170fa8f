"""Seed streams and generator construction.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's counter-based Philox bit generator. Per-trial seeds are derived with
:func:`stream`, a SplitMix64 finaliser applied to ``base_seed`` and the trial
index, so trial ``i`` gets the same stream regardless of scheduling.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (64-bit arithmetic)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream(base_seed: int, index: int) -> int:
    """Seed for sub-stream ``index`` of ``base_seed``."""
    if index < 0:
        raise ValueError("stream index must be non-negative")
    return splitmix64((base_seed & _MASK64) ^ splitmix64(index & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    """Philox-backed generator keyed by a 64-bit seed."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))

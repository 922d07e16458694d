# src/rng.py
"""
Deterministic seed derivation.

Every random quantity is a pure function of the master seed and an integer
key, so results never depend on how work is split between processes:

  master seed
    ├── trajectory i    -> initial uniform of orbit i
    └── (purpose, block) -> generator for batch sampling (Z draws, diagnostic samples)
"""

from __future__ import annotations

import numpy as np

# Purposes for block generators; fixed so streams never collide.
PURPOSE_STABLE: int = 1
PURPOSE_DIAGNOSTIC: int = 2

_DOUBLE_SCALE: float = 2.0 ** -53


def trajectory_uniform(master_seed: int, index: int) -> float:
    """Uniform on ``[0, 1)`` owned by trajectory ``index``: 53 bits of its seed-sequence state."""
    state = np.random.SeedSequence([master_seed, index]).generate_state(1, dtype=np.uint64)
    return float(int(state[0]) >> 11) * _DOUBLE_SCALE


def trajectory_uniforms(master_seed: int, start: int, stop: int) -> np.ndarray:
    """``trajectory_uniform`` for every index in ``[start, stop)``."""
    return np.array([trajectory_uniform(master_seed, i) for i in range(start, stop)], dtype=float)


def block_generator(master_seed: int, purpose: int, block: int) -> np.random.Generator:
    """Generator for batch ``block`` of the given purpose."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, purpose, block]))

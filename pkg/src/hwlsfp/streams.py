"""Counter-derived random streams.

Every random draw in the package comes from a generator keyed by
``(seed, purpose, index...)`` so that results do not depend on the order in
which blocks of Monte-Carlo realizations are evaluated.
"""

from __future__ import annotations

import numpy as np

# purpose keys
GEOMETRY = 0
TERMS = 1
ORACLE = 2
ESTIMATOR_CHECK = 3

MASK64 = (1 << 64) - 1


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & MASK64, *(int(k) for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def block_slices(n: int, block_size: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into consecutive ``(start, stop)`` blocks."""
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    return [(s, min(s + block_size, n)) for s in range(0, n, block_size)]


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    z = rng.standard_normal((*np.atleast_1d(shape), 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)

"""Shared builders for randomized kernel instances.

Randomness is always drawn from an explicitly seeded Generator so every
test is reproducible in isolation.
"""

import numpy as np
import pytest


def random_increasing_s(rng, size, start=None, scale=None):
    """Strictly increasing positive sequence with varied growth."""
    start = rng.uniform(0.1, 3.0) if start is None else start
    scale = rng.uniform(0.05, 2.0) if scale is None else scale
    steps = scale * rng.exponential(size=size) + 1e-3
    return start + np.cumsum(steps)


def random_density(rng, size, support=None):
    """Nonnegative density supported clear of the terminal probe window.

    Classification reads the harmonic weight off the last tenth of the
    difference ratios, so exact recovery needs the support to end before
    that window; mass at the end is indistinguishable from delta * s.
    """
    h = np.zeros(size)
    interior = max(1, size - size // 10 - 3)
    support = support if support is not None else rng.integers(1, max(2, size // 2))
    idx = rng.choice(interior, size=min(support, interior), replace=False)
    h[idx] = rng.exponential(size=idx.size)
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)

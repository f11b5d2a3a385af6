"""Named, counter-style RNG streams.

Every random draw in the package flows through ``stream(...)``: a fresh
generator keyed by a tuple of non-negative integers (seed first, then
structural indices such as fold, trial, subject). Results therefore never
depend on call order, thread count, or global state.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidConfig

# Tag constants keep the key spaces of unrelated draw sites disjoint.
TAG_LABEL = 1
TAG_VISITS = 2
TAG_LATENT = 3
TAG_NOISE = 4
TAG_INIT = 5
TAG_SHUFFLE = 6
TAG_DROPOUT = 7
TAG_FOLD = 8
TAG_CATEGORY = 9
TAG_FEATURE = 10

# Fold slot used for pooled-mode permutation draws (one permutation over all
# subjects, not tied to any fold index).
POOLED_TAG = 0xFFFFFFFF


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0 or seed >= 2**64:
        raise InvalidConfig(f"seed must be a non-negative 64-bit integer, got {seed!r}")
    return int(seed)


def stream(*key: int) -> np.random.Generator:
    """Return a generator for the given key; same key, same stream, always."""
    return np.random.default_rng(np.random.SeedSequence(tuple(int(k) for k in key)))


def derive_seed(*key: int) -> int:
    """Collapse a key to a single non-negative integer seed (for sub-runs)."""
    return int(np.random.SeedSequence(tuple(int(k) for k in key)).generate_state(1, np.uint64)[0])

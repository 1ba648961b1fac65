"""Deterministic seed derivation.

Every stochastic step draws from a generator keyed by (user seed, context tag,
indices...), so results never depend on execution order or scheduling. Tags
keep different contexts from colliding on the same child stream.
"""
from __future__ import annotations

import numpy as np

TAG_DGP = 11
TAG_MC_FIT = 12
TAG_BOOTSTRAP = 13
TAG_TREATMENT_ARM = 14
TAG_RESTART = 15


def child_seed(*keys: int) -> int:
    """Collapse a key tuple to a single derived integer seed."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def child_rng(*keys: int) -> np.random.Generator:
    """Generator keyed by the given tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))

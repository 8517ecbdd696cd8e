"""Counter-based random streams keyed by integer tuples.

Every stochastic routine in the package derives its generator through
:func:`stream`, a pure function of its integer keys.  Streams for distinct
keys are statistically independent, and the (keys -> stream) mapping is part
of the package contract: it is stable across releases and independent of
execution order, thread count, and scheduling.
"""

from __future__ import annotations

import numpy as np


def stream(*keys: int) -> np.random.Generator:
    """Deterministic generator for the given key tuple.

    Built on the Philox counter-based bit generator seeded through a
    SeedSequence of the keys, e.g. ``stream(seed, b)`` for bootstrap
    replicate ``b``.
    """
    if not keys:
        raise ValueError("at least one integer key is required")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(tuple(int(k) for k in keys))))


def child_seed(*keys: int) -> int:
    """A 64-bit integer seed derived deterministically from the keys."""
    ss = np.random.SeedSequence(tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])

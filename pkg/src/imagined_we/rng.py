"""Counter-based random streams.

Every stream is a Philox generator keyed by a 64-bit seed.  Child seeds are
derived from a parent seed plus an integer path with ``SeedSequence``, so any
trial or rollout can be regenerated independently of how work was scheduled.
"""

import numpy as np


def derive_seed(parent, *path):
    """Deterministically derive a 64-bit seed from ``parent`` and an int path."""
    ss = np.random.SeedSequence(entropy=int(parent), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed):
    return np.random.Generator(np.random.Philox(key=int(seed)))

"""Counter-based random streams.

Every realization draws from its own Philox stream keyed by
(master seed, realization index), so results do not depend on the order in
which worker threads pick up realizations.
"""

import numpy as np

# Philox keys are 128 bits: high word = master seed, low word = index.
_WORD = 1 << 64


def make_rng(seed, index=0):
    """Generator for realization `index` of the run seeded with `seed`."""
    if seed < 0 or index < 0:
        raise ValueError(f'seed and index must be non-negative, got {seed}, {index}')
    key = (int(seed) % _WORD) * _WORD + int(index) % _WORD
    return np.random.Generator(np.random.Philox(key=key))

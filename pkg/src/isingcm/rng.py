"""Counter-based, splittable random streams.

Every stochastic object is keyed by ``(seed, *key)``: the Philox counter
generator is seeded from ``SeedSequence(seed, spawn_key=key)``, so replica
``i`` sees the same stream whatever order (or thread) it runs in.
"""

import numpy as np


def stream(seed, *key):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.Generator(np.random.Philox())
    return stream(rng)

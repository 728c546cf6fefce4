"""Counter-based random streams.

Every consumer draws from its own Philox stream keyed by ``(seed, stream)``,
so dataset generation, parameter initialisation and shot sampling never
share state.
"""
import numpy as np

DATA = 1
INIT = 2
SAMPLING = 3
CHECK = 4


def make_rng(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))

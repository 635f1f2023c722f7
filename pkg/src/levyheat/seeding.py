"""Per-replica seeds derived from one master seed.

derive_seed(m, i) = mix(mix(m) + i * G mod 2^64), with mix the splitmix64
finalizer and G = 0x9E3779B97F4A7C15.  mix is a bijection on 64-bit words and G
is odd, so for a fixed master the map i -> seed is injective over all 2^64
indices.
"""

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix(z):
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def derive_seed(master_seed, replica_index):
    key = _mix(int(master_seed) & _MASK)
    return _mix((key + int(replica_index) * GOLDEN) & _MASK)


def derive_seeds(master_seed, indices):
    """Vectorized derive_seed over an integer array; returns uint64."""
    key = np.uint64(_mix(int(master_seed) & _MASK))
    z = np.asarray(indices).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = key + z * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def replica_rng(master_seed, replica_index):
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, replica_index)))

"""
Seeded random streams for synthetic instances.

Every stream is a Philox 4x64 counter-based generator keyed by a numpy
SeedSequence, so a (seed, stream) pair reproduces the same variates on any
platform. Uniforms are built from 53 random bits and shifted half a step off
the endpoints; normals are the inverse normal CDF of those uniforms, which
fixes the number of raw draws per variate.
"""

import numpy as np
from scipy.special import ndtri

_MANTISSA = 2 ** 53

# stream ids inside one seed
SUPPORT_AND_VALUES = 0
SCALAR_NOISE = 1


def make_generator(seed: int, stream: int = SUPPORT_AND_VALUES) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit seed of one Monte Carlo trial, independent of scheduling."""
    state = np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def open_uniform(generator: np.random.Generator, size) -> np.ndarray:
    """Uniform variates on the open interval (0, 1)."""
    bits = generator.integers(0, _MANTISSA, size=size, dtype=np.int64)
    return (bits + 0.5) / _MANTISSA


def standard_normal(generator: np.random.Generator, size) -> np.ndarray:
    return ndtri(open_uniform(generator, size))


def sample_support(generator: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Uniform k-subset of range(n) by a partial Fisher-Yates shuffle, sorted."""
    pool = np.arange(n)
    draws = open_uniform(generator, k)
    for i in range(k):
        j = i + int(draws[i] * (n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return np.sort(pool[:k])

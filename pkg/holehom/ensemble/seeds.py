"""
Deterministic per-sample seeds.

split(master, k) is the SplitMix64 output for the state master + (k + 1) * gamma:

    z = (master + (k + 1) * 0x9E3779B97F4A7C15) mod 2^64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2^64
    z = z ^ (z >> 31)

The finalizer is a bijection of 64-bit words and gamma is odd, so seeds for
distinct k < 2^64 never collide.
"""

from typing import List

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = 0xFFFFFFFFFFFFFFFF

PROFILE_STREAM = 0
PROBE_STREAM = 1
FIT_STREAM = 2
EXTENSION_STREAM = 3


def split(master_seed: int, index: int) -> int:
    if index < 0:
        raise ValueError(f"Seed index must be non-negative, got {index}")
    z = (int(master_seed) + (int(index) + 1) * _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def sample_seeds(master_seed: int, count: int) -> List[int]:
    return [split(master_seed, k) for k in range(count)]


def stream_seed(sample_seed: int, stream: int) -> int:
    """Independent seed for one purpose within a sample; the geometry uses the sample seed itself"""
    return split(sample_seed, stream)

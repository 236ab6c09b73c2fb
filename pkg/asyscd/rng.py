"""Counter-based random numbers.

Every draw is a pure function of (seed, stream, counter): the value used at
iteration j does not depend on how many values were drawn before it, so
checkpoint strides, chunking and thread layout never change a run.
The mixing function is SplitMix64.
"""
import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# Named streams so that different consumers of one seed never overlap
COORDINATES = 1
DELAYS = 2
SHUFFLE = 3
POWER_ITERATION = 4
MATRIX = 10
TRUTH = 11
NOISE = 12
GRAPH = 13
SVM_FEATURES = 14
SVM_LABELS = 15


def _mix_scalar(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def _mix(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream: int) -> int:
    return _mix_scalar((seed * _GOLDEN + stream * _STREAM) & MASK)


def random_bits(seed: int, stream: int, counters) -> np.ndarray:
    counters = np.asarray(counters, dtype=np.uint64)
    z = counters * np.uint64(_GOLDEN) + np.uint64(stream_key(seed, stream))
    return _mix(z)


def uniform(seed: int, stream: int, count: int, offset: int = 0) -> np.ndarray:
    """Doubles in the open interval (0, 1)"""
    bits = random_bits(seed, stream, np.arange(offset, offset + count, dtype=np.uint64))
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def integers(seed: int, stream: int, counters, upper: int) -> np.ndarray:
    """Integers in [0, upper), one per counter (multiply-shift on the top 32 bits)"""
    if not 1 <= upper < 2 ** 32:
        raise ValueError(f"upper bound {upper} outside [1, 2**32)")
    bits = random_bits(seed, stream, counters) >> np.uint64(32)
    return ((bits * np.uint64(upper)) >> np.uint64(32)).astype(np.int64)


def standard_normal(seed: int, stream: int, count: int) -> np.ndarray:
    """Box-Muller transform over consecutive uniform pairs"""
    pairs = (count + 1) // 2
    u = uniform(seed, stream, 2 * pairs)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def permutation(seed: int, stream: int, n: int, round_index: int = 0) -> np.ndarray:
    keys = uniform(seed, stream, n, offset=round_index * n)
    return np.argsort(keys, kind="stable").astype(np.int64)

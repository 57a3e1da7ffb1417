"""Counter-based Gaussian noise keyed by pixel coordinates.

Each sample is a pure function of ``(seed, x, y, channel)``: the key is
folded through the SplitMix64 finalizer one coordinate at a time, two
independent 53-bit uniforms are drawn from the result, and Box-Muller turns
them into one standard normal. Values therefore do not depend on image size,
traversal order or thread count.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _uniform(h):
    # (0, 1], never zero so log() is safe
    return ((h >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)


def standard_normal(seed, height, width, channels):
    """Standard-normal raster of shape ``(height, width, channels)``."""
    with np.errstate(over="ignore"):
        key = _mix(np.full(1, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
        y = np.arange(height, dtype=np.uint64)[:, None, None]
        x = np.arange(width, dtype=np.uint64)[None, :, None]
        c = np.arange(channels, dtype=np.uint64)[None, None, :]
        h = _mix(_mix(_mix(key ^ y) ^ x) ^ c)
        u1 = _uniform(_mix(h))
        u2 = _uniform(_mix(h ^ _GOLDEN))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def uniform_hash(seed, *coords):
    """Uniform (0, 1] values keyed by ``seed`` and integer coordinate arrays."""
    with np.errstate(over="ignore"):
        h = _mix(np.full(1, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
        for c in coords:
            h = _mix(h ^ np.asarray(c, dtype=np.int64).astype(np.uint64))
        return _uniform(h)

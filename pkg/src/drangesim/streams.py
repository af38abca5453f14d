"""Counter-based random streams.

Every random quantity in the simulator is a pure function of
``(seed, cell address, purpose tag, counter)``. Values are produced by a
keyed SplitMix64-style hash, so draws for different cells can be computed in
any order (or in parallel) and still replay bit-identically.
"""

import numpy as np

_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / (1 << 53)

# purpose tags: keep distinct so coefficient draws never alias read draws
TAG_READ = 0x52454144
TAG_BETA0 = 0x42455430
TAG_CLASS = 0x434C4153
TAG_RNG = 0x524E4743
TAG_WEAKCOL = 0x5745414B


def mix64(z):
    """SplitMix64 finalizer, applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _C1
        z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def _u64(x):
    return np.asarray(x, dtype=np.uint64)


def derive_key(seed, ids, tag):
    """Key for each id in ``ids`` under ``seed`` and purpose ``tag``."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    s = mix64(_u64(seed) ^ mix64(_u64(tag)))
    with np.errstate(over="ignore"):
        return mix64(s ^ mix64(_u64(ids) * _GAMMA + _GAMMA))


def hash_draw(keys, counters):
    """Raw 64-bit draw for each ``(key, counter)`` pair (broadcasting)."""
    keys = _u64(keys)
    counters = _u64(counters)
    with np.errstate(over="ignore"):
        return mix64(keys ^ mix64(counters * _GAMMA + _C2))


def uniform(keys, counters):
    """Uniform doubles in [0, 1) with 53-bit resolution."""
    return (hash_draw(keys, counters) >> _S11).astype(np.float64) * _INV53


def bernoulli(keys, counters, p):
    """Boolean draws, True with probability ``p``; broadcasts like numpy."""
    return uniform(keys, counters) < p


class SampleStream:
    """Per-cell draw counters for one experiment worker.

    The stream owns a counter per failure-capable cell of ``device``. Every
    sampled bit consumes exactly one counter value, so a replay with the same
    ``start`` reproduces the same bits regardless of the order in which cells
    are visited. Streams are not thread-safe; give each worker its own.
    """

    def __init__(self, device, start=0):
        self.device = device
        self.start = int(start)
        self.counters = np.full(device.n_weak, self.start, dtype=np.uint64)

    def take(self, weak_idx, n):
        """Reserve ``n`` consecutive counters for each cell in ``weak_idx``.

        Returns a ``(len(weak_idx), n)`` counter matrix. ``weak_idx`` must not
        contain duplicates.
        """
        weak_idx = np.asarray(weak_idx, dtype=np.int64)
        base = self.counters[weak_idx]
        self.counters[weak_idx] = base + np.uint64(n)
        return base[:, None] + np.arange(n, dtype=np.uint64)[None, :]

    def skip(self, weak_idx, n):
        """Advance counters without producing draws."""
        weak_idx = np.asarray(weak_idx, dtype=np.int64)
        self.counters[weak_idx] += np.uint64(n)

    def position(self, weak_idx):
        return self.counters[np.asarray(weak_idx, dtype=np.int64)].copy()

"""SplitMix64 pseudo-random stream.

SplitMix64 is counter based: output ``i`` is ``mix(seed + (i + 1) * GAMMA)``
modulo 2**64, so a block of outputs can be produced with one vectorized numpy
expression and the stream is identical on every platform.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z):
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed=0):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def random(self):
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low, high):
        return low + (high - low) * self.random()

    def u64_array(self, n):
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return z

    def random_array(self, shape):
        n = int(np.prod(shape))
        bits = self.u64_array(n) >> np.uint64(11)
        return (bits.astype(np.float64) * (1.0 / (1 << 53))).reshape(shape)

    def uniform_array(self, low, high, shape):
        return low + (high - low) * self.random_array(shape)

    def getstate(self):
        return self.state

    def setstate(self, state):
        self.state = int(state) & MASK64

    def spawn(self, key):
        """Independent child stream keyed by an integer."""
        return SplitMix64(_mix((self.state ^ (int(key) * _M2)) & MASK64))


def derive_seed(seed, index):
    return (int(seed) ^ int(index)) & MASK64

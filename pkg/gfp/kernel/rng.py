# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Portable pseudo random numbers: xoshiro256** seeded through splitmix64.

Every draw is computed with python integers so a given (seed, stream, call sequence)
yields the same values on every platform, independently of numpy's own generators.
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1
STREAM_MULTIPLIER = 0xD1B54A32D192ED03
TWO_POW_M53 = 1.0 / (1 << 53)


def splitmix64(x):
    """ Advances a splitmix64 state, returns (new_state, output) """
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def expand_seed(seed, stream):
    seed = seed & MASK64
    while True:
        x = (seed ^ ((stream & MASK64) * STREAM_MULTIPLIER)) & MASK64
        state = []
        for _ in range(4):
            x, out = splitmix64(x)
            state.append(out)
        if any(state):
            return state
        seed = (seed + 1) & MASK64


def box_muller(u1, u2):
    """ Maps u1 in (0, 1] and u2 in [0, 1) to two independent standard normal draws """
    r = math.sqrt(-2.0 * math.log(u1))
    angle = 2.0 * math.pi * u2
    return r * math.cos(angle), r * math.sin(angle)


class Rng(object):
    def __init__(self, seed, stream=0):
        self.seed = seed & MASK64
        self.stream = stream & MASK64
        self._s = expand_seed(seed, stream)

    def __repr__(self):
        return "Rng(seed=%s, stream=%s)" % (self.seed, self.stream)

    def get_state(self):
        return {"seed": self.seed, "stream": self.stream, "state": list(self._s)}

    def set_state(self, state):
        words = [int(w) & MASK64 for w in state["state"]]
        if len(words) != 4 or not any(words):
            raise ValueError("Invalid xoshiro256** state: %r" % (state["state"],))
        self.seed = int(state["seed"]) & MASK64
        self.stream = int(state["stream"]) & MASK64
        self._s = words

    @classmethod
    def from_state(cls, state):
        rng = cls(0)
        rng.set_state(state)
        return rng

    def next_u64(self):
        return self._next_block(1)[0]

    def _next_block(self, n):
        s0, s1, s2, s3 = self._s
        out = [0] * n
        for i in range(n):
            x = (s1 * 5) & MASK64
            x = ((x << 7) | (x >> 57)) & MASK64
            out[i] = (x * 9) & MASK64
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self._s = [s0, s1, s2, s3]
        return out

    def uniform(self):
        return (self.next_u64() >> 11) * TWO_POW_M53

    def uniforms(self, shape):
        size = int(np.prod(shape))
        values = [(x >> 11) * TWO_POW_M53 for x in self._next_block(size)]
        return np.array(values, dtype=np.float64).reshape(shape)

    def standard_normal(self, shape):
        """ Box-Muller on consecutive uniform pairs, an odd trailing draw is discarded """
        size = int(np.prod(shape))
        pairs = (size + 1) // 2
        raw = self._next_block(2 * pairs)
        values = []
        for i in range(pairs):
            u1 = 1.0 - (raw[2 * i] >> 11) * TWO_POW_M53
            u2 = (raw[2 * i + 1] >> 11) * TWO_POW_M53
            values.extend(box_muller(u1, u2))
        return np.array(values[:size], dtype=np.float64).reshape(shape)

    def integers(self, high, shape):
        """ Uniform integers in [0, high) """
        u = self.uniforms(shape)
        return np.minimum((u * high).astype(np.int64), high - 1)

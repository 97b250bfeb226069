"""Seeded, splittable random streams backed by numpy's Philox generator.

Philox is counter-based, so substreams keyed by a path of integers are
independent and cheap to derive. Normal variates come from numpy's ziggurat
sampler; bitwise reproducibility therefore holds for a fixed numpy release.
"""

import numpy as np


class Rng:
    """A deterministic random stream identified by ``(seed, path)``."""

    def __init__(self, seed, path=()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.path = tuple(int(k) for k in path)
        ss = np.random.SeedSequence(seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def substream(self, *key):
        """Independent stream derived from this stream's identity (not its position)."""
        return Rng(self.seed, self.path + tuple(key))

    def normal(self, scale, size):
        return self._gen.normal(0.0, scale, size)

    def uniform(self, low, high, size):
        return self._gen.uniform(low, high, size)

    def integer(self, low, high):
        """Uniform integer in the closed range ``[low, high]``."""
        return int(self._gen.integers(low, high, endpoint=True))

    def choice(self, n, k):
        """``k`` distinct indices from ``range(n)``."""
        return self._gen.choice(n, k, replace=False)

    def get_state(self):
        st = self._gen.bit_generator.state
        return {
            "seed": self.seed,
            "path": list(self.path),
            "counter": [int(v) for v in st["state"]["counter"]],
            "key": [int(v) for v in st["state"]["key"]],
            "buffer": [int(v) for v in st["buffer"]],
            "buffer_pos": int(st["buffer_pos"]),
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }

    @classmethod
    def from_state(cls, state):
        rng = cls(state["seed"], state["path"])
        rng._gen.bit_generator.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array(state["counter"], dtype=np.uint64),
                "key": np.array(state["key"], dtype=np.uint64),
            },
            "buffer": np.array(state["buffer"], dtype=np.uint64),
            "buffer_pos": state["buffer_pos"],
            "has_uint32": state["has_uint32"],
            "uinteger": state["uinteger"],
        }
        return rng

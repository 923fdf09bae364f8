"""Counter-based random streams keyed by (seed, replicate, purpose, episode).

Each (seed, replicate, purpose) triple fixes a Philox key; episode k reads
the counter block starting at k * blocks_per_episode.  Any episode's draws
can therefore be regenerated in isolation, independent of call order.
"""
from __future__ import annotations

import numpy as np

PURPOSES = {"env": 0, "learner": 1, "adversary": 2, "init": 3, "aux": 4}
_CHUNK = 1024
_SCALE = 1.0 / 9007199254740992.0  # 2**-53


def stream_key(seed: int, replicate: int, purpose: str) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), PURPOSES[purpose]))
    return ss.generate_state(2, np.uint64)


class EpisodeStream:
    """Fixed number of uniforms per episode with random access by episode."""

    def __init__(self, seed: int, replicate: int, purpose: str, draws_per_episode: int):
        self.key = stream_key(seed, replicate, purpose)
        self.draws = max(1, int(draws_per_episode))
        self.blocks = -(-self.draws // 4)     # Philox emits 4 words per counter step
        self._start = None
        self._buf = None

    def _raw(self, k0: int, n_eps: int) -> np.ndarray:
        counter = np.array([k0 * self.blocks, 0, 0, 0], dtype=np.uint64)
        bg = np.random.Philox(key=self.key, counter=counter)
        raw = bg.random_raw(n_eps * self.blocks * 4).reshape(n_eps, self.blocks * 4)
        return raw[:, :self.draws]

    def episode(self, k: int) -> np.ndarray:
        if self._start is None or not (self._start <= k < self._start + _CHUNK):
            self._start = k
            self._buf = (self._raw(k, _CHUNK) >> np.uint64(11)) * _SCALE
        return self._buf[k - self._start]

    def generator(self, k: int) -> np.random.Generator:
        """A full generator for episode k when a fixed draw count is awkward."""
        counter = np.array([k, 1, 0, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self.key, counter=counter))

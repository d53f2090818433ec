"""Per-agent random streams.

Every agent owns one ``numpy.random.Generator`` derived from
``(master_seed, replication, purpose, agent)``. Samples are drawn from it in
fixed-size blocks, so the value of an agent's n-th sample depends only on
that key, never on how many agents are simulated together or on which worker
runs the replication.
"""

from __future__ import annotations

import numpy as np

from .objectives import AgentData, DataMode

BLOCK = 256

# purpose tags for seed derivation
PURPOSE_WORLD = 0
PURPOSE_DATA = 1
PURPOSE_FROZEN = 2
PURPOSE_ATTACK = 3


def generator(master_seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def _block(gen: np.random.Generator, data: AgentData, size: int) -> np.ndarray:
    if data.model.mode is DataMode.FINITE_SAMPLE:
        idx = gen.integers(0, len(data.samples), size=size)
        return data.samples[idx]
    z = gen.standard_normal((size, data.center.shape[0]))
    return data.center + data.model.noise_std * z


class StreamBank:
    """Lock-step sample streams for a group of agents.

    ``take(n)`` returns the next ``n`` samples of every agent, shape
    ``(agents, n, d)``. All agents advance together.
    """

    def __init__(self, generators: list[np.random.Generator], data: list[AgentData],
                 block: int = BLOCK):
        if len(generators) != len(data):
            raise ValueError("one generator per agent is required")
        self.generators = generators
        self.data = data
        self.block = block
        self.dim = data[0].center.shape[0] if data else 0
        self._buf = np.empty((len(data), 0, self.dim))
        self._pos = 0

    def __len__(self) -> int:
        return len(self.data)

    def _refill(self) -> None:
        self._buf = np.stack([_block(g, d, self.block) for g, d in zip(self.generators, self.data)]) \
            if self.data else np.empty((0, self.block, self.dim))
        self._pos = 0

    def take(self, n: int) -> np.ndarray:
        avail = self._buf.shape[1] - self._pos
        if n <= avail:
            out = self._buf[:, self._pos:self._pos + n]
            self._pos += n
            return out
        parts = []
        need = n
        while need > 0:
            avail = self._buf.shape[1] - self._pos
            if avail == 0:
                self._refill()
                avail = self.block
            m = min(need, avail)
            parts.append(self._buf[:, self._pos:self._pos + m])
            self._pos += m
            need -= m
        return np.concatenate(parts, axis=1)


class SampleStream:
    """Single-agent view with the same block semantics as ``StreamBank``."""

    def __init__(self, gen: np.random.Generator, data: AgentData, block: int = BLOCK):
        self._bank = StreamBank([gen], [data], block)
        self.data = data

    def take(self, n: int) -> np.ndarray:
        return self._bank.take(n)[0]

"""Ring-buffer experience replay, per agent or pooled across agents."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class Transition:
    agent_id: int
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    extrinsic: float = 0.0
    intrinsic: float = 0.0


@dataclass
class Batch:
    agent_ids: np.ndarray
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    indices: np.ndarray


class ReplayBuffer:
    """FIFO ring storage with uniform sampling with replacement.

    Arrays grow geometrically up to ``capacity`` so the nominal one-million
    slot default costs nothing until it is filled.
    """

    def __init__(self, obs_dim: int, capacity: int = 1_000_000, initial_allocation: int = 4096):
        if capacity < 1:
            raise UsageError("capacity must be positive")
        self.obs_dim = obs_dim
        self.capacity = capacity
        self.insertions = 0
        self._alloc(min(capacity, initial_allocation))

    def _alloc(self, n: int) -> None:
        old = getattr(self, "_obs", None)
        fields = {
            "_agent": np.zeros(n, dtype=np.int64),
            "_obs": np.zeros((n, self.obs_dim)),
            "_action": np.zeros(n, dtype=np.int64),
            "_reward": np.zeros(n),
            "_next_obs": np.zeros((n, self.obs_dim)),
            "_done": np.zeros(n),
            "_extrinsic": np.zeros(n),
            "_intrinsic": np.zeros(n),
        }
        if old is not None:
            k = len(self)
            for name, arr in fields.items():
                arr[:k] = getattr(self, name)[:k]
        for name, arr in fields.items():
            setattr(self, name, arr)

    def __len__(self) -> int:
        return min(self.insertions, self.capacity)

    def push(self, t: Transition) -> None:
        if self.insertions < self.capacity:
            slot = self.insertions
            if slot == self._obs.shape[0]:
                self._alloc(min(self.capacity, 2 * slot))
        else:
            slot = self.insertions % self.capacity
        self._agent[slot] = t.agent_id
        self._obs[slot] = t.obs
        self._action[slot] = t.action
        self._reward[slot] = t.reward
        self._next_obs[slot] = t.next_obs
        self._done[slot] = float(t.done)
        self._extrinsic[slot] = t.extrinsic
        self._intrinsic[slot] = t.intrinsic
        self.insertions += 1

    def _ordered_slots(self) -> np.ndarray:
        n = len(self)
        if self.insertions <= self.capacity:
            return np.arange(n)
        start = self.insertions % self.capacity
        return (np.arange(n) + start) % self.capacity

    def get(self, slot: int) -> Transition:
        return Transition(int(self._agent[slot]), self._obs[slot].copy(), int(self._action[slot]),
                          float(self._reward[slot]), self._next_obs[slot].copy(), bool(self._done[slot]),
                          float(self._extrinsic[slot]), float(self._intrinsic[slot]))

    def transitions(self) -> list[Transition]:
        """All stored transitions, oldest first."""
        return [self.get(int(s)) for s in self._ordered_slots()]

    def batch_from_indices(self, idx: np.ndarray) -> Batch:
        return Batch(self._agent[idx], self._obs[idx], self._action[idx], self._reward[idx],
                     self._next_obs[idx], self._done[idx], idx)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        n = len(self)
        if n == 0 or batch_size < 1:
            raise UsageError(f"cannot sample {batch_size} from a buffer of {n}")
        return self.batch_from_indices(rng.integers(0, n, size=batch_size))


def push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.push(transition)


def sample(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> Batch:
    return buffer.sample(batch_size, rng)


class ReplayStore:
    """Routes transitions to per-agent buffers or one pooled buffer."""

    def __init__(self, n_agents: int, obs_dim: int, shared: bool, capacity: int = 1_000_000):
        self.shared = shared
        self.n_agents = n_agents
        count = 1 if shared else n_agents
        self.buffers = [ReplayBuffer(obs_dim, capacity) for _ in range(count)]

    def buffer_for(self, agent_id: int) -> ReplayBuffer:
        return self.buffers[0] if self.shared else self.buffers[agent_id]

    def push(self, t: Transition) -> None:
        self.buffer_for(t.agent_id).push(t)

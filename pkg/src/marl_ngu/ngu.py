"""Episodic novelty machinery: embedding network with an inverse-dynamics
head, per-agent episodic memory, k-NN novelty and the shared-novelty gate."""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .env import N_ACTIONS
from .errors import ConfigurationError, TrainingDivergenceError, UsageError
from .nn import MLP, AdamState, adam_step, clip_gradients, cross_entropy_from_logits

NOVEL = "novel"
NON_NOVEL = "non_novel"


class EmbeddingNetwork:
    """Observation encoder plus an inverse-dynamics head over embedding pairs."""

    def __init__(self, obs_dim: int, embedding_dim: int = 32, hidden=(64, 64),
                 rng: np.random.Generator | None = None, learning_rate: float = 1e-3,
                 max_grad_norm: float = 10.0, init: str = "uniform", n_actions: int = N_ACTIONS):
        self.encoder = MLP([obs_dim, *hidden, embedding_dim], rng=rng, init=init)
        self.inverse_head = MLP([2 * embedding_dim, hidden[0] if hidden else 64, n_actions], rng=rng, init=init)
        self.embedding_dim = embedding_dim
        self.max_grad_norm = max_grad_norm
        self.optimizer = AdamState.for_params(self.parameters(), learning_rate=learning_rate)

    def parameters(self):
        return self.encoder.parameters() + self.inverse_head.parameters()

    def gradients(self):
        return self.encoder.gradients() + self.inverse_head.gradients()

    def embed(self, observation) -> np.ndarray:
        return self.encoder.predict(observation)

    def action_logits(self, obs, next_obs) -> np.ndarray:
        e = self.encoder.predict(np.asarray(obs))
        e_next = self.encoder.predict(np.asarray(next_obs))
        return self.inverse_head.predict(np.concatenate([e, e_next], axis=-1))


def embed(net: EmbeddingNetwork, observation) -> np.ndarray:
    return net.embed(observation)


def inverse_dynamics_update(net: EmbeddingNetwork, obs, actions, next_obs) -> float:
    """One joint Adam step on encoder and head; returns the pre-update loss."""
    obs = np.asarray(obs, dtype=np.float64)
    next_obs = np.asarray(next_obs, dtype=np.float64)
    actions = np.asarray(actions)
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise UsageError("inverse dynamics needs a non-empty batch")
    n = obs.shape[0]
    d = net.embedding_dim
    emb = net.encoder.forward(np.concatenate([obs, next_obs], axis=0))
    logits = net.inverse_head.forward(np.concatenate([emb[:n], emb[n:]], axis=1))
    loss, grad = cross_entropy_from_logits(logits, actions)
    if not math.isfinite(loss):
        raise TrainingDivergenceError("inverse dynamics loss is not finite")
    g_pair = net.inverse_head.backward(grad)
    net.encoder.backward(np.concatenate([g_pair[:, :d], g_pair[:, d:]], axis=0))
    grads = net.gradients()
    clip_gradients(grads, net.max_grad_norm)
    adam_step(net.parameters(), grads, net.optimizer)
    return loss


class EpisodicMemory:
    """FIFO store of embeddings seen by one agent during the current episode."""

    def __init__(self, dim: int, capacity: int = 1000, owner: int = 0):
        if capacity < 1:
            raise ConfigurationError("memory capacity must be positive", field="memory_capacity")
        self.owner = owner
        self.capacity = capacity
        self.dim = dim
        self._data = np.zeros((capacity, dim))
        self._size = 0
        self._next = 0

    def __len__(self) -> int:
        return self._size

    def contents(self) -> np.ndarray:
        """Stored embeddings, oldest first."""
        if self._size < self.capacity:
            return self._data[: self._size].copy()
        return np.roll(self._data, -self._next, axis=0)

    def add(self, embedding) -> None:
        self._data[self._next] = embedding
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def clear(self) -> None:
        self._size = 0
        self._next = 0

    def novelty(self, query, k_nn: int = 10, r_novel_max: float = 1.0) -> float:
        if k_nn < 1:
            raise UsageError("k_nn must be >= 1")
        if self._size == 0:
            return r_novel_max
        q = np.ascontiguousarray(query, dtype=np.float64)
        return kernels.knn_mean_distance(self._data, self._size, q, k_nn)


def episodic_novelty(memory: EpisodicMemory, query, k_nn: int = 10, r_novel_max: float = 1.0) -> float:
    """Mean distance from ``query`` to its ``k_nn`` nearest stored embeddings."""
    return memory.novelty(query, k_nn, r_novel_max)


def record_visit(memory: EpisodicMemory, embedding) -> None:
    memory.add(embedding)


class SharedNoveltyRegistry:
    """Unit-norm representative embeddings and the distinct agents that visited each."""

    def __init__(self, dim: int, k: int = 1, similarity_threshold: float = 0.99,
                 n_agents: int | None = None, capacity: int = 1024):
        if k < 1:
            raise ConfigurationError("sharing threshold k must be >= 1", field="sharing_k")
        if not 0.0 < similarity_threshold <= 1.0:
            raise ConfigurationError("similarity threshold must lie in (0, 1]", field="tau_sim")
        self.dim = dim
        self.k = k
        self.similarity_threshold = similarity_threshold
        self.n_agents = n_agents
        self._reps = np.zeros((capacity, dim))
        self.visitors: list[set] = []

    def __len__(self) -> int:
        return len(self.visitors)

    @property
    def representatives(self) -> np.ndarray:
        return self._reps[: len(self.visitors)]

    def clear(self) -> None:
        self.visitors = []

    def lookup(self, embedding):
        """Best matching entry index and cosine similarity, or ``(-1, -inf)``."""
        unit = _unit(embedding)
        if unit is None:
            return -1, -math.inf
        return kernels.max_cosine(self._reps, len(self.visitors), unit)

    def visitor_count(self, embedding) -> int:
        idx, sim = self.lookup(embedding)
        if idx < 0 or sim < self.similarity_threshold:
            return 0
        return len(self.visitors[idx])

    def gate(self, agent_id: int, embedding) -> str:
        if self.n_agents is not None and not 0 <= agent_id < self.n_agents:
            raise UsageError(f"agent id {agent_id} out of range")
        unit = _unit(embedding)
        if unit is None:
            return NOVEL
        n = len(self.visitors)
        idx, sim = kernels.max_cosine(self._reps, n, unit)
        if idx >= 0 and sim >= self.similarity_threshold:
            seen = self.visitors[idx]
            # verdict uses the visitor set as it stood before this visit
            verdict = NON_NOVEL if len(seen) >= self.k else NOVEL
            seen.add(agent_id)
            return verdict
        if n == self._reps.shape[0]:
            self._reps = np.concatenate([self._reps, np.zeros_like(self._reps)])
        self._reps[n] = unit
        self.visitors.append({agent_id})
        return NOVEL


def _unit(embedding):
    e = np.asarray(embedding, dtype=np.float64)
    s = 0.0
    for x in e.tolist():
        s += x * x
    if s == 0.0:
        return None
    return np.ascontiguousarray(e / math.sqrt(s))


def shared_novelty_gate(registry: SharedNoveltyRegistry, agent_id: int, embedding) -> str:
    return registry.gate(agent_id, embedding)


def reset_episode(memories, registry: SharedNoveltyRegistry | None = None) -> None:
    if isinstance(memories, EpisodicMemory):
        memories = [memories]
    for m in memories:
        m.clear()
    if registry is not None:
        registry.clear()


def combine_reward(extrinsic: float, intrinsic: float, beta: float) -> float:
    return extrinsic + beta * intrinsic

"""Per-pursuer DQN learner: online/target networks, epsilon-greedy, TD updates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import N_ACTIONS
from .errors import TrainingDivergenceError, UsageError
from .nn import MLP, AdamState, adam_step, clip_gradients, huber_q_loss


@dataclass(frozen=True)
class EpsilonSchedule:
    total_timesteps: int
    initial: float = 1.0
    final: float = 0.1
    exploration_fraction: float = 0.1

    def __call__(self, t: int) -> float:
        return epsilon_at(self, t)


def epsilon_at(schedule: EpsilonSchedule, t: int) -> float:
    """Linear anneal over the first ``exploration_fraction`` of training, then flat."""
    if t < 0:
        raise UsageError("timestep must be non-negative")
    horizon = schedule.exploration_fraction * schedule.total_timesteps
    if horizon <= 0 or t >= horizon:
        return schedule.final
    return schedule.initial + (schedule.final - schedule.initial) * (t / horizon)


class DqnAgent:
    def __init__(self, agent_id: int, obs_dim: int, rng: np.random.Generator, hidden=(64, 64),
                 learning_rate: float = 1e-3, beta: float = 0.0, max_grad_norm: float = 10.0,
                 n_actions: int = N_ACTIONS):
        self.agent_id = agent_id
        self.beta = float(beta)
        self.n_actions = n_actions
        self.max_grad_norm = max_grad_norm
        self.online = MLP([obs_dim, *hidden, n_actions], rng=rng)
        self.target = self.online.copy()
        self.optimizer = AdamState.for_params(self.online.parameters(), learning_rate=learning_rate)
        self.env_steps = 0
        self.gradient_steps = 0
        self.target_syncs = 0

    def q_values(self, observation) -> np.ndarray:
        return self.online.predict(observation)


def select_action(agent: DqnAgent, observation, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest action index.

    Exactly one uniform draw is consumed per call, plus one integer draw when
    exploring, so the random stream does not depend on network outputs.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(agent.n_actions))
    return int(np.argmax(agent.q_values(observation)))


def td_update(agent: DqnAgent, batch, gamma: float = 0.99) -> float:
    """One clipped Adam step on the Huber TD loss; returns the pre-update loss.

    ``batch`` needs ``obs``, ``actions``, ``rewards``, ``next_obs`` and ``dones``
    attributes (see ``replay.Batch``); rewards are already combined.
    """
    n = len(batch.actions)
    if n == 0:
        raise UsageError("td_update needs a non-empty batch")
    next_q = agent.target.predict(batch.next_obs)
    targets = batch.rewards + gamma * (1.0 - batch.dones) * next_q.max(axis=1)
    q = agent.online.forward(batch.obs)
    rows = np.arange(n)
    loss, grad_sel = huber_q_loss(q[rows, batch.actions], targets)
    if not math.isfinite(loss):
        raise TrainingDivergenceError("TD loss is not finite")
    grad = np.zeros_like(q)
    grad[rows, batch.actions] = grad_sel
    agent.online.backward(grad)
    grads = agent.online.gradients()
    clip_gradients(grads, agent.max_grad_norm)
    adam_step(agent.online.parameters(), grads, agent.optimizer)
    agent.gradient_steps += 1
    return loss


def sync_target(agent: DqnAgent) -> None:
    """Hard copy of the online parameters into the target network."""
    agent.target.load_from(agent.online)
    agent.target_syncs += 1

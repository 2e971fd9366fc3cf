"""Deterministic pursuit-evasion particle world (the ``simple_tag`` layout).

Entity order is fixed: pursuers ``0..n_pursuers-1``, then the evader, then
the obstacles. Pursuers take discrete actions in ``{0..4}``:

====== ==========
action force
====== ==========
0      none
1 / 2  -x / +x
3 / 4  -y / +y
====== ==========
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, UsageError

N_ACTIONS = 5
ACTION_DIRECTIONS = np.array([[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])


@dataclass(frozen=True)
class EntitySpec:
    radius: float
    mass: float = 1.0
    max_speed: float = math.inf
    acceleration: float = 0.0
    movable: bool = True
    collidable: bool = True

    def __post_init__(self):
        if self.radius <= 0 or self.mass <= 0:
            raise ConfigurationError("entity radius and mass must be positive")


PURSUER = EntitySpec(radius=0.075, acceleration=3.0, max_speed=1.0)
EVADER = EntitySpec(radius=0.05, acceleration=4.0, max_speed=1.3)
OBSTACLE = EntitySpec(radius=0.2, movable=False)


@dataclass
class WorldState:
    pos: np.ndarray
    vel: np.ndarray
    step: int = 0

    def copy(self) -> "WorldState":
        return WorldState(self.pos.copy(), self.vel.copy(), self.step)


@dataclass
class StepOutcome:
    observations: list
    rewards: np.ndarray
    done: bool
    tag_count: int
    evader_action: int


class PursuitEvasionEnv:
    """N pursuers chase one scripted evader among static obstacles.

    Every pursuer receives ``tag_reward`` per pursuer-evader contact in the
    step, so rewards are shared and sparse.
    """

    def __init__(self, n_pursuers: int = 3, n_obstacles: int = 2, max_cycles: int = 25,
                 dt: float = 0.1, damping: float = 0.25, contact_force: float = 100.0,
                 contact_margin: float = 1e-3, tag_reward: float = 10.0,
                 pursuer: EntitySpec = PURSUER, evader: EntitySpec = EVADER,
                 obstacle: EntitySpec = OBSTACLE):
        if n_pursuers < 1:
            raise ConfigurationError("need at least one pursuer", field="n_pursuers")
        if n_obstacles < 0:
            raise ConfigurationError("obstacle count must be >= 0", field="n_obstacles")
        if max_cycles < 1:
            raise ConfigurationError("max_cycles must be >= 1", field="max_cycles")
        self.n_pursuers = n_pursuers
        self.n_obstacles = n_obstacles
        self.max_cycles = max_cycles
        self.dt = dt
        self.damping = damping
        self.contact_force = contact_force
        self.contact_margin = contact_margin
        self.tag_reward = tag_reward
        self.evader_index = n_pursuers
        specs = [pursuer] * n_pursuers + [evader] + [obstacle] * n_obstacles
        self.specs = specs
        self.n_entities = len(specs)
        self.radius = np.array([s.radius for s in specs])
        self.mass = np.array([s.mass for s in specs])
        self.max_speed = np.array([s.max_speed for s in specs])
        self.accel = np.array([s.acceleration for s in specs])
        self.movable = np.array([s.movable for s in specs], dtype=np.uint8)
        self.collide = np.array([s.collidable for s in specs], dtype=np.uint8)
        self.state: WorldState | None = None
        ev = self.evader_index
        obstacles = list(range(ev + 1, self.n_entities))
        # obstacles, other pursuers, evader: the relative-position blocks of each observation
        self._relative_order = [
            np.array(obstacles + [j for j in range(n_pursuers) if j != i] + [ev]) for i in range(n_pursuers)
        ]

    @property
    def obs_dim(self) -> int:
        return 4 + 2 * self.n_obstacles + 2 * (self.n_pursuers - 1) + 4

    def reset(self, seed: int | None = None):
        """Sample a fresh layout; returns the initial pursuer observations."""
        rng = np.random.default_rng(seed)
        n_agents = self.n_pursuers + 1
        pos = np.empty((self.n_entities, 2))
        pos[:n_agents] = rng.uniform(-1.0, 1.0, size=(n_agents, 2))
        pos[n_agents:] = rng.uniform(-0.9, 0.9, size=(self.n_obstacles, 2))
        self.state = WorldState(pos, np.zeros((self.n_entities, 2)), 0)
        return self.observations()

    def _require_state(self) -> WorldState:
        if self.state is None:
            raise UsageError("call reset() before using the environment")
        return self.state

    def observe(self, pursuer_index: int, state: WorldState | None = None) -> np.ndarray:
        s = self._require_state() if state is None else state
        if not 0 <= pursuer_index < self.n_pursuers:
            raise UsageError(f"pursuer index {pursuer_index} out of range")
        own = s.pos[pursuer_index]
        rel = (s.pos[self._relative_order[pursuer_index]] - own).ravel()
        return np.concatenate((s.vel[pursuer_index], own, rel, s.vel[self.evader_index]))

    def observations(self, state: WorldState | None = None) -> list:
        return [self.observe(i, state) for i in range(self.n_pursuers)]

    def predicted_position(self, index: int, action: int, state: WorldState | None = None) -> np.ndarray:
        """Where ``index`` would land after ``action`` if no contact forces acted."""
        s = self._require_state() if state is None else state
        v = s.vel[index] * (1.0 - self.damping)
        v = v + ACTION_DIRECTIONS[action] * self.accel[index] / self.mass[index] * self.dt
        speed = math.sqrt(v[0] * v[0] + v[1] * v[1])
        if speed > self.max_speed[index]:
            v = v / speed * self.max_speed[index]
        return s.pos[index] + v * self.dt

    def evader_policy(self, state: WorldState | None = None) -> int:
        """Flee the nearest pursuer along the best in-bounds axis move.

        Candidates are the four moves 1..4 ranked by dot product with the
        away-from-nearest-pursuer vector; moves whose contact-free landing
        point leaves [-1, 1]^2 are dropped unless every move does. Ties go to
        the lowest index, both for the nearest pursuer and for the action.
        """
        s = self._require_state() if state is None else state
        ev = self.evader_index
        return kernels.flee_action(s.pos, s.vel, self.n_pursuers, ev, float(self.accel[ev]),
                                   float(self.mass[ev]), float(self.max_speed[ev]), self.dt,
                                   self.damping, 1.0)

    def contacts(self, state: WorldState | None = None) -> int:
        """Number of pursuer-evader pairs whose centres are closer than their radii sum."""
        s = self._require_state() if state is None else state
        ev = self.evader_index
        count = 0
        for i in range(self.n_pursuers):
            d = s.pos[i] - s.pos[ev]
            if math.sqrt(d[0] * d[0] + d[1] * d[1]) < self.radius[i] + self.radius[ev]:
                count += 1
        return count

    def action_forces(self, actions) -> np.ndarray:
        force = np.zeros((self.n_entities, 2))
        for i, a in enumerate(actions):
            force[i] = ACTION_DIRECTIONS[a] * self.accel[i]
        return force

    def step(self, pursuer_actions) -> StepOutcome:
        s = self._require_state()
        if s.step >= self.max_cycles:
            raise UsageError("episode is done; call reset()")
        actions = [int(a) for a in pursuer_actions]
        if len(actions) != self.n_pursuers:
            raise UsageError(f"expected {self.n_pursuers} actions, got {len(actions)}")
        for a in actions:
            if not 0 <= a < N_ACTIONS:
                raise UsageError(f"action {a} outside 0..{N_ACTIONS - 1}")
        evader_action = self.evader_policy(s)
        force = self.action_forces(actions + [evader_action])
        kernels.physics_step(s.pos, s.vel, force, self.radius, self.mass, self.max_speed,
                             self.movable, self.collide, self.dt, self.damping,
                             self.contact_force, self.contact_margin)
        s.step += 1
        tags = self.contacts(s)
        rewards = np.full(self.n_pursuers, self.tag_reward * tags)
        return StepOutcome(self.observations(s), rewards, s.step >= self.max_cycles, tags, evader_action)


TRAJECTORY_COLUMNS = ("step", "entity", "x", "y", "vx", "vy", "action", "reward")


def dump_trajectory(stream, seed: int, steps: int, policy: str = "random", **env_kwargs) -> None:
    """Write a per-step, per-entity CSV of one ``steps``-long trajectory.

    The episode cutoff is lifted to ``steps`` so the dump is one continuous
    rollout. Pursuer actions come from ``default_rng(seed)`` (``random``) or
    are all zero (``zero``). Rows hold the state after the step and the
    action applied during it; non-actor fields are left empty.
    """
    if steps < 1:
        raise UsageError("steps must be >= 1")
    if policy not in ("random", "zero"):
        raise UsageError(f"unknown policy {policy!r}")
    env_kwargs["max_cycles"] = max(steps, env_kwargs.get("max_cycles", 1))
    env = PursuitEvasionEnv(**env_kwargs)
    env.reset(seed)
    rng = np.random.default_rng(seed)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for _ in range(steps):
        if policy == "random":
            actions = rng.integers(0, N_ACTIONS, size=env.n_pursuers).tolist()
        else:
            actions = [0] * env.n_pursuers
        out = env.step(actions)
        s = env.state
        for i in range(env.n_entities):
            if i < env.n_pursuers:
                action, reward = actions[i], repr(float(out.rewards[i]))
            elif i == env.evader_index:
                action, reward = out.evader_action, ""
            else:
                action, reward = "", ""
            writer.writerow([s.step, i, repr(float(s.pos[i, 0])), repr(float(s.pos[i, 1])),
                             repr(float(s.vel[i, 0])), repr(float(s.vel[i, 1])), action, reward])

"""Seeded training loops and multi-seed experiments."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .agents import DqnAgent, EpsilonSchedule, epsilon_at, select_action, sync_target, td_update
from .config import ExperimentConfig
from .env import PursuitEvasionEnv
from .errors import TrainingDivergenceError
from .metrics import AggregateSeries, RunSeries, aggregate, emit_results, read_raw_csv
from .ngu import NOVEL, EmbeddingNetwork, EpisodicMemory, SharedNoveltyRegistry, combine_reward, \
    inverse_dynamics_update
from .replay import ReplayStore, Transition

log = logging.getLogger(__name__)

# independent random streams; a variant never shifts another variant's draws
Q_INIT, EMBED_INIT, ACTIONS, SAMPLING, EPISODES = range(5)
SMOOTHING_WINDOW = 100


def _stream(seed: int, kind: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), kind, index]))


@dataclass
class RunResult:
    series: RunSeries
    agents: list
    embeddings: list
    td_updates: list
    id_updates: list
    target_syncs: int
    reward_stream: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def is_train_step(config: ExperimentConfig, step: int) -> bool:
    """Training fires after global step ``step`` (1-based) past ``learning_starts``."""
    return step > config.learning_starts and step % config.train_frequency == 0


def is_sync_step(config: ExperimentConfig, step: int) -> bool:
    return step % config.target_update_interval == 0


def make_env(config: ExperimentConfig) -> PursuitEvasionEnv:
    return PursuitEvasionEnv(n_pursuers=config.n_pursuers, n_obstacles=config.n_obstacles,
                             max_cycles=config.max_cycles)


def run_single(config: ExperimentConfig, seed: int, record_rewards: bool = False) -> RunResult:
    """Train one seed for ``config.total_timesteps`` global environment steps.

    All cadences (learning start, training, target sync) count global steps.
    Returned episode returns are extrinsic only, averaged over pursuers.
    """
    env = make_env(config)
    n = config.n_pursuers
    obs_dim = env.obs_dim
    betas = config.betas()
    agents = [DqnAgent(i, obs_dim, _stream(seed, Q_INIT, i), hidden=config.hidden_sizes,
                       learning_rate=config.learning_rate, beta=betas[i],
                       max_grad_norm=config.max_grad_norm) for i in range(n)]
    action_rngs = [_stream(seed, ACTIONS, i) for i in range(n)]
    sample_rngs = [_stream(seed, SAMPLING, i) for i in range(n)]
    episode_rng = _stream(seed, EPISODES)

    ngu = config.uses_ngu
    embed_nets, memories, registry = [], [], None
    if ngu:
        embed_nets = [EmbeddingNetwork(obs_dim, config.embedding_dim, config.hidden_sizes,
                                       rng=_stream(seed, EMBED_INIT, i), learning_rate=config.learning_rate,
                                       max_grad_norm=config.max_grad_norm) for i in range(n)]
        memories = [EpisodicMemory(config.embedding_dim, config.memory_capacity, owner=i) for i in range(n)]
        if config.variant == "shared_novelty":
            registry = SharedNoveltyRegistry(config.embedding_dim, config.sharing_k, config.tau_sim, n_agents=n)
    train_id = ngu and config.inverse_dynamics

    store = ReplayStore(n, obs_dim, config.shared_buffer, config.buffer_size)
    schedule = EpsilonSchedule(config.total_timesteps, config.initial_epsilon, config.final_epsilon,
                               config.exploration_fraction)
    td_counts = [0] * n
    id_counts = [0] * n
    syncs = 0
    returns, intrinsic, lengths = [], [], []
    rewards_log = np.zeros((config.total_timesteps, n)) if record_rewards else None

    def new_episode():
        return env.reset(int(episode_rng.integers(2**31 - 1)))

    obs = new_episode()
    ep_ret = ep_intr = 0.0
    ep_len = 0
    k_nn, r_max, clip = config.k_nn, config.r_novel_max, config.clip_intrinsic

    for t in range(config.total_timesteps):
        eps = epsilon_at(schedule, t)
        actions = [select_action(agents[i], obs[i], eps, action_rngs[i]) for i in range(n)]
        out = env.step(actions)
        next_obs = out.observations
        ext = float(out.rewards[0])
        terminal = out.done and config.timeout_is_terminal
        intr_sum = 0.0
        for i in range(n):
            intr = 0.0
            if ngu:
                e = embed_nets[i].embed(next_obs[i])
                if registry is None or registry.gate(i, e) == NOVEL:
                    intr = memories[i].novelty(e, k_nn, r_max)
                    if clip and intr > r_max:
                        intr = r_max
                memories[i].add(e)
            r = combine_reward(ext, intr, betas[i])
            if rewards_log is not None:
                rewards_log[t, i] = r
            store.push(Transition(i, obs[i], actions[i], r, next_obs[i], terminal, ext, intr))
            intr_sum += intr
        ep_ret += ext
        ep_intr += intr_sum / n
        ep_len += 1

        step = t + 1
        if is_train_step(config, step):
            for i in range(n):
                buf = store.buffer_for(i)
                if len(buf) < config.batch_size:
                    continue
                for _ in range(config.gradient_steps):
                    batch = buf.sample(config.batch_size, sample_rngs[i])
                    try:
                        td_update(agents[i], batch, config.gamma)
                        td_counts[i] += 1
                        if train_id:
                            inverse_dynamics_update(embed_nets[i], batch.obs, batch.actions, batch.next_obs)
                            id_counts[i] += 1
                    except TrainingDivergenceError as exc:
                        raise TrainingDivergenceError(
                            f"{config.name} seed {seed}: agent {i} diverged at step {step}: {exc}",
                            layer=exc.layer) from exc
        if is_sync_step(config, step):
            for agent in agents:
                sync_target(agent)
            syncs += 1

        if out.done:
            returns.append(ep_ret)
            intrinsic.append(ep_intr)
            lengths.append(ep_len)
            ep_ret = ep_intr = 0.0
            ep_len = 0
            for m in memories:
                m.clear()
            if registry is not None:
                registry.clear()
            if step < config.total_timesteps:
                obs = new_episode()
        else:
            obs = next_obs
        for agent in agents:
            agent.env_steps = step

    partial = (ep_ret, ep_intr, ep_len) if ep_len else None
    series = RunSeries(seed, np.array(returns), np.array(intrinsic), np.array(lengths, dtype=np.int64), partial)
    return RunResult(series, agents, embed_nets, td_counts, id_counts, syncs, rewards_log)


def _run_series(args) -> RunSeries:
    config, seed = args
    return run_single(config, seed).series


def run_seeds(config: ExperimentConfig, seeds, jobs: int = 1) -> list[RunSeries]:
    """Run every seed, in worker processes when ``jobs > 1``; order follows ``seeds``."""
    tasks = [(config, int(s)) for s in seeds]
    if jobs <= 1 or len(tasks) == 1:
        return [_run_series(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_series, tasks))


def run_experiment(config: ExperimentConfig, jobs: int = 1, seeds=None,
                   cache_root: str | None = None) -> AggregateSeries:
    """Train all seeds and aggregate their smoothed curves with a 95% CI.

    With ``cache_root``, runs whose ``run_key`` matches a stored
    ``<cache_root>/<name>/<seed>/run_key`` are loaded instead of retrained.
    """
    seeds = list(config.seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    cached: dict[int, RunSeries] = {}
    if cache_root is not None:
        for s in seeds:
            run = load_cached_run(config, s, cache_root)
            if run is not None:
                cached[s] = run
    todo = [s for s in seeds if s not in cached]
    fresh = dict(zip(todo, run_seeds(config, todo, jobs))) if todo else {}
    runs = [cached[s] if s in cached else fresh[s] for s in seeds]
    if cached:
        log.info("%s: reused %d cached run(s)", config.name, len(cached))
    return aggregate(runs, config.name, SMOOTHING_WINDOW, config.shared_buffer)


def run_dir(config: ExperimentConfig, seed: int, root) -> str:
    return os.path.join(str(root), config.name, str(seed))


def load_cached_run(config: ExperimentConfig, seed: int, root) -> RunSeries | None:
    d = run_dir(config, seed, root)
    key_path = os.path.join(d, "run_key")
    raw_path = os.path.join(d, "raw.csv")
    if not (os.path.exists(key_path) and os.path.exists(raw_path)):
        return None
    with open(key_path) as fh:
        if fh.read().strip() != config.run_key(seed):
            return None
    return read_raw_csv(raw_path, seed)


def save_results(config: ExperimentConfig, agg: AggregateSeries, root) -> str:
    """Write the results layout plus the cache keys for every run."""
    cfg_dir = emit_results(agg, root, SMOOTHING_WINDOW)
    for run in agg.runs:
        with open(os.path.join(run_dir(config, run.seed, root), "run_key"), "w") as fh:
            fh.write(config.run_key(run.seed) + "\n")
    return cfg_dir

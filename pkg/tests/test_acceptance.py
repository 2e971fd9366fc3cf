"""Exit criteria, one test per criterion, each at its pinned tolerance.

Criteria 7 and 8 train desk-scale learning curves (50,000 steps per run) and
take the bulk of the runtime.
"""

import io
import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from marl_ngu.cli import main as cli_main
from marl_ngu.config import ExperimentConfig, experiment_matrix
from marl_ngu.env import PursuitEvasionEnv
from marl_ngu.metrics import final_window_means, write_raw_csv
from marl_ngu.nn import MLP, cross_entropy_from_logits, huber_q_loss
from marl_ngu.ngu import NON_NOVEL, NOVEL, EpisodicMemory, SharedNoveltyRegistry, episodic_novelty, \
    record_visit, shared_novelty_gate
from marl_ngu.runner import is_sync_step, is_train_step, run_seeds, run_single

from . import oracles
from .acceptance_report import report


# 1 ------------------------------------------------------------------------

def _random_loss(kind, net, x, r):
    """Scalar loss of the network output and its gradient with respect to that output."""
    out_dim = net.layer_sizes[-1]
    if kind == "linear":
        w = r.normal(size=(len(x), out_dim))
        return (lambda y: float(np.sum(y * w))), (lambda y: w)
    if kind == "mse":
        t = r.normal(size=(len(x), out_dim))
        return (lambda y: float(np.mean((y - t) ** 2))), (lambda y: 2 * (y - t) / y.size)
    if kind == "huber":
        t = r.normal(scale=2.0, size=(len(x), out_dim))
        return (lambda y: huber_q_loss(y, t)[0]), (lambda y: huber_q_loss(y, t)[1])
    labels = r.integers(0, out_dim, size=len(x))
    return (lambda y: cross_entropy_from_logits(y, labels)[0]), (lambda y: cross_entropy_from_logits(y, labels)[1])


def test_criterion_01_gradient_oracle():
    r = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for i in range(100):
        depth = int(r.integers(1, 4))
        sizes = [int(r.integers(1, 9)) for _ in range(depth + 1)]
        sizes[-1] = max(sizes[-1], 2)
        net = MLP(sizes, rng=r)
        x = r.normal(size=(int(r.integers(1, 5)), sizes[0]))
        loss, dloss = _random_loss(("linear", "mse", "huber", "xent")[i % 4], net, x, r)
        net.backward(dloss(net.forward(x)))
        numeric = oracles.central_difference(lambda: loss(net.predict(x)), net.parameters(), h=1e-5)
        for a, n in zip(net.gradients(), numeric):
            for va, vn in zip(a.ravel(), n.ravel()):
                worst = max(worst, oracles.rel_error(va, vn, floor=1e-6))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 60
    report(1, ok, f"100 instances, worst relative error {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 60s)")
    assert ok


# 2 ------------------------------------------------------------------------

def test_criterion_02_knn_oracle():
    r = np.random.default_rng(7)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        n, d, k = int(r.integers(1, 65)), int(r.integers(1, 9)), int(r.integers(1, 16))
        mem = EpisodicMemory(d, capacity=64)
        rows = r.normal(size=(n, d))
        for row in rows:
            record_visit(mem, row)
        q = r.normal(size=d) if r.random() < 0.8 else rows[int(r.integers(n))].copy()
        if episodic_novelty(mem, q, k) != oracles.knn_mean_distance(rows.tolist(), q.tolist(), k):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    report(2, ok, f"1000 instances, {mismatches} inexact results, {elapsed:.1f}s (< 60s)")
    assert ok


# 3 ------------------------------------------------------------------------

_states = [np.array([math.cos(a), math.sin(a), 0.5]) for a in np.linspace(0.0, 3.0, 5)]


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2), st.lists(st.integers(0, 4), min_size=1, max_size=60))
def _same_agent_never_non_novel(k, agent, visits):
    reg = SharedNoveltyRegistry(3, k=k, n_agents=3)
    for s in visits:
        assert shared_novelty_gate(reg, agent, _states[s]) == NOVEL


def test_criterion_03_shared_novelty_state_machine():
    e = np.array([0.3, -1.2, 0.8])
    reg1 = SharedNoveltyRegistry(3, k=1)
    trace1 = [shared_novelty_gate(reg1, 0, e), shared_novelty_gate(reg1, 1, e)]
    reg2 = SharedNoveltyRegistry(3, k=2)
    trace2 = [shared_novelty_gate(reg2, 0, e), shared_novelty_gate(reg2, 1, e)]
    size_after_two = reg2.visitor_count(e)
    trace2.append(shared_novelty_gate(reg2, 2, e))
    ok = (trace1 == [NOVEL, NON_NOVEL] and trace2 == [NOVEL, NOVEL, NON_NOVEL] and size_after_two == 2)
    try:
        _same_agent_never_non_novel()
        prop = True
    except AssertionError:
        prop = False
    report(3, ok and prop, f"k=1 trace {trace1}, k=2 trace {trace2}, same-agent property "
                           f"{'held' if prop else 'violated'}")
    assert ok and prop


# 4 ------------------------------------------------------------------------

def _read_dump(text):
    rows = [line.split(",") for line in text.splitlines()[1:]]
    by_step = {}
    for row in rows:
        by_step.setdefault(int(row[0]), []).append(row)
    return by_step


def test_criterion_04_physics_conformance(tmp_path):
    ents = oracles.layout()
    worst = 0.0
    for seed in (0, 1, 2):
        path = tmp_path / f"dump{seed}.csv"
        assert cli_main(["dump-env", "--seed", str(seed), "--steps", "100", "--policy", "random",
                         "--out", str(path)]) == 0
        steps = _read_dump(path.read_text())
        assert sorted(steps) == list(range(1, 101))
        env = PursuitEvasionEnv()
        env.reset(seed)
        pos, vel = env.state.pos.copy(), env.state.vel.copy()
        for t in range(1, 101):
            rows = sorted(steps[t], key=lambda r: int(r[1]))
            actions = [int(r[6]) if r[6] else None for r in rows]
            exp_pos, exp_vel = oracles.physics_step(pos, vel, actions, ents)
            got_pos = np.array([[float(r[2]), float(r[3])] for r in rows])
            got_vel = np.array([[float(r[4]), float(r[5])] for r in rows])
            worst = max(worst, np.abs(got_pos - exp_pos).max(), np.abs(got_vel - exp_vel).max())
            pos, vel = got_pos, got_vel
    ok = worst <= 1e-9
    report(4, ok, f"3 x 100-step dumps vs independent physics oracle, max deviation {worst:.2e} (<= 1e-9)")
    assert ok


# 5 ------------------------------------------------------------------------

def test_criterion_05_determinism(tmp_path):
    start = time.perf_counter()
    bad = []
    for cfg in experiment_matrix(total_timesteps=2000):
        blobs = []
        for rep in range(2):
            res = run_single(cfg, 11)
            path = tmp_path / f"{cfg.name}_{rep}.csv"
            write_raw_csv(res.series, path)
            blobs.append(path.read_bytes())
        if blobs[0] != blobs[1]:
            bad.append(cfg.name)
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 300
    report(5, ok, f"8-config matrix at 2,000 steps, byte-identical raw CSVs"
                  f"{'' if not bad else ' except ' + ', '.join(bad)}, {elapsed:.0f}s (< 300s)")
    assert ok


# 6 ------------------------------------------------------------------------

def test_criterion_06_reward_sharing():
    env = PursuitEvasionEnv()
    r = np.random.default_rng(99)
    max_var, nonzero = 0.0, 0
    for t in range(10_000):
        if t % env.max_cycles == 0:
            env.reset(int(r.integers(2**31)))
        out = env.step(r.integers(0, 5, size=env.n_pursuers))
        max_var = max(max_var, float(np.var(out.rewards)))
        nonzero += out.rewards[0] != 0
    ok = max_var == 0.0
    report(6, ok, f"10,000 random steps, max per-step reward variance {max_var} ({nonzero} rewarded steps)")
    assert ok


# 7 and 8: desk-scale learning curves -----------------------------------------

DESK_STEPS = 50_000
FINAL_STEPS = 10_000


def _desk(name, variant, shared, **kw):
    return ExperimentConfig(name=name, variant=variant, shared_buffer=shared, total_timesteps=DESK_STEPS, **kw)


@pytest.fixture(scope="module")
def desk_runs():
    """Lazily trained runs keyed by (config name, seed); shared by criteria 7 and 8."""
    cache = {}

    def get(cfg, seeds):
        missing = [s for s in seeds if (cfg.name, s) not in cache]
        for s, series in zip(missing, run_seeds(cfg, missing)):
            cache[(cfg.name, s)] = series
        return [cache[(cfg.name, s)] for s in seeds]

    return get


def _final(runs, cfg):
    return final_window_means(runs, FINAL_STEPS, cfg.max_cycles)


def _pooled_se(a, b):
    return math.sqrt(np.var(a, ddof=1) / len(a) + np.var(b, ddof=1) / len(b))


@pytest.mark.slow
def test_criterion_07_desk_scale_ordering(desk_runs):
    seeds = [0, 1, 2, 3, 4]
    dqn_ind = _desk("multi_dqn_individual", "multi_dqn", False)
    ngu_sh = _desk("multi_ngu_shared", "multi_ngu", True)
    nov_sh = _desk("shared_novelty_k1_shared", "shared_novelty", True, sharing_k=1)
    start = time.perf_counter()
    f_dqn = _final(desk_runs(dqn_ind, seeds), dqn_ind)
    f_ngu = _final(desk_runs(ngu_sh, seeds), ngu_sh)
    f_nov = _final(desk_runs(nov_sh, seeds), nov_sh)
    elapsed = time.perf_counter() - start
    se_a = _pooled_se(f_ngu, f_dqn)
    se_b = _pooled_se(f_nov, f_ngu)
    gap_a = f_ngu.mean() - f_dqn.mean()
    gap_b = f_nov.mean() - f_ngu.mean()
    ok_a = gap_a > se_a
    ok_b = abs(gap_b) <= se_b
    report(7, ok_a and ok_b,
           f"(a) multi_ngu/shared {f_ngu.mean():.3f} - multi_dqn/individual {f_dqn.mean():.3f} = {gap_a:+.3f} "
           f"vs pooled SE {se_a:.3f} [{'ok' if ok_a else 'not met'}]; "
           f"(b) shared_novelty k=1 - multi_ngu (shared) = {gap_b:+.3f}, |gap| <= SE {se_b:.3f} "
           f"[{'ok' if ok_b else 'not met'}]; {elapsed / 60:.1f} min")
    assert ok_a, f"multi_ngu/shared does not beat multi_dqn/individual by one pooled SE: {gap_a:.4f} <= {se_a:.4f}"
    assert ok_b, f"shared_novelty k=1 not within one pooled SE of multi_ngu: |{gap_b:.4f}| > {se_b:.4f}"


@pytest.mark.slow
def test_criterion_08_sharing_k_sweep(desk_runs):
    seeds = [0, 1, 2]
    k1 = _desk("shared_novelty_k1_shared", "shared_novelty", True, sharing_k=1)
    k2 = _desk("shared_novelty_k2_shared", "shared_novelty", True, sharing_k=2)
    f1 = _final(desk_runs(k1, seeds), k1)
    f2 = _final(desk_runs(k2, seeds), k2)
    gap = f1.mean() - f2.mean()
    se = _pooled_se(f1, f2)
    if gap >= 0:
        report(8, True, f"k=1 {f1.mean():.3f} >= k=2 {f2.mean():.3f} (gap {gap:+.3f}, SE {se:.3f})")
        return
    if -gap < se:
        msg = f"k=1 {f1.mean():.3f} < k=2 {f2.mean():.3f} but within one SE ({gap:+.3f}, SE {se:.3f}); report-only"
        report(8, True, msg, warn=True)
        warnings.warn(msg)
        return
    report(8, False, f"k=1 {f1.mean():.3f} < k=2 {f2.mean():.3f} by more than one SE ({gap:+.3f}, SE {se:.3f})")
    pytest.fail("k=1 trails k=2 by more than one standard error")


# 9 ------------------------------------------------------------------------

def test_criterion_09_variant_equivalence():
    results = []
    for shared in (False, True):
        base = dict(shared_buffer=shared, total_timesteps=8_000, learning_starts=2_000)
        dqn = run_single(ExperimentConfig(variant="multi_dqn", **base), 5, record_rewards=True)
        ngu = run_single(ExperimentConfig(variant="multi_ngu", beta=0.0, inverse_dynamics=False, **base), 5,
                         record_rewards=True)
        same = dqn.reward_stream.tobytes() == ngu.reward_stream.tobytes()
        results.append(same)
    ok = all(results)
    report(9, ok, f"beta=0 multi_ngu vs multi_dqn reward streams identical "
                  f"(individual: {results[0]}, shared: {results[1]}; 8,000 steps incl. training)")
    assert ok


# 10 -----------------------------------------------------------------------

def test_criterion_10_cadence():
    full = ExperimentConfig(total_timesteps=200_000)
    triggers = sum(is_train_step(full, t) for t in range(1, full.total_timesteps + 1))
    syncs = sum(is_sync_step(full, t) for t in range(1, full.total_timesteps + 1))
    per_agent = triggers * full.gradient_steps
    desk = ExperimentConfig(variant="multi_ngu", total_timesteps=10_000)
    res = run_single(desk, 0)
    expected_desk = desk.gradient_steps * (desk.total_timesteps // 16 - desk.learning_starts // 16)
    ok = (abs(per_agent - 48_752) <= 1 and syncs == 100
          and res.td_updates == [expected_desk] * 3 == [1252] * 3 and res.target_syncs == 5
          and all(a.gradient_steps == 1252 and a.target_syncs == 5 for a in res.agents))
    report(10, ok, f"T=200,000: {per_agent} td_updates/agent, {syncs} syncs; "
                   f"T=10,000 run: {res.td_updates} td_updates, {res.target_syncs} syncs")
    assert ok

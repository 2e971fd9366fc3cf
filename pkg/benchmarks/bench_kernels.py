"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Also times whole environment steps and a short training run under each
backend (the backend is chosen at import, so those run in subprocesses).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from marl_ngu import kernels
from marl_ngu.env import PursuitEvasionEnv


def kernel_cases():
    env = PursuitEvasionEnv()
    env.reset(0)
    force = env.action_forces([1, 2, 3, 4])
    r = np.random.default_rng(0)
    memory = r.normal(size=(25, 32))
    query = r.normal(size=32)
    unit = query / np.linalg.norm(query)
    reps = r.normal(size=(75, 32))

    def physics(k):
        pos, vel, f = env.state.pos.copy(), env.state.vel.copy(), force.copy()
        return lambda: k.physics_step(pos, vel, f, env.radius, env.mass, env.max_speed, env.movable,
                                      env.collide, env.dt, env.damping, env.contact_force, env.contact_margin)

    return {
        "physics_step (6 entities)": physics,
        "knn_mean_distance (25x32, k=10)": lambda k: (lambda: k.knn_mean_distance(memory, 25, query, 10)),
        "max_cosine (75x32)": lambda k: (lambda: k.max_cosine(reps, 75, unit)),
    }


END_TO_END = """
import time
from marl_ngu import BACKEND
from marl_ngu.config import ExperimentConfig
from marl_ngu.env import PursuitEvasionEnv
from marl_ngu.runner import run_single
import numpy as np
env = PursuitEvasionEnv(max_cycles=10**9); env.reset(0); acts = np.random.default_rng(0).integers(0, 5, size=(5000, 3))
t = time.perf_counter()
for a in acts: env.step(a)
env_us = (time.perf_counter() - t) / 5000 * 1e6
cfg = ExperimentConfig(variant="shared_novelty", shared_buffer=True, total_timesteps=3000, learning_starts=1000)
t = time.perf_counter(); run_single(cfg, 0); run_s = time.perf_counter() - t
print(f"{BACKEND:>7}: env.step {env_us:8.1f} us   shared_novelty 3k-step run {run_s:6.2f} s")
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=2000)
    args = ap.parse_args()
    backends = kernels.backends()
    print(f"backends available: {', '.join(sorted(backends))}")
    for label, make in kernel_cases().items():
        row = []
        for name in sorted(backends):
            fn = make(backends[name])
            best = min(timeit.repeat(fn, number=args.number, repeat=args.repeat)) / args.number
            row.append(f"{name} {best * 1e6:8.2f} us")
        print(f"{label:34s} " + "   ".join(row))
    for force_python in (False, True):
        env = dict(os.environ)
        if force_python:
            env["MARL_NGU_PURE_PYTHON"] = "1"
        elif "cython" not in backends:
            continue
        subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True)


if __name__ == "__main__":
    main()

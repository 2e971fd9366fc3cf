import os
import subprocess
import sys

import pytest

from marl_ngu.cli import main

MINI = """schema_version = 1
name = "{name}"
variant = "{variant}"
shared_buffer = {shared}
total_timesteps = 150
learning_starts = 50
batch_size = 16
hidden_sizes = [16]
embedding_dim = 8
seeds = [0, 1]
"""


def write_cfg(tmp_path, name, variant="multi_ngu", shared="false", extra=""):
    p = tmp_path / f"{name}.toml"
    p.write_text(MINI.format(name=name, variant=variant, shared=shared) + extra)
    return str(p)


def test_train_minimal(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "mini")
    out = tmp_path / "res"
    assert main(["train", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "mini/aggregate.csv").exists()
    assert (out / "mini/0/raw.csv").exists() and (out / "mini/curve.svg").exists()
    assert "n_runs=2" in capsys.readouterr().out


def test_train_seed_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "mini")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r"), "--seeds", "1,2,3"]) == 0
    assert "n_runs=3" in capsys.readouterr().out


def test_train_bad_beta(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "bad", variant="hetero_beta", extra="beta = [0.1, 0.2]\n")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert "beta" in capsys.readouterr().err


def test_unknown_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "bad", extra="learnig_rate = 0.1\n")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert "learnig_rate" in capsys.readouterr().err


def test_compare_two_scenarios(tmp_path):
    cfgs = [write_cfg(tmp_path, f"{v}_{s}", v, "true" if s == "shared" else "false",
                      "beta = [0.1, 0.2, 0.4]\n" if v == "hetero_beta" else "")
            for s in ("individual", "shared")
            for v in ("multi_dqn", "multi_ngu", "shared_novelty", "hetero_beta")]
    out = tmp_path / "cmp"
    args = ["compare", "--out", str(out)]
    for c in cfgs:
        args += ["--config", c]
    assert main(args) == 0
    for label in ("individual", "shared"):
        svg = (out / f"compare_{label}.svg").read_text()
        assert svg.count('<polyline class="curve"') == 4
    combined = (out / "compare_aggregate.csv").read_bytes()
    stamp = (out / "multi_ngu_shared/aggregate.csv").read_bytes()
    assert main(args) == 0
    assert (out / "compare_aggregate.csv").read_bytes() == combined
    assert (out / "multi_ngu_shared/aggregate.csv").read_bytes() == stamp


def test_compare_identical_configs_coincide(tmp_path):
    a = write_cfg(tmp_path, "same")
    out = tmp_path / "cmp"
    assert main(["compare", "--config", a, "--config", a, "--out", str(out)]) == 0
    rows = (out / "compare_aggregate.csv").read_text().splitlines()[1:]
    half = len(rows) // 2
    assert [r.split(",", 1)[1] for r in rows[:half]] == [r.split(",", 1)[1] for r in rows[half:]]


def test_compare_needs_two(tmp_path):
    assert main(["compare", "--config", write_cfg(tmp_path, "one"), "--out", str(tmp_path)]) == 2


def test_compare_mixed_obs_dims(tmp_path, capsys):
    a = write_cfg(tmp_path, "a")
    b = write_cfg(tmp_path, "b", extra="n_obstacles = 1\n")
    assert main(["compare", "--config", a, "--config", b, "--out", str(tmp_path / "o")]) == 2


def test_dump_env(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["dump-env", "--seed", "0", "--steps", "25", "--out", str(p1)]) == 0
    assert main(["dump-env", "--seed", "0", "--steps", "25", "--out", str(p2)]) == 0
    assert len(p1.read_text().splitlines()) == 1 + 25 * 6
    assert p1.read_bytes() == p2.read_bytes()


def test_plot(tmp_path):
    cfg = write_cfg(tmp_path, "mini")
    out = tmp_path / "res"
    main(["train", "--config", cfg, "--out", str(out)])
    svg = tmp_path / "p.svg"
    assert main(["plot", "--config", cfg, "--out", str(out), "--svg", str(svg)]) == 0
    assert main(["plot", str(out / "mini/aggregate.csv"), "--svg", str(tmp_path / "q.svg")]) == 0
    assert "<polyline" in svg.read_text()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["dump-env", "--out", str(blocker / "sub/out.csv")]) == 4


def test_module_entry_point_and_pure_python_backend(tmp_path):
    env = dict(os.environ, MARL_NGU_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-m", "marl_ngu", "dump-env", "--steps", "40", "--seed", "3"],
                         env=env, capture_output=True, text=True, check=True).stdout
    probe = subprocess.run([sys.executable, "-c", "import marl_ngu; print(marl_ngu.BACKEND)"],
                           env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert probe == "python"
    native = subprocess.run([sys.executable, "-m", "marl_ngu", "dump-env", "--steps", "40", "--seed", "3"],
                            capture_output=True, text=True, check=True).stdout
    assert out == native


def test_divergence_exit_code(tmp_path, monkeypatch, capsys):
    import marl_ngu.runner as runner

    def blow_up(agent, batch, gamma):
        raise runner.TrainingDivergenceError("TD loss is not finite")

    monkeypatch.setattr(runner, "td_update", blow_up)
    cfg = write_cfg(tmp_path, "boom", variant="multi_dqn")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r"), "--seeds", "0"]) == 3
    assert "diverged" in capsys.readouterr().err

"""Experiment configuration and its TOML file format.

A config file is a flat table of keys mirroring :class:`ExperimentConfig`
plus ``schema_version`` (currently 1). Unknown keys are rejected. Example::

    schema_version = 1
    name = "multi_ngu_shared"
    variant = "multi_ngu"        # multi_dqn | multi_ngu | shared_novelty | hetero_beta
    shared_buffer = true
    beta = 0.1                   # or a per-pursuer list, e.g. [0.1, 0.2, 0.4]
    seeds = [0, 1, 2, 3, 4]
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigurationError

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
VARIANTS = ("multi_dqn", "multi_ngu", "shared_novelty", "hetero_beta")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    variant: str = "multi_ngu"
    shared_buffer: bool = False
    n_pursuers: int = 3
    n_obstacles: int = 2
    max_cycles: int = 25
    total_timesteps: int = 200_000
    learning_starts: int = 5_000
    train_frequency: int = 16
    gradient_steps: int = 4
    target_update_interval: int = 2_000
    batch_size: int = 128
    buffer_size: int = 1_000_000
    gamma: float = 0.99
    learning_rate: float = 1e-3
    max_grad_norm: float = 10.0
    exploration_fraction: float = 0.1
    initial_epsilon: float = 1.0
    final_epsilon: float = 0.1
    hidden_sizes: tuple = (64, 64)
    beta: float | tuple = 0.1
    sharing_k: int = 1
    tau_sim: float = 0.99
    k_nn: int = 10
    r_novel_max: float = 1.0
    clip_intrinsic: bool = True
    embedding_dim: int = 32
    memory_capacity: int = 1_000
    inverse_dynamics: bool = True
    timeout_is_terminal: bool = False
    seeds: tuple = (0,)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if isinstance(self.beta, (list, tuple)):
            object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        self.validate()

    @property
    def uses_ngu(self) -> bool:
        return self.variant != "multi_dqn"

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}", "variant")
        positive = ("n_pursuers", "max_cycles", "total_timesteps", "train_frequency", "gradient_steps",
                    "target_update_interval", "batch_size", "buffer_size", "k_nn", "embedding_dim",
                    "memory_capacity", "sharing_k")
        for name in positive:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}", name)
        for name in ("n_obstacles", "learning_starts"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0", name)
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in [0, 1]", "gamma")
        if self.learning_rate <= 0 or self.max_grad_norm <= 0:
            raise ConfigurationError("learning_rate and max_grad_norm must be positive", "learning_rate")
        if not 0.0 < self.tau_sim <= 1.0:
            raise ConfigurationError("tau_sim must lie in (0, 1]", "tau_sim")
        if not 0.0 <= self.final_epsilon <= self.initial_epsilon <= 1.0:
            raise ConfigurationError("need 0 <= final_epsilon <= initial_epsilon <= 1", "final_epsilon")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required", "seeds")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ConfigurationError("hidden_sizes must be a non-empty list of positive ints", "hidden_sizes")
        if isinstance(self.beta, tuple):
            if len(self.beta) != self.n_pursuers:
                raise ConfigurationError(
                    f"beta list has {len(self.beta)} entries but n_pursuers = {self.n_pursuers}", "beta")
            if any(b < 0 for b in self.beta):
                raise ConfigurationError("beta values must be non-negative", "beta")
        else:
            if self.variant == "hetero_beta":
                raise ConfigurationError("hetero_beta needs a per-pursuer beta list", "beta")
            if self.beta < 0:
                raise ConfigurationError("beta must be non-negative", "beta")

    def betas(self) -> tuple:
        """Per-pursuer intrinsic scale; all zero for the DQN baseline."""
        if not self.uses_ngu:
            return (0.0,) * self.n_pursuers
        if isinstance(self.beta, tuple):
            return self.beta
        return (float(self.beta),) * self.n_pursuers

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("hidden_sizes", "seeds"):
            d[key] = list(d[key])
        if isinstance(d["beta"], tuple):
            d["beta"] = list(d["beta"])
        return d

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def run_key(self, seed: int) -> str:
        """Content hash identifying one (config, seed) training run."""
        d = self.to_dict()
        d.pop("name")
        d.pop("seeds")
        d["seed"] = int(seed)
        d["schema_version"] = SCHEMA_VERSION
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {version}", "schema_version")
        known = {f.name: f for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigurationError(f"unknown config key {key!r}", key)
        defaults = cls.__dataclass_fields__
        for key, value in data.items():
            expected = defaults[key].default
            if isinstance(expected, bool) and not isinstance(value, bool):
                raise ConfigurationError(f"{key} must be true/false", key)
            if isinstance(expected, int) and not isinstance(expected, bool) and not isinstance(value, int):
                raise ConfigurationError(f"{key} must be an integer", key)
            if isinstance(expected, float) and key != "beta" and not isinstance(value, (int, float)):
                raise ConfigurationError(f"{key} must be a number", key)
        if "beta" in data and isinstance(data["beta"], list):
            data["beta"] = tuple(data["beta"])
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
    data.setdefault("name", _stem(path))
    return ExperimentConfig.from_dict(data)


def _stem(path) -> str:
    import os

    return os.path.splitext(os.path.basename(str(path)))[0]


def dumps_toml(config: ExperimentConfig) -> str:
    """Serialise a config to the TOML subset ``load_config`` reads."""
    lines = [f"schema_version = {SCHEMA_VERSION}"]
    for key, value in config.to_dict().items():
        lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(value)


def experiment_matrix(**overrides) -> list[ExperimentConfig]:
    """The two buffer scenarios times four configurations."""
    out = []
    for shared in (False, True):
        tag = "shared" if shared else "individual"
        for variant in VARIANTS:
            beta = (0.1, 0.2, 0.4) if variant == "hetero_beta" else 0.1
            out.append(ExperimentConfig(name=f"{variant}_{tag}", variant=variant, shared_buffer=shared,
                                        beta=beta, **overrides))
    return out

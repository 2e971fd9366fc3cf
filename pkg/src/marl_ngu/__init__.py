"""Multi-agent Never Give Up: episodic-novelty DQN pursuers in a particle tag world."""

from .config import ExperimentConfig, load_config
from .env import PursuitEvasionEnv
from .kernels import BACKEND
from .runner import run_experiment, run_single

__all__ = ["BACKEND", "ExperimentConfig", "PursuitEvasionEnv", "load_config", "run_experiment", "run_single"]
__version__ = "0.1.0"

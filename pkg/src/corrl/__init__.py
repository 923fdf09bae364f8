"""Corruption-robust episodic RL: environments, learners, adversaries and an exact-regret harness."""
from .env import LinearMdp, TabularMdp
from .harness import ExperimentConfig, run_experiment
from . import kernels
from .oracle import MasterPolicy, evaluate, optimal_values

__version__ = "0.1.0"

__all__ = ["ExperimentConfig", "LinearMdp", "MasterPolicy", "TabularMdp", "kernels",
           "evaluate", "optimal_values", "run_experiment"]

"""Streaming GP prediction with outlier rejection and regime-switch detection.

``lintel`` filters exact Markovian-GP state per candidate model in constant
time per step; ``intel`` is the windowed kernel-GP baseline it replaces.
"""

from lintel.fusion import FusionRule
from lintel.kernels import KernelSpec, discretize, kernel_eval, matern12, matern32, matern52, sum_of, to_state_space
from lintel.markov_gp import GaussianState, PredictiveDistribution
from lintel.streaming import Candidate, EnsembleState, StepRecord, StreamConfig, run_stream, step_intel, step_lintel

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "EnsembleState",
    "FusionRule",
    "GaussianState",
    "KernelSpec",
    "PredictiveDistribution",
    "StepRecord",
    "StreamConfig",
    "discretize",
    "kernel_eval",
    "matern12",
    "matern32",
    "matern52",
    "run_stream",
    "step_intel",
    "step_lintel",
    "sum_of",
    "to_state_space",
]

"""Verification-guided training toolkit for small dense ReLU classifiers.

The package trains fully-connected ReLU classifiers and augments their
training data with minimal-perturbation adversaries found by an exact
branch-and-bound verifier.  Adversaries are labeled either by a ground-truth
oracle or by a human through a small HTTP labeling service.
"""

from veritrain.config import ConfigError, ExperimentConfig, default_config
from veritrain.engine import RunReport, train_iada, train_regular
from veritrain.nn import (
    AdamState,
    ContractError,
    Gradients,
    MlpParams,
    Sample,
    adam_step,
    backward,
    cross_entropy,
    forward,
    forward_batch,
    init_params,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from veritrain.verifier import AdversaryResult, min_adversary

__all__ = [
    "AdamState",
    "AdversaryResult",
    "ConfigError",
    "ContractError",
    "ExperimentConfig",
    "Gradients",
    "MlpParams",
    "RunReport",
    "Sample",
    "adam_step",
    "backward",
    "cross_entropy",
    "default_config",
    "forward",
    "forward_batch",
    "init_params",
    "load_checkpoint",
    "min_adversary",
    "predict",
    "save_checkpoint",
    "train_iada",
    "train_regular",
]

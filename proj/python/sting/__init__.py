# SPDX-License-Identifier: Apache-2.0
"""Multivariate time-series imputation (C++ core)."""

from ._core import (
    CheckpointError,
    Config,
    ConfigError,
    Model,
    NumericError,
    ablate,
    build_delta,
    downstream,
    evaluate,
    gen_sinusoid_mix,
    impute_csv,
    load_csv,
    sample_hint,
    train,
)

__all__ = [
    "CheckpointError",
    "Config",
    "ConfigError",
    "Model",
    "NumericError",
    "ablate",
    "build_delta",
    "downstream",
    "evaluate",
    "gen_sinusoid_mix",
    "impute_csv",
    "load_csv",
    "sample_hint",
    "train",
]

"""Networked control-loop simulator with programmable-network mitigation."""

from ._cpsnet import (
    CompareError,
    ConfigError,
    batch,
    chi2_cdf,
    chi2_quantile,
    compare,
    lqr_gain,
    run,
    summarize,
    validate,
    wilson_interval,
)

__all__ = [
    "CompareError",
    "ConfigError",
    "batch",
    "chi2_cdf",
    "chi2_quantile",
    "compare",
    "lqr_gain",
    "run",
    "summarize",
    "validate",
    "wilson_interval",
]

"""Monte Carlo experiments: size/power studies and rolling backtests."""

from __future__ import annotations

from importlib import resources

from ..errors import ConfigError
from .config import (
    DynamicBacktestConfig,
    SizePowerConfig,
    StaticBacktestConfig,
    config_from_mapping,
    config_to_mapping,
    load_config,
)
from .experiments import run_dynamic_backtest, run_experiment, run_size_power, run_static_backtest, run_test
from .forecasters import empirical_quantile, forecast_quantiles, make_forecaster, rolling_forecasts
from .garch import GarchFit, GarchParams, garch_fit, garch_simulate, garch_variance
from .report import ExperimentReport, ReportRow, judge_colour

__all__ = [
    "DynamicBacktestConfig",
    "SizePowerConfig",
    "StaticBacktestConfig",
    "config_from_mapping",
    "config_to_mapping",
    "load_config",
    "run_dynamic_backtest",
    "run_experiment",
    "run_size_power",
    "run_static_backtest",
    "run_test",
    "empirical_quantile",
    "forecast_quantiles",
    "make_forecaster",
    "rolling_forecasts",
    "GarchFit",
    "GarchParams",
    "garch_fit",
    "garch_simulate",
    "garch_variance",
    "ExperimentReport",
    "ReportRow",
    "judge_colour",
    "preset_names",
    "preset_path",
]


def preset_names() -> list[str]:
    root = resources.files(__package__) / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_path(name: str) -> str:
    """Filesystem path of a shipped preset such as ``table3_reduced``."""
    names = preset_names()
    if name not in names:
        raise ConfigError(f"unknown preset {name!r}; available presets are {', '.join(names)}")
    return str(resources.files(__package__) / "presets" / f"{name}.ini")

"""Experiment configurations and their INI representation.

Each config type maps to one INI section whose keys mirror the dataclass
fields.  List values are comma-separated; models use the names accepted by
:func:`~varbacktest.distributions.parse_model`.

Example::

    [size_power]
    true_models = normal, t5, t3, st3
    reference_model = normal
    alpha = 0.975
    levels = 1, 2, 4, 8
    sample_sizes = 250, 500, 1000, 2000
    replications = 2000
    tests = pearson, nass, lrt
    master_seed = 1
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from ..distributions import Family, LossModel, parse_model
from ..errors import BacktestError, ConfigError
from .garch import GarchParams

MULTINOMIAL_TESTS = ("pearson", "nass", "lrt")
BINOMIAL_TESTS = ("score_1s", "score_2s", "wald_1s", "wald_2s", "lrt_1s", "lrt_2s")
ALL_TESTS = MULTINOMIAL_TESTS + BINOMIAL_TESTS
STATIC_FORECASTERS = ("oracle", "good", "poor", "industry")
DYNAMIC_FORECASTERS = ("oracle", "garch.t", "garch.hs", "garch.norm", "arch.t", "arch.norm", "hs")


def _require(cond, field_name, msg):
    if not cond:
        raise ConfigError(f"{field_name}: {msg}")


def _check_names(values, allowed, field_name):
    _require(len(values) > 0, field_name, "must not be empty")
    for v in values:
        _require(v in allowed, field_name, f"unknown name {v!r}; valid names are {', '.join(allowed)}")
    _require(len(set(values)) == len(values), field_name, "contains duplicates")


_TUPLE_FIELDS = ("true_models", "alphas", "levels", "sample_sizes", "windows", "forecasters", "tests")


def _check_common(cfg):
    for name in _TUPLE_FIELDS:
        if hasattr(cfg, name) and not isinstance(getattr(cfg, name), tuple):
            value = getattr(cfg, name)
            object.__setattr__(cfg, name, tuple(value) if not isinstance(value, (str, LossModel)) else (value,))
    _require(all(0.0 < a < 1.0 for a in cfg.alphas) and cfg.alphas, "alphas", "each alpha must lie in (0, 1)")
    _require(cfg.levels and all(isinstance(N, int) and N >= 1 for N in cfg.levels), "levels",
             "must be positive integers")
    _require(cfg.replications >= 1, "replications", "must be at least 1")
    _require(0.0 < cfg.kappa < 1.0, "kappa", "must lie in (0, 1)")
    _require(cfg.master_seed >= 0, "master_seed", "must be nonnegative")
    _check_names(cfg.tests, ALL_TESTS, "tests")


@dataclass(frozen=True)
class SizePowerConfig:
    """Draw ``n`` losses from each true model and test them against the reference quantiles."""

    true_models: tuple = (LossModel.normal(),)
    reference_model: LossModel = LossModel.normal()
    alphas: tuple = (0.975,)
    levels: tuple = (1, 2, 4, 8, 16, 32, 64)
    sample_sizes: tuple = (250, 500, 1000, 2000)
    replications: int = 10_000
    kappa: float = 0.05
    tests: tuple = MULTINOMIAL_TESTS
    master_seed: int = 1

    def __post_init__(self):
        _check_common(self)
        _require(len(self.true_models) > 0, "true_models", "must not be empty")
        _require(self.sample_sizes and all(n >= 1 for n in self.sample_sizes), "sample_sizes",
                 "must be positive integers")


@dataclass(frozen=True)
class StaticBacktestConfig:
    """Rolling backtests of iid losses with window fits refreshed every ``stride`` steps."""

    true_models: tuple = (LossModel.normal(),)
    alphas: tuple = (0.975,)
    levels: tuple = (1, 2, 4, 8, 16, 32, 64)
    n: int = 1000
    windows: tuple = (250, 500)
    stride: int = 10
    forecasters: tuple = STATIC_FORECASTERS
    replications: int = 1000
    kappa: float = 0.05
    tests: tuple = MULTINOMIAL_TESTS
    master_seed: int = 1

    def __post_init__(self):
        _check_common(self)
        _require(len(self.true_models) > 0, "true_models", "must not be empty")
        _require(self.n >= 1, "n", "must be positive")
        _require(self.windows and all(w >= 50 for w in self.windows), "windows", "each window must be at least 50")
        _require(self.stride >= 1, "stride", "must be at least 1")
        _check_names(self.forecasters, STATIC_FORECASTERS, "forecasters")


@dataclass(frozen=True)
class DynamicBacktestConfig:
    """Rolling backtests of GARCH(1,1) losses."""

    garch: GarchParams = field(default_factory=GarchParams)
    alphas: tuple = (0.975,)
    levels: tuple = (1, 2, 4, 8, 16, 32, 64)
    n: int = 1000
    windows: tuple = (500, 1000)
    stride: int = 10
    burn_in: int = 1000
    forecasters: tuple = DYNAMIC_FORECASTERS
    replications: int = 500
    kappa: float = 0.05
    tests: tuple = MULTINOMIAL_TESTS
    master_seed: int = 1

    def __post_init__(self):
        _check_common(self)
        _require(self.n >= 1, "n", "must be positive")
        _require(self.windows and all(w >= 250 for w in self.windows), "windows",
                 "each window must be at least 250 for volatility fitting")
        _require(self.stride >= 1, "stride", "must be at least 1")
        _require(self.burn_in >= 0, "burn_in", "must be nonnegative")
        _check_names(self.forecasters, DYNAMIC_FORECASTERS, "forecasters")


SECTIONS = {
    "size_power": SizePowerConfig,
    "static": StaticBacktestConfig,
    "dynamic": DynamicBacktestConfig,
}


def _split(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _parse_value(name, raw, default):
    try:
        if name in ("true_models",):
            return tuple(parse_model(v) for v in _split(raw))
        if name == "reference_model":
            return parse_model(raw.strip())
        if name in ("alphas",):
            return tuple(float(v) for v in _split(raw))
        if name in ("levels", "sample_sizes", "windows"):
            return tuple(int(v) for v in _split(raw))
        if name in ("tests", "forecasters"):
            return tuple(v.lower() for v in _split(raw))
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (ValueError, BacktestError) as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} ({exc})") from None
    raise ConfigError(f"{name}: unsupported field")


_GARCH_KEYS = ("alpha0", "alpha1", "beta1", "nu")
_ALIASES = {"alpha": "alphas", "true_model": "true_models", "window": "windows", "sample_size": "sample_sizes"}


def config_from_mapping(kind: str, values: dict, overrides: dict | None = None):
    """Build a config of ``kind`` from string values keyed by field name."""
    if kind not in SECTIONS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(SECTIONS)}")
    cls = SECTIONS[kind]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    merged = {_ALIASES.get(k, k): v for k, v in values.items()}
    merged.update({_ALIASES.get(k, k): v for k, v in (overrides or {}).items()})
    kwargs = {}
    garch_kwargs = {}
    for key, raw in merged.items():
        if kind == "dynamic" and key in _GARCH_KEYS:
            try:
                garch_kwargs[key] = float(raw)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {raw!r}") from None
            continue
        if key not in fields or key == "garch":
            raise ConfigError(f"{key}: unknown field for [{kind}]; valid fields are "
                              f"{', '.join(sorted(set(fields) - {'garch'} | (set(_GARCH_KEYS) if kind == 'dynamic' else set())))}")
        f = fields[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        kwargs[key] = _parse_value(key, str(raw), default)
    if garch_kwargs:
        nu = garch_kwargs.pop("nu", 5.06)
        try:
            garch_kwargs["innovation"] = LossModel.student_t(nu)
            kwargs["garch"] = GarchParams(**garch_kwargs)
        except BacktestError as exc:
            raise ConfigError(f"garch parameters: {exc}") from None
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except BacktestError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: dict | None = None):
    """Read an INI file holding exactly one experiment section.

    Returns ``(kind, config)``.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    sections = [s for s in parser.sections() if s in SECTIONS]
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"{path}: unknown section [{unknown[0]}]; expected one of {', '.join(SECTIONS)}")
    if len(sections) != 1:
        raise ConfigError(f"{path}: expected exactly one experiment section, found {len(sections)}")
    kind = sections[0]
    return kind, config_from_mapping(kind, dict(parser[kind]), overrides)


def _fmt_value(v):
    if isinstance(v, LossModel):
        if v.family is Family.SKEWED_T and v.gamma != 1.2:
            return f"st:{v.nu:g}:{v.gamma:g}"
        return v.label
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def config_to_mapping(config) -> dict:
    """Inverse of :func:`config_from_mapping` (string values)."""
    out = {}
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if isinstance(v, GarchParams):
            out.update(alpha0=repr(v.alpha0), alpha1=repr(v.alpha1), beta1=repr(v.beta1), nu=repr(v.innovation.nu))
        else:
            out[f.name] = _fmt_value(v)
    return out


def kind_of(config) -> str:
    for k, cls in SECTIONS.items():
        if isinstance(config, cls):
            return k
    raise ConfigError(f"not an experiment config: {type(config).__name__}")

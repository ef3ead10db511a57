"""Monte Carlo size/power studies and rolling backtest experiments.

Each replication draws from its own stream ``stream(master_seed, rep, ...)``
and returns integer tallies, so the totals do not depend on how replications
are distributed over worker processes.
"""

from __future__ import annotations

import functools
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..distributions import Family, LossModel
from ..errors import BacktestError
from ..exceptions import CellCounts, LevelGrid, count_cells
from ..mtest import Sided, binomial_lrt, binomial_score_test, binomial_wald_test, multinomial_lrt, nass_test, pearson_test
from ..rng import stream
from .config import BINOMIAL_TESTS, DynamicBacktestConfig, SizePowerConfig, StaticBacktestConfig, config_to_mapping
from .forecasters import QUANTILE_RULE, ForecasterFailure, make_forecaster, rolling_forecasts
from .garch import garch_simulate
from .report import ExperimentReport, ReportRow

_MULTINOMIAL = {"pearson": pearson_test, "nass": nass_test, "lrt": multinomial_lrt}
_BINOMIAL = {
    "score": binomial_score_test,
    "wald": binomial_wald_test,
    "lrt": binomial_lrt,
}


def run_test(name: str, counts: CellCounts, grid: LevelGrid):
    """Run one named test; binomial names (``score_1s`` ...) use the exceptions of ``alpha``."""
    if name in _MULTINOMIAL:
        return _MULTINOMIAL[name](counts, grid)
    kind, side = name.split("_")
    sided = Sided.ONE if side == "1s" else Sided.TWO
    return _BINOMIAL[kind](counts.exceptions, counts.n, grid.alpha, sided)


def _levels_plan(alphas, levels):
    """Union of all grid levels, and the union columns of each ``(alpha, N)`` grid."""
    keyed = {}
    for a in alphas:
        for N in levels:
            for u in LevelGrid(a, N).levels:
                keyed.setdefault(round(float(u), 12), float(u))
    union = np.array(sorted(keyed.values()))
    pos = {round(float(u), 12): i for i, u in enumerate(union)}
    cols = {(a, N): np.array([pos[round(float(u), 12)] for u in LevelGrid(a, N).levels])
            for a in alphas for N in levels}
    return union, cols


def _cells(config):
    """``(alpha, N, test)`` triples; binomial tests appear once per alpha at N = 1."""
    out = []
    for a in config.alphas:
        for t in config.tests:
            if t in BINOMIAL_TESTS:
                out.append((a, 1, t))
            else:
                out.extend((a, N, t) for N in config.levels)
    return out


def _grid_for(alpha, N, test):
    return LevelGrid(alpha, 1 if test in BINOMIAL_TESTS else N)


def _tally(counts_by_grid, config, key_prefix, out):
    """Run every test on the counts and add ``(valid, reject)`` to ``out``."""
    for a, N, t in _cells(config):
        counts = counts_by_grid[(a, N)] if t not in BINOMIAL_TESTS else counts_by_grid[(a, "binomial")]
        entry = out[key_prefix + (a, N, t)]
        try:
            res = run_test(t, counts, _grid_for(a, N, t))
        except BacktestError:
            continue  # a failed test is not a valid replication for this cell
        entry[0] += 1
        entry[1] += int(res.reject(config.kappa))


def _map(worker, reps, threads):
    if threads is None or threads <= 1:
        return [worker(r) for r in range(reps)]
    chunk = max(1, reps // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(reps), chunksize=chunk))


def _merge(results):
    total = defaultdict(lambda: [0, 0])
    dropped = defaultdict(int)
    refit_failures = defaultdict(int)
    for tallies, drops, fails in results:
        for k, (v, r) in tallies.items():
            total[k][0] += v
            total[k][1] += r
        for k, v in drops.items():
            dropped[k] += v
        for k, v in fails.items():
            refit_failures[k] += v
    return total, dropped, refit_failures


def _model_key(model: LossModel) -> str:
    return model.label


# --------------------------------------------------------------------------
# size and power
# --------------------------------------------------------------------------

def _size_power_rep(config: SizePowerConfig, thresholds, rep: int):
    tallies = defaultdict(lambda: [0, 0])
    for G in config.true_models:
        for n in config.sample_sizes:
            rng = stream(config.master_seed, rep, "size_power", _model_key(G), n)
            x = np.sort(G.sample(rng, n))
            by_grid = {}
            for a in config.alphas:
                for N in config.levels:
                    # exceedances of each level, then cell j = exactly j breaches
                    exceed = n - np.searchsorted(x, thresholds[(a, N)], side="right")
                    e = np.concatenate(([n], exceed, [0]))
                    by_grid[(a, N)] = CellCounts(tuple(int(v) for v in e[:-1] - e[1:]))
                first = n - int(np.searchsorted(x, thresholds[(a, "binomial")][0], side="right"))
                by_grid[(a, "binomial")] = CellCounts((n - first, first))
            _tally(by_grid, config, (G.label, n), tallies)
    return dict(tallies), {}, {}


def run_size_power(config: SizePowerConfig, threads: int = 1) -> ExperimentReport:
    """Rejection rates of each test when losses from G are backtested against F's quantiles."""
    start = time.perf_counter()
    F = config.reference_model
    thresholds = {}
    for a in config.alphas:
        for N in config.levels:
            thresholds[(a, N)] = F.quantile(LevelGrid(a, N).levels)
        thresholds[(a, "binomial")] = F.quantile(LevelGrid(a, 1).levels)
    worker = functools.partial(_size_power_rep, config, thresholds)
    total, _, _ = _merge(_map(worker, config.replications, threads))
    rows = []
    for G in config.true_models:
        judgement = "size" if G == F else "power"
        for n in config.sample_sizes:
            for a, N, t in _cells(config):
                v, r = total.get((G.label, n, a, N, t), (0, 0))
                rows.append(ReportRow("size_power", G.label, "", None, n, a, N, t,
                                      config.replications, v, r, judgement))
    meta = {
        "master_seed": config.master_seed,
        "replications": config.replications,
        "reference_model": F.label,
        "kappa": config.kappa,
        "p_value_reference": {t: P_VALUE_REFERENCE[t] for t in config.tests},
        "config": config_to_mapping(config),
    }
    return ExperimentReport("size_power", rows, meta, time.perf_counter() - start)


# --------------------------------------------------------------------------
# rolling backtests
# --------------------------------------------------------------------------

def _backtest_panels(config, forecasters, data, window, union, cols, key_prefix, tallies, dropped, fails):
    n = config.n
    losses = data[window:window + n]
    for name, fc in forecasters:
        if fc is None:
            continue
        try:
            panel, nfail = rolling_forecasts(fc, data, window, n, config.stride, union)
        except ForecasterFailure:
            dropped[key_prefix + (name,)] += 1
            continue
        if nfail:
            fails[key_prefix + (name,)] += nfail
        by_grid = {}
        for a in config.alphas:
            for N in config.levels:
                by_grid[(a, N)] = count_cells(losses, panel[:, cols[(a, N)]])
            first = by_grid[(a, config.levels[0])]
            by_grid[(a, "binomial")] = CellCounts((first.counts[0], first.n - first.counts[0]))
        _tally(by_grid, config, key_prefix + (name,), tallies)


def _static_rep(config: StaticBacktestConfig, union, cols, rep: int):
    tallies = defaultdict(lambda: [0, 0])
    dropped = defaultdict(int)
    fails = defaultdict(int)
    for G in config.true_models:
        for window in config.windows:
            rng = stream(config.master_seed, rep, "static", _model_key(G), window)
            data = G.sample(rng, window + config.n)
            fcs = []
            for name in config.forecasters:
                if name == "poor" and G.family is Family.NORMAL:
                    fcs.append((name, None))
                else:
                    fcs.append((name, make_forecaster(name, model=G)))
            _backtest_panels(config, fcs, data, window, union, cols, (G.label, window), tallies, dropped, fails)
    return dict(tallies), dict(dropped), dict(fails)


def static_judgement(forecaster: str, model: LossModel, window: int) -> str:
    """Size for the oracle and good modeller, power for the poor modeller.

    The industry modeller is judged by power below a 500-point window and by
    size from 500 points on, a convention rather than a statistical fact.
    """
    if forecaster in ("oracle", "good"):
        return "size"
    if forecaster == "poor":
        return "NA" if model.family is Family.NORMAL else "power"
    return "power" if window < 500 else "size"


P_VALUE_REFERENCE = {
    "pearson": "chi2",
    "nass": "chi2 (real df)",
    "lrt": "chi2",
    "score_1s": "normal",
    "score_2s": "normal",
    "wald_1s": "normal",
    "wald_2s": "normal",
    "lrt_1s": "binomial-exact",
    "lrt_2s": "chi2",
}


def _meta(config, dropped, fails):
    return {
        "master_seed": config.master_seed,
        "p_value_reference": {t: P_VALUE_REFERENCE[t] for t in config.tests},
        "replications": config.replications,
        "kappa": config.kappa,
        "quantile_rule": QUANTILE_RULE,
        "dropped_replications": {"/".join(map(str, k)): v for k, v in sorted(dropped.items())} or "none",
        "failed_refits_reusing_previous_fit": {"/".join(map(str, k)): v for k, v in sorted(fails.items())} or "none",
        "config": config_to_mapping(config),
    }


def run_static_backtest(config: StaticBacktestConfig, threads: int = 1) -> ExperimentReport:
    """Rolling backtests of iid losses for the oracle, good, poor and industry modellers."""
    start = time.perf_counter()
    union, cols = _levels_plan(config.alphas, config.levels)
    worker = functools.partial(_static_rep, config, union, cols)
    total, dropped, fails = _merge(_map(worker, config.replications, threads))
    rows = []
    for window in config.windows:
        for G in config.true_models:
            for name in config.forecasters:
                judgement = static_judgement(name, G, window)
                for a, N, t in _cells(config):
                    v, r = total.get((G.label, window, name, a, N, t), (0, 0))
                    rows.append(ReportRow("static", G.label, name, window, config.n, a, N, t,
                                          config.replications, v, r, judgement))
    return ExperimentReport("static", rows, _meta(config, dropped, fails), time.perf_counter() - start)


DYNAMIC_SIZE = ("oracle", "garch.t", "garch.hs")


def _dynamic_rep(config: DynamicBacktestConfig, union, cols, rep: int):
    tallies = defaultdict(lambda: [0, 0])
    dropped = defaultdict(int)
    fails = defaultdict(int)
    for window in config.windows:
        rng = stream(config.master_seed, rep, "dynamic", window)
        data, sigma = garch_simulate(config.garch, window + config.n, config.burn_in, rng)
        fcs = [(name, make_forecaster(name, garch=config.garch, sigma=sigma)) for name in config.forecasters]
        _backtest_panels(config, fcs, data, window, union, cols, ("GARCH", window), tallies, dropped, fails)
    return dict(tallies), dict(dropped), dict(fails)


def run_dynamic_backtest(config: DynamicBacktestConfig, threads: int = 1) -> ExperimentReport:
    """Rolling backtests of GARCH(1,1) losses for the dynamic forecasters."""
    start = time.perf_counter()
    union, cols = _levels_plan(config.alphas, config.levels)
    worker = functools.partial(_dynamic_rep, config, union, cols)
    total, dropped, fails = _merge(_map(worker, config.replications, threads))
    rows = []
    for window in config.windows:
        for name in config.forecasters:
            judgement = "size" if name in DYNAMIC_SIZE else "power"
            for a, N, t in _cells(config):
                v, r = total.get(("GARCH", window, name, a, N, t), (0, 0))
                rows.append(ReportRow("dynamic", "GARCH", name, window, config.n, a, N, t,
                                      config.replications, v, r, judgement))
    return ExperimentReport("dynamic", rows, _meta(config, dropped, fails), time.perf_counter() - start)


def run_experiment(config, threads: int = 1) -> ExperimentReport:
    if isinstance(config, SizePowerConfig):
        return run_size_power(config, threads)
    if isinstance(config, StaticBacktestConfig):
        return run_static_backtest(config, threads)
    if isinstance(config, DynamicBacktestConfig):
        return run_dynamic_backtest(config, threads)
    raise TypeError(f"not an experiment config: {type(config).__name__}")

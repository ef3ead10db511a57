import math

import numpy as np
import pytest

from varbacktest.distributions import LossModel
from varbacktest.errors import ConfigError, DegenerateError, DomainError, InsufficientData
from varbacktest.exceptions import LevelGrid
from varbacktest.rng import stream
from varbacktest.sim import (
    DynamicBacktestConfig,
    ExperimentReport,
    GarchParams,
    SizePowerConfig,
    StaticBacktestConfig,
    config_from_mapping,
    config_to_mapping,
    empirical_quantile,
    forecast_quantiles,
    garch_fit,
    garch_simulate,
    garch_variance,
    judge_colour,
    load_config,
    make_forecaster,
    preset_names,
    preset_path,
    rolling_forecasts,
    run_dynamic_backtest,
    run_size_power,
    run_static_backtest,
)
from varbacktest.sim.experiments import static_judgement
from varbacktest.sim.forecasters import Forecaster, ForecasterFailure
from varbacktest.sim.report import read_report_csv

NORMAL_GARCH = GarchParams(1e-5, 0.1, 0.85, LossModel.normal())


# rng --------------------------------------------------------------------------

def test_streams_are_pure_functions_of_key():
    a = stream(7, 3, "static", "t5").normal(size=5)
    b = stream(7, 3, "static", "t5").normal(size=5)
    c = stream(7, 4, "static", "t5").normal(size=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# GARCH ------------------------------------------------------------------------

def test_garch_without_dynamics_is_iid():
    p = GarchParams(0.25, 0.0, 0.0, LossModel.normal())
    losses, sigma = garch_simulate(p, 20000, burn_in=0, rng=np.random.default_rng(1))
    assert np.all(sigma == 0.5)
    assert losses.std() == pytest.approx(0.5, rel=0.02)
    assert abs(np.corrcoef(losses[1:] ** 2, losses[:-1] ** 2)[0, 1]) < 0.03


def test_garch_long_run_variance_and_positivity():
    losses, sigma = garch_simulate(NORMAL_GARCH, 200_000, rng=np.random.default_rng(2))
    assert np.all(sigma > 0)
    assert NORMAL_GARCH.long_run_variance == pytest.approx(2e-4)
    assert np.mean(losses ** 2) == pytest.approx(2e-4, rel=0.05)


def test_variance_filter_reproduces_simulated_path():
    losses, sigma = garch_simulate(NORMAL_GARCH, 500, rng=np.random.default_rng(3))
    s2 = garch_variance(losses, 1e-5, 0.1, 0.85, sigma[0] ** 2)
    assert np.allclose(np.sqrt(s2[:-1]), sigma, rtol=1e-12)
    assert s2[-1] == pytest.approx(1e-5 + 0.1 * losses[-1] ** 2 + 0.85 * sigma[-1] ** 2)


def test_garch_params_validation():
    with pytest.raises(DomainError):
        GarchParams(1e-6, 0.5, 0.5)
    with pytest.raises(DomainError):
        GarchParams(0.0, 0.1, 0.8)


def test_garch_fit_recovers_parameters():
    losses, _ = garch_simulate(NORMAL_GARCH, 20000, rng=np.random.default_rng(4))
    fit = garch_fit(losses)
    assert fit.alpha1 == pytest.approx(0.1, abs=0.02)
    assert fit.beta1 == pytest.approx(0.85, abs=0.03)
    assert fit.omega == pytest.approx(1e-5, rel=0.3)
    assert not fit.near_integrated


def test_garch_t_fit_estimates_degrees_of_freedom():
    p = GarchParams(1e-5, 0.1, 0.85, LossModel.student_t(5))
    losses, _ = garch_simulate(p, 20000, rng=np.random.default_rng(5))
    fit = garch_fit(losses, "t")
    assert fit.nu == pytest.approx(5, abs=1.0)
    assert fit.innovation_model.nu == fit.nu


def test_arch_fit_finds_dependence():
    losses, _ = garch_simulate(GarchParams(1e-4, 0.4, 0.0, LossModel.normal()), 5000, rng=np.random.default_rng(6))
    fit = garch_fit(losses, spec="arch1")
    assert fit.beta1 == 0.0
    assert fit.alpha1 == pytest.approx(0.4, abs=0.08)


def test_garch_fit_warm_start_matches_cold_start():
    losses, _ = garch_simulate(NORMAL_GARCH, 1000, rng=np.random.default_rng(7))
    cold = garch_fit(losses)
    warm = garch_fit(losses, start=cold)
    assert warm.loglik == pytest.approx(cold.loglik, abs=1e-4)


def test_garch_fit_errors():
    with pytest.raises(DegenerateError):
        garch_fit(np.full(300, 0.01))
    with pytest.raises(InsufficientData):
        garch_fit(np.ones(100))
    with pytest.raises(DomainError):
        garch_fit(np.ones(300), spec="egarch")


# forecasters ------------------------------------------------------------------

def test_empirical_quantile_rule():
    assert empirical_quantile(np.arange(1, 501), 0.99)[0] == 495
    assert empirical_quantile(np.arange(1, 251), 0.975)[0] == 244
    with pytest.raises(InsufficientData):
        empirical_quantile([1.0], [0.9, 0.95])


def test_static_oracle_quantiles():
    q = forecast_quantiles("oracle", np.zeros(10), LevelGrid(0.975, 1), model=LossModel.normal())
    assert q[0] == pytest.approx(1.959964, abs=1e-6)


def test_good_modeller_recovers_t_quantile():
    m = LossModel.student_t(4)
    x = m.sample(np.random.default_rng(8), 20000)
    q = forecast_quantiles("good", x, LevelGrid(0.975, 4), model=m)
    assert np.allclose(q, m.quantile(LevelGrid(0.975, 4).levels), rtol=0.05)


def test_poor_modeller_is_normal_fit():
    x = np.random.default_rng(9).normal(1.0, 2.0, size=1000)
    q = forecast_quantiles("poor", x, [0.975])
    assert q[0] == pytest.approx(x.mean() + x.std(ddof=1) * 1.959964, rel=1e-6)


def test_filtered_hs_rescales_residual_quantiles():
    losses, _ = garch_simulate(NORMAL_GARCH, 1200, rng=np.random.default_rng(10))
    f = make_forecaster("garch.hs")
    window = losses[:1000]
    fit, resid = f.fit(window)
    s0 = float(np.mean(window ** 2))
    sd = np.sqrt(fit.variance(window, s0))
    assert np.allclose(resid * sd[:-1], window)
    row = f.predict((fit, resid), losses, 1000, 1000, 1, [0.99])[0]
    assert row[0] == pytest.approx(sd[-1] * empirical_quantile(resid, 0.99)[0], rel=1e-12)


def test_garch_forecaster_uses_one_step_variance():
    losses, _ = garch_simulate(NORMAL_GARCH, 1100, rng=np.random.default_rng(11))
    f = make_forecaster("garch.norm")
    state = f.fit(losses[:1000])
    rows = f.predict(state, losses, 1000, 1000, 5, [0.975])
    s2 = state.variance(losses[:1004], float(np.mean(losses[:1000] ** 2)))
    assert np.allclose(rows[:, 0], np.sqrt(s2[1000:1005]) * 1.959964, rtol=1e-6)


class _Flaky(Forecaster):
    name = "flaky"

    def __init__(self, fail_on):
        self.fail_on = set(fail_on)
        self.calls = 0

    def fit(self, window, previous=None):
        self.calls += 1
        if self.calls in self.fail_on:
            raise DegenerateError("boom")
        return float(window[-1])

    def predict(self, state, data, t0, window, steps, levels):
        return np.full((steps, len(levels)), state)


def test_failed_refit_reuses_previous_state():
    data = np.arange(100.0)
    panel, failures = rolling_forecasts(_Flaky({2}), data, 10, 30, 10, [0.9])
    assert failures == 1
    assert panel[:20, 0].tolist() == [9.0] * 20
    assert panel[20:, 0].tolist() == [29.0] * 10


def test_failed_first_fit_drops_replication():
    with pytest.raises(ForecasterFailure):
        rolling_forecasts(_Flaky({1}), np.arange(100.0), 10, 30, 10, [0.9])


def test_unknown_forecaster_lists_names():
    with pytest.raises(DomainError, match="garch.hs"):
        make_forecaster("ewma")


# configs ----------------------------------------------------------------------

def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match="replications"):
        SizePowerConfig(replications=0)
    with pytest.raises(ConfigError, match="tests.*pearson"):
        SizePowerConfig(tests=("chi2",))
    with pytest.raises(ConfigError, match="forecasters.*industry"):
        StaticBacktestConfig(forecasters=("garch.t",))
    with pytest.raises(ConfigError, match="windows"):
        DynamicBacktestConfig(windows=(100,))


def test_config_mapping_round_trip():
    cfg = config_from_mapping("static", {"true_models": "t5, st:4:1.5", "window": "250", "replications": "3"})
    assert cfg.windows == (250,)
    assert cfg.true_models[1] == LossModel.skewed_t(4, 1.5)
    again = config_from_mapping("static", config_to_mapping(cfg))
    assert again == cfg


def test_load_config_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[dynamic]\nalpha1 = 0.2\nbeta1 = 0.7\nnu = 6\nreplications = 2\nunknown_key = 1\n")
    with pytest.raises(ConfigError, match="unknown_key"):
        load_config(path)
    path.write_text("[dynamic]\nalpha1 = 0.2\nbeta1 = 0.7\nnu = 6\nreplications = 2\n")
    kind, cfg = load_config(path, {"replications": 5})
    assert kind == "dynamic"
    assert cfg.garch.alpha1 == 0.2 and cfg.garch.innovation.nu == 6
    assert cfg.replications == 5


def test_presets_parse():
    names = preset_names()
    assert {"table3_reduced", "table5_full"} <= set(names)
    for name in names:
        kind, cfg = load_config(preset_path(name))
        assert cfg.replications >= 1
    with pytest.raises(ConfigError, match="table3_reduced"):
        preset_path("table9")


# experiments ------------------------------------------------------------------

def _small_size_power(**kw):
    base = dict(true_models=(LossModel.normal(), LossModel.student_t(3)), levels=(1, 4), sample_sizes=(250,),
                replications=40, master_seed=3)
    base.update(kw)
    return SizePowerConfig(**base)


def test_size_power_is_independent_of_threads():
    a = run_size_power(_small_size_power(), threads=1)
    b = run_size_power(_small_size_power(), threads=2)
    assert a.to_csv() == b.to_csv()


def test_size_power_report_contents():
    rep = run_size_power(_small_size_power(tests=("pearson", "score_1s")))
    assert rep.metadata["master_seed"] == 3
    assert rep.lookup(test="pearson", N=4, model="t3").valid == 40
    # binomial tests appear once per alpha at N = 1
    assert len([r for r in rep.rows if r.test == "score_1s"]) == 2
    parsed = read_report_csv(rep.to_csv())
    assert len(parsed) == len(rep.rows)


def test_static_backtest_small_run():
    cfg = StaticBacktestConfig(true_models=(LossModel.student_t(5),), levels=(4,), n=200, windows=(250,),
                               stride=50, replications=3, master_seed=4)
    rep = run_static_backtest(cfg)
    assert {r.forecaster for r in rep.rows} == {"oracle", "good", "poor", "industry"}
    assert all(r.valid == 3 for r in rep.rows)


def test_static_poor_is_na_under_normal():
    cfg = StaticBacktestConfig(levels=(2,), n=100, windows=(250,), stride=50, replications=2,
                               forecasters=("poor", "oracle"), tests=("pearson",))
    rep = run_static_backtest(cfg)
    poor = rep.lookup(test="pearson", N=2, forecaster="poor")
    assert poor.colour == "NA" and math.isnan(poor.rate)


def test_dynamic_backtest_deterministic_across_threads():
    cfg = DynamicBacktestConfig(levels=(2,), n=60, windows=(250,), stride=30, burn_in=100, replications=2,
                                forecasters=("oracle", "garch.norm", "hs"), tests=("pearson",), master_seed=5)
    a = run_dynamic_backtest(cfg, threads=1)
    b = run_dynamic_backtest(cfg, threads=2)
    assert a.to_csv() == b.to_csv()


# reports and judgements -------------------------------------------------------

@pytest.mark.parametrize("rate,judgement,colour", [
    (5.0, "size", "green"), (7.5, "size", ""), (9.0, "size", "red"), (12.5, "size", "darkred"),
    (75.0, "power", "green"), (50.0, "power", ""), (30.0, "power", "red"), (8.0, "power", "darkred"),
    (float("nan"), "NA", "NA"),
])
def test_colour_scheme(rate, judgement, colour):
    assert judge_colour(rate, judgement) == colour


def test_static_judgements():
    assert static_judgement("oracle", LossModel.student_t(3), 250) == "size"
    assert static_judgement("poor", LossModel.student_t(3), 250) == "power"
    assert static_judgement("poor", LossModel.normal(), 250) == "NA"
    assert static_judgement("industry", LossModel.student_t(3), 250) == "power"
    assert static_judgement("industry", LossModel.student_t(3), 500) == "size"


def test_report_write(tmp_path):
    rep = run_size_power(_small_size_power(replications=5, tests=("pearson",)))
    paths = rep.write(tmp_path, "demo")
    assert isinstance(rep, ExperimentReport)
    assert set(paths) == {"csv", "table", "summary"}
    assert "pearson N=4" in (tmp_path / "demo_table.csv").read_text().splitlines()[0]

import json

import numpy as np
import pytest
from scipy import stats

from varbacktest.cli import (
    EXIT_CONVERGENCE,
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_PARSE,
    ReportDocument,
    backtest_report,
    exit_code_for,
    main,
    read_losses,
    split_periods,
)
from varbacktest.errors import ConvergenceError, DegenerateError, ParseError
from varbacktest.exceptions import LevelGrid
from varbacktest.mtest import Sided, binomial_score_test


def _write_pair(tmp_path, losses, panel, var99=None, dates=None):
    lp, fp = tmp_path / "losses.csv", tmp_path / "forecasts.csv"
    head = "date,loss\n" if dates is not None else "loss\n"
    lines = [f"{d},{float(x)!r}" if dates is not None else repr(float(x)) for x, d in
             zip(losses, dates if dates is not None else losses)]
    lp.write_text(head + "\n".join(lines) + "\n")
    cols = [f"var{j}" for j in range(panel.shape[1])] + (["var99"] if var99 is not None else [])
    rows = []
    for i, row in enumerate(panel):
        vals = [repr(float(v)) for v in row] + ([repr(float(var99[i]))] if var99 is not None else [])
        rows.append(",".join(vals))
    fp.write_text(",".join(cols) + "\n" + "\n".join(rows) + "\n")
    return str(lp), str(fp)


def test_zero_exceptions(tmp_path, capsys):
    n = 300
    losses = np.linspace(-1, 1, n)
    panel = np.tile([5.0, 6.0, 7.0, 8.0], (n, 1))
    lp, fp = _write_pair(tmp_path, losses, panel, var99=np.full(n, 6.5))
    out = tmp_path / "r.csv"
    assert main(["test", "--losses", lp, "--forecasts", fp, "--tests", "pearson,nass,lrt", "--csv", str(out)]) == EXIT_OK
    doc = ReportDocument.from_csv(out.read_text())
    row = doc.rows[-1]
    assert row.label == "All"
    assert row.B == 0
    assert row.counts == (n, 0, 0, 0, 0)
    assert row.p_B == pytest.approx(binomial_score_test(0, n, 0.99, Sided.ONE).p_value)
    assert row.colour_B == "green"
    assert "n(1-alpha)/N" in capsys.readouterr().out


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    n = 2500
    losses = rng.normal(size=n)
    grid = LevelGrid(0.975, 4)
    panel = np.tile(stats.norm.ppf(grid.levels), (n, 1))
    doc = backtest_report(losses, panel, grid, ("pearson", "nass", "lrt"), var99=np.full(n, 2.326))
    assert len(doc.rows) == 4  # three 1000-row blocks plus the whole sample
    again = ReportDocument.from_csv(doc.to_csv())
    assert again == doc
    assert again.to_csv() == doc.to_csv()


def test_json_output(tmp_path):
    n = 500
    losses = np.random.default_rng(2).normal(size=n)
    lp, fp = _write_pair(tmp_path, losses, np.tile(stats.norm.ppf(LevelGrid(0.975, 2).levels), (n, 1)))
    jp = tmp_path / "r.json"
    assert main(["test", "--losses", lp, "--forecasts", fp, "--json", str(jp)]) == EXIT_OK
    data = json.loads(jp.read_text())
    assert data["N"] == 2 and data["rows"][0]["n"] == n
    assert set(data["rows"][0]["tests"]) == {"lrt"}
    assert data["expected_tail_cell"] == pytest.approx(n * 0.025 / 2)


def test_null_model_p_values_look_uniform():
    grid = LevelGrid(0.975, 4)
    q = np.tile(stats.norm.ppf(grid.levels), (1000, 1))
    ps = []
    for seed in range(300):
        losses = np.random.default_rng(100 + seed).normal(size=1000)
        ps.append(backtest_report(losses, q, grid, ("nass",)).rows[0].p_values[0])
    ps = np.array(ps)
    assert 0.44 < ps.mean() < 0.56
    assert 0.02 < np.mean(ps < 0.05) < 0.09


def test_expected_tail_cell_formula():
    grid = LevelGrid(0.975, 8)
    n = 1000
    doc = backtest_report(np.zeros(n), np.tile(np.arange(1.0, 9.0), (n, 1)), grid, ("pearson",))
    assert doc.expected_tail_cell == pytest.approx(25 / 8)


def test_period_splitting_by_calendar_years():
    import datetime as dt

    dates = [dt.date(2000, 1, 1) + dt.timedelta(days=i) for i in range(0, 365 * 9, 3)]
    blocks = split_periods(len(dates), dates, years=4)
    assert [b[0] for b in blocks] == ["2000-2003", "2004-2007", "2008-2008"]
    assert blocks[-1][2] == len(dates)
    assert split_periods(2500, rows=1000)[-1] == ("2001-2500", 2000, 2500)


def test_generated_forecasts(tmp_path, capsys):
    losses = np.random.default_rng(3).standard_t(5, size=800) * 0.01
    lp = tmp_path / "l.csv"
    lp.write_text("loss\n" + "\n".join(repr(float(x)) for x in losses) + "\n")
    code = main(["test", "--losses", str(lp), "--forecaster", "hs", "--window", "250", "--levels", "4",
                 "--tests", "pearson,lrt"])
    assert code == EXIT_OK
    assert "All" in capsys.readouterr().out


def test_returns_flag_negates(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("date,ret\n2020-01-02,0.01\n2020-01-03,-0.02\n")
    losses, dates = read_losses(str(p), returns=True)
    assert losses.tolist() == [-0.01, 0.02]
    assert dates[1].day == 3


def test_parse_error_names_the_line(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("loss\n0.1\nabc\n")
    with pytest.raises(ParseError, match=":3:"):
        read_losses(str(p))
    assert main(["test", "--losses", str(p), "--forecaster", "hs", "--window", "250"]) == EXIT_PARSE
    assert "bad.csv:3" in capsys.readouterr().err


def test_domain_error_exit_code(tmp_path):
    lp, fp = _write_pair(tmp_path, [0.1, 0.2], np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert main(["test", "--losses", lp, "--forecasts", fp]) == EXIT_DOMAIN


def test_exit_code_mapping():
    assert exit_code_for(ConvergenceError("x")) == EXIT_CONVERGENCE
    assert exit_code_for(DegenerateError("x")) == EXIT_DOMAIN
    assert exit_code_for(ParseError("x")) == EXIT_PARSE
    assert len({EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_CONVERGENCE}) == 4


@pytest.mark.parametrize("B,colour", [(4, "green"), (5, "yellow"), (9, "yellow"), (10, "red")])
def test_traffic_basel(B, colour, capsys):
    assert main(["traffic", "--B", str(B), "--json"]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["colour"] == colour
    assert info["yellow_threshold"] == 0.95 and info["red_threshold"] == 0.9999


def test_traffic_null_perfect_counts(capsys):
    assert main(["traffic", "--counts", "975,13,12", "--test", "nass", "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["colour"] == "green"


def test_traffic_needs_one_mode():
    assert main(["traffic", "--B", "3", "--pvalue", "0.2"]) == EXIT_PARSE
    assert main(["traffic", "--statistic", "3.0"]) == EXIT_PARSE


def test_grid_command(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["grid", "--n", "50", "--out", str(out)]) == EXIT_OK
    assert out.read_text().startswith("O1,O2,colour\n")


def test_simulate_preset_structure(tmp_path, capsys):
    code = main(["simulate", "--preset", "table3_reduced", "--replications", "3", "--out", str(tmp_path)])
    assert code == EXIT_OK
    header = (tmp_path / "table3_reduced_table.csv").read_text().splitlines()[0].split(",")
    for test in ("pearson", "nass", "lrt"):
        for N in (1, 2, 4, 8, 16, 32, 64):
            assert f"{test} N={N}" in header


def test_simulate_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--preset", "table2_reduced", "--replications", "20", "--seed", "9"]
    assert main(args + ["--threads", "1", "--out", str(a)]) == EXIT_OK
    assert main(args + ["--threads", "2", "--out", str(b)]) == EXIT_OK
    for name in ("table2_reduced.csv", "table2_reduced_table.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_bad_config(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[static]\nforecasters = good, ewma\n")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == EXIT_PARSE
    err = capsys.readouterr().err
    assert "forecasters" in err and "industry" in err

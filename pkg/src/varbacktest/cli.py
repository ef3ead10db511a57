"""Command-line front end.

Commands
--------
``test``      backtest a loss series against VaR forecasts (read or generated)
``simulate``  run a size/power, static or dynamic experiment from a config
``traffic``   traffic-light colour of a count, a statistic or a p-value
``grid``      trinomial traffic-light grid for N = 2 as CSV

Exit codes: 0 success, 1 unexpected failure, 2 unreadable input or invalid
configuration, 3 domain error (invalid values, degenerate statistics),
4 numerical convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import (BacktestError, ConfigError, ConvergenceError, DegenerateError, DomainError, LengthMismatch,
                     ParseError)
from .exceptions import CellCounts, LevelGrid, VarForecastPanel, count_cells
from .mtest import Sided, binomial_score_test, multinomial_lrt, nass_test, pearson_test
from .traffic import (Colour, basel_light, light_from_pvalue, light_from_result, light_from_statistic,
                      trinomial_light_grid, write_grid_csv)

EXIT_OK, EXIT_OTHER, EXIT_PARSE, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 1, 2, 3, 4

TESTS = {"pearson": pearson_test, "nass": nass_test, "lrt": multinomial_lrt}
B_LEVEL = 0.99


# --------------------------------------------------------------------------
# input files
# --------------------------------------------------------------------------

def _open_csv(path):
    try:
        text = open(path, newline="").read()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(f"{path}: empty file, a header row is required") from None
    return reader, header


def _parse_float(raw, path, line, column):
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(f"{path}:{line}: cannot parse {raw!r} in column {column!r} as a number") from None
    if not math.isfinite(v):
        raise ParseError(f"{path}:{line}: non-finite value {raw!r} in column {column!r}")
    return v


def _parse_date(raw, path, line):
    try:
        return dt.date.fromisoformat(raw.strip())
    except ValueError:
        raise ParseError(f"{path}:{line}: cannot parse date {raw!r} (expected YYYY-MM-DD)") from None


def read_losses(path, loss_column="loss", date_column="date", returns=False):
    """Losses (positive = loss) and optional dates from a CSV file with a header.

    With ``returns=True`` the column holds log-returns and is negated.
    """
    reader, header = _open_csv(path)
    has_date = date_column in header
    if loss_column in header:
        col = loss_column
    else:
        candidates = [h for h in header if h != date_column]
        if len(candidates) != 1:
            raise ParseError(f"{path}: no column {loss_column!r}; columns are {', '.join(header)}")
        col = candidates[0]
    ci = header.index(col)
    di = header.index(date_column) if has_date else None
    losses, dates = [], []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        line = reader.line_num
        if len(row) != len(header):
            raise ParseError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        losses.append(_parse_float(row[ci], path, line, col))
        if has_date:
            dates.append(_parse_date(row[di], path, line))
    if not losses:
        raise ParseError(f"{path}: no data rows")
    x = np.array(losses)
    return (-x if returns else x), (dates if has_date else None)


def read_forecasts(path, date_column="date"):
    """VaR columns in level order, plus an optional ``var99`` column used for B."""
    reader, header = _open_csv(path)
    cols = [i for i, h in enumerate(header) if h not in (date_column, "var99")]
    i99 = header.index("var99") if "var99" in header else None
    if not cols:
        raise ParseError(f"{path}: no VaR columns found")
    rows, var99 = [], []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        line = reader.line_num
        if len(row) != len(header):
            raise ParseError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        vals = [_parse_float(row[i], path, line, header[i]) for i in cols]
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise DomainError(f"{path}:{line}: VaR forecasts must be nondecreasing across levels")
        rows.append(vals)
        if i99 is not None:
            var99.append(_parse_float(row[i99], path, line, "var99"))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows), (np.array(var99) if i99 is not None else None)


# --------------------------------------------------------------------------
# report document
# --------------------------------------------------------------------------

def _fmt(v):
    return "" if v is None else repr(float(v))


def _unfmt(s):
    return None if s == "" else float(s)


@dataclass(frozen=True)
class PeriodResult:
    """One line of a backtest report."""

    label: str
    n: int
    B: int | None
    p_B: float | None
    counts: tuple
    p_values: tuple  # one per test, None when the test is undefined

    @property
    def colour_B(self) -> str:
        return "" if self.p_B is None else str(light_from_pvalue(self.p_B).colour)

    @property
    def colours(self) -> tuple:
        return tuple("" if p is None else str(light_from_pvalue(p).colour) for p in self.p_values)


@dataclass(frozen=True)
class ReportDocument:
    alpha: float
    N: int
    kappa: float
    tests: tuple
    rows: tuple
    source: dict = field(default_factory=dict, compare=False)

    @property
    def expected_tail_cell(self) -> float:
        """Expected count in each cell above ``alpha`` over the whole sample."""
        return self.rows[-1].n * (1.0 - self.alpha) / self.N

    def header(self) -> list[str]:
        return (["period", "n", "alpha", "kappa", "B", "p_B", "colour_B"]
                + [f"O_{j}" for j in range(self.N + 1)]
                + [c for t in self.tests for c in (f"p_{t}", f"colour_{t}")])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.rows:
            line = [r.label, r.n, repr(self.alpha), repr(self.kappa), "" if r.B is None else r.B, _fmt(r.p_B), r.colour_B]
            line += list(r.counts)
            for p, c in zip(r.p_values, r.colours):
                line += [_fmt(p), c]
            w.writerow(line)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ReportDocument":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        N = sum(1 for h in header if h.startswith("O_")) - 1
        tests = tuple(h[2:] for h in header if h.startswith("p_") and h != "p_B")
        rows, alpha, kappa = [], None, None
        for line in reader:
            rec = dict(zip(header, line))
            alpha, kappa = float(rec["alpha"]), float(rec["kappa"])
            rows.append(PeriodResult(
                rec["period"], int(rec["n"]), None if rec["B"] == "" else int(rec["B"]), _unfmt(rec["p_B"]),
                tuple(int(rec[f"O_{j}"]) for j in range(N + 1)),
                tuple(_unfmt(rec[f"p_{t}"]) for t in tests)))
        return cls(alpha, N, kappa, tests, tuple(rows))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "N": self.N,
            "kappa": self.kappa,
            "tests": list(self.tests),
            "expected_tail_cell": self.expected_tail_cell,
            "source": self.source,
            "rows": [
                {"period": r.label, "n": r.n, "B": r.B, "p_B": r.p_B, "colour_B": r.colour_B,
                 "counts": list(r.counts),
                 "tests": {t: {"p_value": p, "colour": c, "reject": None if p is None else p < self.kappa}
                           for t, p, c in zip(self.tests, r.p_values, r.colours)}}
                for r in self.rows
            ],
        }

    def render_text(self) -> str:
        cols = self.header()
        table = [cols]
        for line in csv.reader(io.StringIO(self.to_csv())):
            if line != cols:
                table.append([_short(v) for v in line])
        widths = [max(len(r[i]) for r in table) for i in range(len(cols))]
        out = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in table]
        out.append(f"expected count per cell above alpha (whole sample): n(1-alpha)/N = {self.expected_tail_cell:.3f}")
        return "\n".join(out) + "\n"


def _short(v):
    try:
        f = float(v)
    except ValueError:
        return v
    if "." in v or "e" in v:
        return f"{f:.4f}"
    return v


def split_periods(n, dates=None, years=4, rows=1000):
    """Contiguous ``(label, start, stop)`` blocks of calendar years or rows."""
    blocks = []
    if dates is not None:
        y0 = dates[0].year
        start = 0
        for i in range(1, n + 1):
            if i == n or (dates[i].year - y0) // years != (dates[start].year - y0) // years:
                blocks.append((f"{dates[start].year}-{dates[i - 1].year}", start, i))
                start = i
    else:
        for start in range(0, n, rows):
            stop = min(start + rows, n)
            blocks.append((f"{start + 1}-{stop}", start, stop))
    return blocks


def backtest_report(losses, panel, grid: LevelGrid, tests, kappa=0.05, var99=None, dates=None,
                    period_years=4, period_rows=1000, source=None) -> ReportDocument:
    """Per-period and whole-sample backtest results."""
    losses = np.asarray(losses, dtype=float)
    panel = VarForecastPanel(panel)
    if panel.N != grid.N:
        raise DomainError(f"forecast panel has {panel.N} columns but N = {grid.N}")
    if losses.size != panel.n:
        raise LengthMismatch(f"{losses.size} losses but {panel.n} forecast rows")
    if var99 is not None and len(var99) != losses.size:
        raise LengthMismatch(f"{losses.size} losses but {len(var99)} var99 values")
    for t in tests:
        if t not in TESTS:
            raise ConfigError(f"tests: unknown test {t!r}; valid tests are {', '.join(TESTS)}")
    blocks = split_periods(losses.size, dates, period_years, period_rows)
    blocks = blocks + [("All", 0, losses.size)] if len(blocks) > 1 else [("All", 0, losses.size)]
    rows = []
    for label, a, b in blocks:
        counts = count_cells(losses[a:b], panel.values[a:b])
        B = p_B = None
        if var99 is not None:
            B = int(np.sum(losses[a:b] > var99[a:b]))
            p_B = binomial_score_test(B, b - a, B_LEVEL, Sided.ONE).p_value
        ps = []
        for t in tests:
            try:
                ps.append(float(TESTS[t](counts, grid).p_value))
            except (DegenerateError, ConvergenceError):
                ps.append(None)
        rows.append(PeriodResult(label, b - a, B, p_B, counts.counts, tuple(ps)))
    return ReportDocument(grid.alpha, grid.N, kappa, tuple(tests), tuple(rows), dict(source or {}))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _split_list(text):
    return [t.strip().lower() for t in text.split(",") if t.strip()]


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_test(args) -> int:
    from .sim.forecasters import make_forecaster, rolling_forecasts

    losses, dates = read_losses(args.losses, args.loss_column, args.date_column, args.returns)
    tests = _split_list(args.tests)
    source = {"losses": args.losses, "returns": bool(args.returns)}
    if args.forecasts:
        values, var99 = read_forecasts(args.forecasts, args.date_column)
        N = args.levels if args.levels is not None else values.shape[1]
        if values.shape[1] != N:
            raise DomainError(f"--levels {N} but the forecast file has {values.shape[1]} VaR columns")
        grid = LevelGrid(args.alpha, N)
        source["forecasts"] = args.forecasts
    else:
        if not args.forecaster or args.window is None:
            raise ConfigError("either --forecasts or both --forecaster and --window are required")
        name = {"normal": "poor"}.get(args.forecaster.lower(), args.forecaster.lower())
        if name in ("oracle", "good"):
            raise ConfigError(f"forecaster {args.forecaster!r} needs a known true model; use a file of forecasts")
        grid = LevelGrid(args.alpha, args.levels if args.levels is not None else 4)
        levels = np.append(grid.levels, B_LEVEL)
        order = np.argsort(levels, kind="stable")
        fc = make_forecaster(name)
        n = losses.size - args.window
        if n < 1:
            raise DomainError(f"{losses.size} losses leave nothing to backtest after a window of {args.window}")
        panel, _ = rolling_forecasts(fc, losses, args.window, n, args.stride, levels[order])
        unsorted = np.empty_like(panel)
        unsorted[:, order] = panel
        values, var99 = unsorted[:, :-1], unsorted[:, -1]
        losses = losses[args.window:]
        dates = dates[args.window:] if dates is not None else None
        source.update(forecaster=args.forecaster, window=args.window, stride=args.stride)
    doc = backtest_report(losses, values, grid, tests, args.kappa, var99, dates,
                          args.period_years, args.period_rows, source)
    sys.stdout.write(doc.render_text())
    if args.csv:
        _write(args.csv, doc.to_csv())
    if args.json:
        _write(args.json, json.dumps(doc.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .sim import load_config, preset_path, run_experiment

    if bool(args.preset) == bool(args.config):
        raise ConfigError("give exactly one of --preset or --config")
    path = preset_path(args.preset) if args.preset else args.config
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = str(args.replications)
    if args.seed is not None:
        overrides["master_seed"] = str(args.seed)
    kind, config = load_config(path, overrides)
    if args.kind and args.kind != kind:
        raise ConfigError(f"--kind {args.kind} does not match the [{kind}] section of {path}")
    report = run_experiment(config, threads=args.threads)
    stem = args.stem or (args.preset or os.path.splitext(os.path.basename(args.config))[0])
    paths = report.write(args.out, stem)
    sys.stdout.write(report.summary_text())
    for k, p in paths.items():
        print(f"wrote {k}: {p}")
    return EXIT_OK


def _print_light(light, extra=None, as_json=False):
    info = {"colour": str(light.colour), "cdf_value": light.cdf_value,
            "yellow_threshold": light.yellow, "red_threshold": light.red}
    info.update(extra or {})
    if as_json:
        print(json.dumps(info, indent=2))
    else:
        for k, v in info.items():
            print(f"{k}: {v}")


def cmd_traffic(args) -> int:
    modes = [args.B is not None, args.counts is not None, args.statistic is not None, args.pvalue is not None]
    if sum(modes) != 1:
        raise ConfigError("give exactly one of --B, --counts, --statistic or --pvalue")
    if args.B is not None:
        light = basel_light(args.B, args.n, args.level)
        _print_light(light, {"B": args.B, "n": args.n, "level": args.level}, args.json)
    elif args.counts is not None:
        try:
            counts = CellCounts(tuple(int(v) for v in args.counts.split(",")))
        except ValueError:
            raise ParseError(f"--counts: cannot parse {args.counts!r} as comma-separated integers") from None
        test = args.test.lower()
        if test not in TESTS:
            raise ConfigError(f"--test: unknown test {test!r}; valid tests are {', '.join(TESTS)}")
        grid = LevelGrid(args.alpha, counts.N)
        res = TESTS[test](counts, grid)
        light = light_from_result(res)
        _print_light(light, {"test": test, "statistic": res.statistic, "df": res.df, "p_value": res.p_value}, args.json)
    elif args.statistic is not None:
        if args.df is None:
            raise ConfigError("--statistic needs --df")
        _print_light(light_from_statistic(args.statistic, args.df), {"statistic": args.statistic, "df": args.df}, args.json)
    else:
        _print_light(light_from_pvalue(args.pvalue), {"p_value": args.pvalue}, args.json)
    return EXIT_OK


def cmd_grid(args) -> int:
    colours = trinomial_light_grid(args.n, args.alpha, args.test.lower())
    if args.out:
        write_grid_csv(args.out, colours)
        print(f"wrote {args.out}")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["O1", "O2", "colour"])
        for i, j in zip(*np.nonzero(colours >= 0)):
            w.writerow([i, j, str(Colour(int(colours[i, j])))])
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varbacktest", description="Multinomial VaR backtests and traffic lights.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="backtest losses against VaR forecasts")
    t.add_argument("--losses", required=True, help="CSV with a header; losses positive unless --returns")
    t.add_argument("--loss-column", default="loss")
    t.add_argument("--date-column", default="date")
    t.add_argument("--returns", action="store_true", help="the column holds log-returns; negate them")
    t.add_argument("--forecasts", help="CSV of VaR forecasts, one column per level, optional var99 column")
    t.add_argument("--forecaster", help="generate forecasts: hs, normal, garch.t, garch.hs, garch.norm, arch.t, arch.norm")
    t.add_argument("--window", type=int, help="rolling estimation window for --forecaster")
    t.add_argument("--stride", type=int, default=10, help="refit every STRIDE steps (default 10)")
    t.add_argument("--alpha", type=float, default=0.975)
    t.add_argument("--levels", type=int, help="number of levels N (default: forecast columns, or 4)")
    t.add_argument("--tests", default="lrt", help="comma-separated subset of pearson,nass,lrt (default lrt)")
    t.add_argument("--kappa", type=float, default=0.05)
    t.add_argument("--period-years", type=int, default=4, help="period length in calendar years when dates exist")
    t.add_argument("--period-rows", type=int, default=1000, help="period length in rows without dates")
    t.add_argument("--csv", help="write the report as CSV")
    t.add_argument("--json", help="write the report as JSON")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    s.add_argument("--preset", help="shipped preset, e.g. table3_reduced")
    s.add_argument("--config", help="INI config file")
    s.add_argument("--kind", choices=("size_power", "static", "dynamic"), help="assert the experiment kind")
    s.add_argument("--replications", type=int, help="override the replication count")
    s.add_argument("--seed", type=int, help="override the master seed")
    s.add_argument("--threads", type=int, default=1, help="worker processes; does not change results")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--stem", help="output file stem (default: preset or config name)")
    s.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("traffic", help="traffic-light colour")
    tr.add_argument("--B", type=int, help="exception count for the Basel light")
    tr.add_argument("--n", type=int, default=250)
    tr.add_argument("--level", type=float, default=0.99)
    tr.add_argument("--counts", help="cell counts O_0,...,O_N")
    tr.add_argument("--alpha", type=float, default=0.975)
    tr.add_argument("--test", default="nass", help="pearson, nass or lrt for --counts")
    tr.add_argument("--statistic", type=float)
    tr.add_argument("--df", type=float)
    tr.add_argument("--pvalue", type=float)
    tr.add_argument("--json", action="store_true", help="print JSON")
    tr.set_defaults(func=cmd_traffic)

    g = sub.add_parser("grid", help="trinomial traffic-light grid for N = 2")
    g.add_argument("--n", type=int, default=250)
    g.add_argument("--alpha", type=float, default=0.975)
    g.add_argument("--test", default="nass")
    g.add_argument("--out", help="output CSV (default stdout)")
    g.set_defaults(func=cmd_grid)
    return p


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_PARSE
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, (DomainError, DegenerateError)):
        return EXIT_DOMAIN
    return EXIT_OTHER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BacktestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except Exception as exc:  # noqa: BLE001 - report and map to the generic code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())

"""Experiment reports: rejection-rate rows, pivot tables and colour judgements."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

SIZE_GREEN, SIZE_RED, SIZE_DARK_RED = 6.0, 9.0, 12.0
POWER_GREEN, POWER_RED, POWER_DARK_RED = 70.0, 30.0, 10.0

CSV_COLUMNS = ("experiment", "model", "forecaster", "window", "n", "alpha", "N", "test",
               "replications", "valid", "rejections", "rate", "judgement", "colour")


def judge_colour(rate: float, judgement: str) -> str:
    """Colour a rejection rate in percent.

    Size: green at most 6, red from 9, dark red from 12.  Power: green from
    70, red at most 30, dark red at most 10.  Anything in between is left
    uncoloured (``""``).
    """
    if judgement == "NA" or rate is None or math.isnan(rate):
        return "NA"
    if judgement == "size":
        if rate >= SIZE_DARK_RED:
            return "darkred"
        if rate >= SIZE_RED:
            return "red"
        return "green" if rate <= SIZE_GREEN else ""
    if judgement == "power":
        if rate <= POWER_DARK_RED:
            return "darkred"
        if rate <= POWER_RED:
            return "red"
        return "green" if rate >= POWER_GREEN else ""
    raise ValueError(f"unknown judgement {judgement!r}")


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    model: str
    forecaster: str
    window: int | None
    n: int
    alpha: float
    N: int
    test: str
    replications: int
    valid: int
    rejections: int
    judgement: str

    @property
    def rate(self) -> float:
        """Rejections in percent of valid replications (NaN if none are valid)."""
        if self.judgement == "NA" or self.valid == 0:
            return math.nan
        return 100.0 * self.rejections / self.valid

    @property
    def colour(self) -> str:
        return judge_colour(self.rate, self.judgement)

    def cells(self) -> list[str]:
        rate = self.rate
        return [self.experiment, self.model, self.forecaster, "" if self.window is None else str(self.window),
                str(self.n), repr(self.alpha), str(self.N), self.test, str(self.replications), str(self.valid),
                str(self.rejections), "NA" if math.isnan(rate) else f"{rate:.2f}", self.judgement, self.colour]


@dataclass
class ExperimentReport:
    """Rejection rates per (model, forecaster, window, n, alpha, N, test).

    ``metadata`` holds the seed, replication count, the empirical quantile
    rule and failure tallies, and is printed in the summary.  ``wall_clock``
    appears only in the summary so that the CSV files are reproducible byte
    for byte.
    """

    experiment: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def lookup(self, *, test: str, N: int, model: str | None = None, forecaster: str | None = None,
               window: int | None = None, n: int | None = None, alpha: float | None = None) -> ReportRow:
        hits = [r for r in self.rows if r.test == test and r.N == N
                and (model is None or r.model == model)
                and (forecaster is None or r.forecaster == forecaster)
                and (window is None or r.window == window)
                and (n is None or r.n == n)
                and (alpha is None or r.alpha == alpha)]
        if len(hits) != 1:
            raise KeyError(f"expected one matching row, found {len(hits)}")
        return hits[0]

    def rate(self, **kw) -> float:
        return self.lookup(**kw).rate

    # ---------------------------------------------------------------- CSV
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    def table_columns(self) -> list[tuple[str, int]]:
        cols = []
        for r in self.rows:
            if (r.test, r.N) not in cols:
                cols.append((r.test, r.N))
        return cols

    def to_table_csv(self) -> str:
        """Pivot with one line per (window, model, forecaster, n, alpha) and one column per (test, N)."""
        cols = self.table_columns()
        keyed = {}
        for r in self.rows:
            keyed.setdefault((r.window, r.model, r.forecaster, r.n, r.alpha), {})[(r.test, r.N)] = r
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window", "model", "forecaster", "n", "alpha"] + [f"{t} N={N}" for t, N in cols])
        for (window, model, fc, n, alpha), cells in keyed.items():
            line = ["" if window is None else window, model, fc, n, repr(alpha)]
            for c in cols:
                r = cells.get(c)
                if r is None:
                    line.append("")
                else:
                    line.append("NA" if math.isnan(r.rate) else f"{r.rate:.1f}")
            w.writerow(line)
        return buf.getvalue()

    def summary_text(self) -> str:
        """Human-readable summary with colour marks and run metadata."""
        marks = {"green": "+", "red": "!", "darkred": "!!", "": "", "NA": ""}
        out = [f"experiment: {self.experiment}"]
        for k, v in self.metadata.items():
            out.append(f"{k}: {v}")
        out.append(f"wall_clock_seconds: {self.wall_clock:.1f}")
        out.append("colours: size green <= 6, red >= 9, dark red >= 12; "
                   "power green >= 70, red <= 30, dark red <= 10 (percent)")
        out.append("marks: + green, ! red, !! dark red")
        out.append("")
        cols = self.table_columns()
        header = f"{'window':>6} {'model':>7} {'forecaster':>10} {'n':>5} {'alpha':>6} | " + " ".join(
            f"{t[:7] + ' ' + str(N):>11}" for t, N in cols)
        out.append(header)
        keyed = {}
        for r in self.rows:
            keyed.setdefault((r.window, r.model, r.forecaster, r.n, r.alpha), {})[(r.test, r.N)] = r
        for (window, model, fc, n, alpha), cells in keyed.items():
            parts = []
            for c in cols:
                r = cells.get(c)
                if r is None:
                    parts.append(f"{'':>11}")
                elif math.isnan(r.rate):
                    parts.append(f"{'NA':>11}")
                else:
                    parts.append(f"{r.rate:>9.1f}{marks[r.colour]:<2}")
            out.append(f"{'' if window is None else window:>6} {model:>7} {fc:>10} {n:>5} {alpha:>6} | " + " ".join(parts))
        return "\n".join(out) + "\n"

    def write(self, outdir, stem: str) -> dict:
        """Write ``stem.csv``, ``stem_table.csv`` and ``stem_summary.txt``; return the paths."""
        os.makedirs(outdir, exist_ok=True)
        paths = {
            "csv": os.path.join(outdir, f"{stem}.csv"),
            "table": os.path.join(outdir, f"{stem}_table.csv"),
            "summary": os.path.join(outdir, f"{stem}_summary.txt"),
        }
        for key, text in (("csv", self.to_csv()), ("table", self.to_table_csv()), ("summary", self.summary_text())):
            with open(paths[key], "w", newline="") as fh:
                fh.write(text)
        return paths


def read_report_csv(text: str) -> list[dict]:
    """Parse a report CSV back into dictionaries (strings as written)."""
    return list(csv.DictReader(io.StringIO(text)))

"""Three-colour traffic lights for backtest outcomes.

A light is green when the reference cdf of the observed statistic is below
0.95, red from 0.9999 upwards and yellow in between.  The Basel light
applies the same thresholds to the exact binomial cdf of the 99% exception
count.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .distributions import binomial_cdf, chi2_cdf
from .errors import DomainError
from .exceptions import LevelGrid, expected_cell_probs
from .mtest import multinomial_lrt, nass_constants, pearson_statistic

YELLOW_THRESHOLD = 0.95
RED_THRESHOLD = 0.9999


class Colour(enum.IntEnum):
    GREEN = 0
    YELLOW = 1
    RED = 2

    def __str__(self):
        return self.name.lower()


@dataclass(frozen=True)
class TrafficLight:
    colour: Colour
    cdf_value: float
    yellow: float = YELLOW_THRESHOLD
    red: float = RED_THRESHOLD

    def __post_init__(self):
        if not 0 < self.yellow < self.red <= 1:
            raise DomainError("thresholds must satisfy 0 < yellow < red <= 1")


def classify(cdf_value: float, yellow: float = YELLOW_THRESHOLD, red: float = RED_THRESHOLD) -> TrafficLight:
    if not 0.0 <= cdf_value <= 1.0:
        raise DomainError(f"cdf value must lie in [0, 1], got {cdf_value!r}")
    if cdf_value >= red:
        colour = Colour.RED
    elif cdf_value >= yellow:
        colour = Colour.YELLOW
    else:
        colour = Colour.GREEN
    return TrafficLight(colour, float(cdf_value), yellow, red)


def light_from_statistic(statistic: float, df: float) -> TrafficLight:
    if not statistic >= 0:
        raise DomainError(f"statistic must be nonnegative, got {statistic!r}")
    if not df > 0:
        raise DomainError(f"df must be positive, got {df!r}")
    return classify(float(chi2_cdf(statistic, df)))


def light_from_pvalue(p_value: float) -> TrafficLight:
    """Light for a p-value: yellow below 0.05, red below 0.0001."""
    return classify(1.0 - p_value)


def light_from_result(result) -> TrafficLight:
    if result.reference == "chi2":
        return light_from_statistic(result.statistic, result.df)
    return light_from_pvalue(result.p_value)


def basel_light(B: int, n: int = 250, level: float = 0.99) -> TrafficLight:
    """Colour from the exact cdf of ``Bin(n, 1 - level)`` at the exception count."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if int(B) != B or not 0 <= B <= n:
        raise DomainError(f"B must be an integer in [0, n], got {B!r}")
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0, 1), got {level!r}")
    return classify(float(binomial_cdf(int(B), int(n), 1.0 - level)))


_GRID_TESTS = ("nass", "pearson", "lrt")


def trinomial_light_grid(n: int, alpha: float = 0.975, test: str = "nass") -> np.ndarray:
    """Colours over all ``(O_1, O_2)`` with ``O_1 + O_2 <= n`` for N = 2.

    Returns an ``(n + 1, n + 1)`` integer array indexed ``[O_1, O_2]`` holding
    :class:`Colour` values, with -1 at infeasible cells.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if test not in _GRID_TESTS:
        raise DomainError(f"unknown test {test!r}; expected one of {', '.join(_GRID_TESTS)}")
    n = int(n)
    grid = LevelGrid(alpha, 2)
    o1, o2 = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    feasible = o1 + o2 <= n
    counts = np.stack([n - o1 - o2, o1, o2], axis=-1)
    out = np.full((n + 1, n + 1), -1, dtype=int)
    if test in ("nass", "pearson"):
        # infeasible cells get a negative O_0; they are computed and then masked
        s = pearson_statistic(counts, expected_cell_probs(grid))
        df = 2.0
        if test == "nass":
            c, df, _ = nass_constants(grid, n)
            s = c * s
        cdf = chi2_cdf(s, df)
        col = np.where(cdf >= RED_THRESHOLD, 2, np.where(cdf >= YELLOW_THRESHOLD, 1, 0))
        out[feasible] = col[feasible]
    else:
        for i, j in zip(*np.nonzero(feasible)):
            res = multinomial_lrt(tuple(int(v) for v in counts[i, j]), grid)
            out[i, j] = int(light_from_statistic(res.statistic, res.df).colour)
    return out


def grid_monotonicity_violations(colours: np.ndarray, expected_o2: float) -> list[tuple[int, int]]:
    """Cells where severity drops as ``O_2`` grows past its expectation.

    Returns ``(O_1, O_2)`` pairs whose colour is less severe than the cell
    just below them in ``O_2``.
    """
    bad = []
    start = int(np.ceil(expected_o2))
    for i in range(colours.shape[0]):
        row = colours[i]
        for j in range(max(start, 1), colours.shape[1]):
            if row[j] < 0:
                break
            if row[j] < row[j - 1]:
                bad.append((i, j))
    return bad


def write_grid_csv(path, colours: np.ndarray) -> None:
    """Write feasible cells as ``O1,O2,colour`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["O1", "O2", "colour"])
        for i in range(colours.shape[0]):
            for j in range(colours.shape[1]):
                if colours[i, j] >= 0:
                    w.writerow([i, j, str(Colour(int(colours[i, j])))])

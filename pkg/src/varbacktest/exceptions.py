"""Level grids, VaR exception indicators and multinomial cell counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LengthMismatch, RangeError

__all__ = [
    "LevelGrid",
    "VarForecastPanel",
    "CellCounts",
    "ExceptionSeries",
    "level_grid",
    "exceedance_depths",
    "cell_counts",
    "count_cells",
    "expected_cell_probs",
]


@dataclass(frozen=True)
class LevelGrid:
    """Equally spaced VaR levels ``alpha_j = alpha + (j - 1)(1 - alpha)/N``."""

    alpha: float
    N: int

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def levels(self) -> np.ndarray:
        j = np.arange(self.N)
        return self.alpha + j * (1.0 - self.alpha) / self.N

    @property
    def bounds(self) -> np.ndarray:
        """Levels with the sentinels 0 and 1 attached."""
        return np.concatenate(([0.0], self.levels, [1.0]))

    @property
    def cell_probs(self) -> np.ndarray:
        return expected_cell_probs(self)


@dataclass(frozen=True)
class VarForecastPanel:
    """VaR forecasts, one row per time point and one column per level."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise DomainError("forecast panel must be a non-empty 2-D array")
        if np.any(np.diff(v, axis=1) < 0):
            bad = int(np.nonzero(np.any(np.diff(v, axis=1) < 0, axis=1))[0][0])
            raise DomainError(f"forecast row {bad} is not nondecreasing across levels")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CellCounts:
    """Observed counts ``O_0..O_N``; cell j holds losses breaching exactly j levels."""

    counts: tuple

    def __post_init__(self):
        c = tuple(int(x) for x in self.counts)
        if len(c) < 2:
            raise DomainError("need at least two cells")
        if any(x < 0 for x in c):
            raise RangeError("cell counts must be nonnegative")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def N(self) -> int:
        return len(self.counts) - 1

    @property
    def exceptions(self) -> int:
        """Number of exceptions of the lowest level, ``n - O_0``."""
        return self.n - self.counts[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.counts, dtype=dtype)


@dataclass(frozen=True)
class ExceptionSeries:
    depths: np.ndarray
    N: int

    @property
    def n(self) -> int:
        return len(self.depths)


def level_grid(alpha: float, N: int) -> LevelGrid:
    return LevelGrid(alpha, N)


def exceedance_depths(losses, panel) -> ExceptionSeries:
    """Number of levels breached at each time, using the strict rule ``L_t > VaR``."""
    if not isinstance(panel, VarForecastPanel):
        panel = VarForecastPanel(panel)
    losses = np.asarray(losses, dtype=float).ravel()
    if losses.shape[0] != panel.n:
        raise LengthMismatch(f"{losses.shape[0]} losses but {panel.n} forecast rows")
    depths = np.sum(losses[:, None] > panel.values, axis=1)
    return ExceptionSeries(depths.astype(np.int64), panel.N)


def cell_counts(series, N: int | None = None) -> CellCounts:
    if isinstance(series, ExceptionSeries):
        N = series.N if N is None else N
        depths = series.depths
    else:
        depths = np.asarray(series, dtype=np.int64)
        if N is None:
            raise DomainError("N is required for a bare depth sequence")
    depths = np.asarray(depths, dtype=np.int64)
    if depths.size and (depths.min() < 0 or depths.max() > N):
        raise RangeError(f"exceedance depths must lie in [0, {N}]")
    return CellCounts(tuple(np.bincount(depths, minlength=N + 1)[: N + 1]))


def count_cells(losses, panel) -> CellCounts:
    series = exceedance_depths(losses, panel)
    return cell_counts(series)


def expected_cell_probs(grid: LevelGrid) -> np.ndarray:
    """Null cell probabilities ``alpha_{j+1} - alpha_j``, j = 0..N."""
    p = np.empty(grid.N + 1)
    p[0] = grid.alpha
    p[1:] = (1.0 - grid.alpha) / grid.N
    return p

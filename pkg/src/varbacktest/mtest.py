"""Multinomial and binomial backtests of VaR exceptions.

The multinomial tests take :class:`~varbacktest.exceptions.CellCounts`
against a :class:`~varbacktest.exceptions.LevelGrid`; the binomial tests take
the number of exceptions ``O1`` of a single level.  All p-values come from the
continuous reference distributions except the one-sided binomial LRT, which
uses the exact binomial tail.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .distributions import binomial_sf, chi2_sf, std_normal_quantile
from .errors import ConvergenceError, DegenerateError, DomainError
from .exceptions import CellCounts, LevelGrid, expected_cell_probs
from .optim import nelder_mead

__all__ = [
    "Sided",
    "TestResult",
    "MleSettings",
    "MuSigmaFit",
    "pearson_statistic",
    "pearson_test",
    "nass_constants",
    "nass_test",
    "cell_probabilities",
    "multinomial_loglik",
    "fit_mu_sigma",
    "multinomial_lrt",
    "binomial_score_test",
    "binomial_wald_test",
    "binomial_lrt",
    "berkowitz_lrt",
    "berkowitz_band_probs",
]

_SQRT2 = math.sqrt(2.0)
_LOG_FLOOR = 1e-300


class Sided(enum.Enum):
    ONE = "one-sided"
    TWO = "two-sided"


@dataclass(frozen=True)
class TestResult:
    """Outcome of one test.

    ``reference`` names the distribution the p-value comes from:
    ``"chi2"``, ``"normal"`` or ``"binomial-exact"``.
    """

    __test__ = False  # keep pytest from collecting this class

    method: str
    statistic: float
    df: float
    p_value: float
    sided: Sided = Sided.TWO
    reference: str = "chi2"
    mu_hat: float | None = None
    sigma_hat: float | None = None
    degenerate: bool = False

    @property
    def fitted(self):
        if self.mu_hat is None:
            return None
        return self.mu_hat, self.sigma_hat

    def reject(self, kappa: float = 0.05) -> bool:
        return self.p_value < kappa


@dataclass(frozen=True)
class MleSettings:
    mu0: float = 0.0
    sigma0: float = 1.0
    ftol: float = 1e-10
    xtol: float = 1e-8
    max_iter: int = 500
    sigma_bounds: tuple = (1e-6, 1e6)

    def __post_init__(self):
        lo, hi = self.sigma_bounds
        if not (self.ftol > 0 and self.xtol > 0 and self.max_iter > 0):
            raise DomainError("MLE tolerances must be positive")
        if not 0 < lo < hi:
            raise DomainError("sigma bounds must satisfy 0 < lower < upper")
        if not lo <= self.sigma0 <= hi:
            raise DomainError("initial sigma outside bounds")


DEFAULT_MLE = MleSettings()


@dataclass(frozen=True)
class MuSigmaFit:
    mu: float
    sigma: float
    loglik: float
    degenerate: bool
    nfev: int = 0

    def __iter__(self):
        return iter((self.mu, self.sigma, self.loglik))


class _Weights:
    """Real-valued cell weights, e.g. expected counts ``n * p_j``."""

    def __init__(self, values):
        self.counts = tuple(float(v) for v in values)
        if any(not v >= 0 for v in self.counts):
            raise DomainError("cell counts must be nonnegative")
        self.n = sum(self.counts)
        self.N = len(self.counts) - 1


def _check_counts(counts, grid: LevelGrid):
    if not isinstance(counts, CellCounts):
        values = np.asarray(counts, dtype=float).ravel()
        if np.all(values == np.round(values)):
            counts = CellCounts(tuple(int(v) for v in values))
        else:
            counts = _Weights(values)
    if counts.N != grid.N:
        raise DomainError(f"counts have {counts.N + 1} cells but the grid has N = {grid.N}")
    if counts.n <= 0:
        raise DomainError("tests need at least one observation")
    return counts


# --------------------------------------------------------------------------
# Pearson and Nass
# --------------------------------------------------------------------------

def pearson_statistic(counts, probs) -> np.ndarray:
    """Vectorised Pearson statistic; ``counts`` may be (..., N+1)."""
    o = np.asarray(counts, dtype=float)
    p = np.asarray(probs, dtype=float)
    if np.any(p <= 0):
        raise DomainError("cell probabilities must be positive")
    n = o.sum(axis=-1, keepdims=True)
    e = n * p
    return np.sum((o - e) ** 2 / e, axis=-1)


def pearson_test(counts: CellCounts, grid: LevelGrid) -> TestResult:
    counts = _check_counts(counts, grid)
    s = float(pearson_statistic(counts.counts, expected_cell_probs(grid)))
    return TestResult("pearson", s, float(grid.N), float(chi2_sf(s, grid.N)))


def nass_constants(grid: LevelGrid, n: int) -> tuple[float, float, float]:
    """Return ``(c, nu, var)`` of the Nass correction for sample size ``n``."""
    N = grid.N
    p = expected_cell_probs(grid)
    var = 2.0 * N - (N * N + 4.0 * N + 1.0) / n + float(np.sum(1.0 / p)) / n
    if not var > 0:
        raise DegenerateError(f"var(S_N) = {var:g} <= 0 for n = {n}, N = {N}")
    c = 2.0 * N / var
    return c, c * N, var


def nass_test(counts: CellCounts, grid: LevelGrid) -> TestResult:
    counts = _check_counts(counts, grid)
    c, nu, _ = nass_constants(grid, counts.n)
    s = c * float(pearson_statistic(counts.counts, expected_cell_probs(grid)))
    return TestResult("nass", s, nu, float(chi2_sf(s, nu)))


# --------------------------------------------------------------------------
# multinomial LRT in the (mu, sigma) model
# --------------------------------------------------------------------------

def _cell_prob(a, b):
    # P(a < Z <= b) for standardized bounds, subtracting in the thinner tail
    if a > 0:
        return 0.5 * (math.erfc(a / _SQRT2) - math.erfc(b / _SQRT2))
    return 0.5 * (math.erfc(-b / _SQRT2) - math.erfc(-a / _SQRT2))


def cell_probabilities(grid: LevelGrid, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    """Cell probabilities ``theta_{j+1} - theta_j`` with
    ``theta_j = Phi((Phi^{-1}(alpha_j) - mu) / sigma)``."""
    z = std_normal_quantile(grid.levels)
    edges = np.concatenate(([-np.inf], (z - mu) / sigma, [np.inf]))
    return np.array([_cell_prob(a, b) for a, b in zip(edges[:-1], edges[1:])])


def multinomial_loglik(counts, grid: LevelGrid, mu: float = 0.0, sigma: float = 1.0) -> float:
    o = np.asarray(counts, dtype=float)
    p = cell_probabilities(grid, mu, sigma)
    mask = o > 0
    return float(np.sum(o[mask] * np.log(np.maximum(p[mask], _LOG_FLOOR))))


def _make_nll(counts: tuple, z: list):
    occupied = [(j, o) for j, o in enumerate(counts) if o > 0]
    lo_edge = [-math.inf] + list(z)
    hi_edge = list(z) + [math.inf]
    cells = [(o, lo_edge[j], hi_edge[j]) for j, o in occupied]

    def nll(mu, sigma):
        total = 0.0
        for o, a, b in cells:
            p = _cell_prob((a - mu) / sigma, (b - mu) / sigma)
            total += o * math.log(p if p > _LOG_FLOOR else _LOG_FLOOR)
        return -total

    return nll


@functools.lru_cache(maxsize=1 << 16)
def _fit_cached(counts: tuple, alpha: float, N: int, settings: MleSettings) -> MuSigmaFit:
    grid = LevelGrid(alpha, N)
    z = [float(v) for v in std_normal_quantile(grid.levels)]
    nll = _make_nll(counts, z)
    lo, hi = (math.log(b) for b in settings.sigma_bounds)

    occupied = [j for j, o in enumerate(counts) if o > 0]
    if len(occupied) == 1:
        # supremum is the saturated likelihood 0, approached as sigma -> 0 with
        # mu inside the occupied band
        j = occupied[0]
        edges = [-math.inf] + z + [math.inf]
        a, b = edges[j], edges[j + 1]
        if math.isinf(a):
            mu = b - 1.0
        elif math.isinf(b):
            mu = a + 1.0
        else:
            mu = 0.5 * (a + b)
        sigma = settings.sigma_bounds[0]
        return MuSigmaFit(mu, sigma, -nll(mu, sigma), True, 1)

    n = sum(counts)
    saturated = math.fsum(o * math.log(o / n) for o in counts if o > 0)
    if len(occupied) == 2 and occupied[1] == occupied[0] + 1:
        # two neighbouring cells: any split is reached as sigma -> 0 with mu
        # on their shared boundary
        j = occupied[0]
        sigma = settings.sigma_bounds[0]
        mu = z[j] - sigma * float(std_normal_quantile(counts[j] / n))
        return MuSigmaFit(mu, sigma, saturated, True, 0)
    if occupied == [0, len(counts) - 1]:
        # only the outer cells: the interior bands shrink to nothing relative
        # to sigma as sigma -> infinity
        sigma = settings.sigma_bounds[1]
        mu = 0.5 * (z[0] + z[-1]) - sigma * float(std_normal_quantile(counts[0] / n))
        return MuSigmaFit(mu, sigma, saturated, True, 0)

    def objective(x):
        ls = min(max(x[1], lo), hi)
        return nll(x[0], math.exp(ls))

    x0 = [settings.mu0, math.log(settings.sigma0)]
    res = nelder_mead(objective, x0, 0.1, ftol=settings.ftol, xtol=settings.xtol,
                      max_iter=settings.max_iter)
    res2 = nelder_mead(objective, res.x, 0.05, ftol=settings.ftol, xtol=settings.xtol,
                       max_iter=settings.max_iter)
    nfev = res.nfev + res2.nfev
    best = res2 if res2.fun <= res.fun else res
    mu = best.x[0]
    ls = min(max(best.x[1], lo), hi)
    at_bound = ls - lo < 1e-6 or hi - ls < 1e-6
    if not res2.converged and not at_bound:
        raise ConvergenceError(f"Nelder-Mead did not converge in {settings.max_iter} iterations")
    return MuSigmaFit(mu, math.exp(ls), -best.fun, at_bound, nfev)


def fit_mu_sigma(counts: CellCounts, grid: LevelGrid, settings: MleSettings = DEFAULT_MLE) -> MuSigmaFit:
    """Maximum likelihood estimates of ``(mu, sigma)`` for the shifted-scaled
    normal cell model, optimised over ``(mu, log sigma)``."""
    counts = _check_counts(counts, grid)
    if grid.N < 2:
        raise DomainError("the (mu, sigma) model needs N >= 2")
    return _fit_cached(counts.counts, float(grid.alpha), grid.N, settings)


def multinomial_lrt(counts: CellCounts, grid: LevelGrid, settings: MleSettings = DEFAULT_MLE) -> TestResult:
    """LRT of ``mu = 0, sigma = 1``; N = 1 falls back to the two-sided binomial LRT."""
    counts = _check_counts(counts, grid)
    if grid.N == 1:
        res = binomial_lrt(counts.counts[1], counts.n, grid.alpha, Sided.TWO)
        return TestResult("lrt", res.statistic, res.df, res.p_value, Sided.TWO, "chi2")
    fit = fit_mu_sigma(counts, grid, settings)
    o = np.asarray(counts.counts, dtype=float)
    p0 = expected_cell_probs(grid)
    mask = o > 0
    null = float(np.sum(o[mask] * np.log(p0[mask])))
    g = max(2.0 * (fit.loglik - null), 0.0)
    return TestResult("lrt", g, 2.0, float(chi2_sf(g, 2.0)), Sided.TWO, "chi2",
                      fit.mu, fit.sigma, fit.degenerate)


# --------------------------------------------------------------------------
# binomial family (N = 1)
# --------------------------------------------------------------------------

def _check_binomial(O1, n, alpha):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if int(O1) != O1 or not 0 <= O1 <= n:
        raise DomainError(f"O1 must be an integer in [0, n], got {O1!r}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return int(O1), int(n)


def _normal_p(z: float, sided: Sided) -> float:
    if sided is Sided.TWO:
        return float(math.erfc(abs(z) / _SQRT2))
    return float(special.ndtr(-z))


def binomial_score_test(O1: int, n: int, alpha: float, sided: Sided = Sided.TWO) -> TestResult:
    """Score test of the exception rate; one-sided means too many exceptions."""
    O1, n = _check_binomial(O1, n, alpha)
    sided = Sided(sided)
    z = (O1 - n * (1.0 - alpha)) / math.sqrt(n * alpha * (1.0 - alpha))
    return TestResult("score", z, 1.0, _normal_p(z, sided), sided, "normal")


def binomial_wald_test(O1: int, n: int, alpha: float, sided: Sided = Sided.TWO) -> TestResult:
    O1, n = _check_binomial(O1, n, alpha)
    sided = Sided(sided)
    if O1 in (0, n):
        raise DegenerateError("Wald variance estimate is zero when O1 is 0 or n")
    theta = 1.0 - O1 / n
    z = (O1 - n * (1.0 - alpha)) / math.sqrt(n * theta * (1.0 - theta))
    return TestResult("wald", z, 1.0, _normal_p(z, sided), sided, "normal")


def _xlogy(x, y):
    return 0.0 if x == 0 else x * math.log(y)


def binomial_lrt(O1: int, n: int, alpha: float, sided: Sided = Sided.TWO) -> TestResult:
    """Binomial likelihood ratio test.

    Two-sided: ``2[l(theta_hat) - l(alpha)]`` against chi-squared(1).
    One-sided: exact tail ``P(Bin(n, 1 - alpha) >= O1)``, the Basel count
    test; the reported statistic is the LR restricted to ``theta < alpha``.
    """
    O1, n = _check_binomial(O1, n, alpha)
    sided = Sided(sided)
    theta = 1.0 - O1 / n
    g = 2.0 * (_xlogy(n - O1, theta) + _xlogy(O1, 1.0 - theta)
               - (n - O1) * math.log(alpha) - O1 * math.log1p(-alpha))
    g = max(g, 0.0)
    if sided is Sided.TWO:
        return TestResult("lrt", g, 1.0, float(chi2_sf(g, 1.0)), sided, "chi2")
    stat = g if O1 > n * (1.0 - alpha) else 0.0
    p = 1.0 if O1 == 0 else float(binomial_sf(O1 - 1, n, 1.0 - alpha))
    return TestResult("lrt", stat, 1.0, min(max(p, 0.0), 1.0), sided, "binomial-exact")


# --------------------------------------------------------------------------
# Berkowitz tail test on realized p-values
# --------------------------------------------------------------------------

def berkowitz_lrt(pit_values, alpha: float, settings: MleSettings = DEFAULT_MLE) -> TestResult:
    """Censored-normal LRT of ``mu = 0, sigma = 1`` for ``Phi^{-1}(max(U, alpha))``.

    Observations at or below ``alpha`` enter through
    ``log Phi((Phi^{-1}(alpha) - mu) / sigma)``; the rest through the normal
    log density of ``Phi^{-1}(U_t)``.
    """
    u = np.asarray(pit_values, dtype=float).ravel()
    if u.size < 1:
        raise DomainError("need at least one realized p-value")
    if not np.all((u > 0) & (u < 1)):
        raise DomainError("realized p-values must lie in (0, 1)")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    za = float(special.ndtri(alpha))
    tail = special.ndtri(u[u > alpha])
    m = int(tail.size)
    nc = int(u.size - m)
    s1 = float(np.sum(tail))
    s2 = float(np.sum(tail * tail))
    half_log_2pi = 0.5 * math.log(2.0 * math.pi)
    lo, hi = (math.log(b) for b in settings.sigma_bounds)

    def loglik(mu, ls):
        sigma = math.exp(ls)
        cens = nc * float(special.log_ndtr((za - mu) / sigma)) if nc else 0.0
        dens = -m * (ls + half_log_2pi) - (s2 - 2.0 * mu * s1 + m * mu * mu) / (2.0 * sigma * sigma)
        return cens + dens

    null = loglik(0.0, 0.0)
    if m == 0:
        # supremum 0, reached as Phi((za - mu) / sigma) -> 1
        g = -2.0 * null
        return TestResult("berkowitz", g, 2.0, float(chi2_sf(g, 2.0)), Sided.TWO, "chi2",
                          None, None, True)

    def objective(x):
        return -loglik(x[0], min(max(x[1], lo), hi))

    res = nelder_mead(objective, [settings.mu0, math.log(settings.sigma0)], 0.1,
                      ftol=settings.ftol, xtol=settings.xtol, max_iter=settings.max_iter)
    res2 = nelder_mead(objective, res.x, 0.05, ftol=settings.ftol, xtol=settings.xtol,
                       max_iter=settings.max_iter)
    best = res2 if res2.fun <= res.fun else res
    ls = min(max(best.x[1], lo), hi)
    at_bound = ls - lo < 1e-6 or hi - ls < 1e-6
    if not res2.converged and not at_bound:
        raise ConvergenceError("Berkowitz likelihood maximisation did not converge")
    g = max(2.0 * (-best.fun - null), 0.0)
    return TestResult("berkowitz", g, 2.0, float(chi2_sf(g, 2.0)), Sided.TWO, "chi2",
                      best.x[0], math.exp(ls), at_bound or m == 1)


def berkowitz_band_probs(grid: LevelGrid, mu: float, sigma: float) -> np.ndarray:
    """Probabilities the censored-normal model puts on the grid's cells.

    Cell 0 is the censoring atom at ``Phi^{-1}(alpha)``; the other cells
    integrate the normal density of the uncensored part numerically, so the
    result is an independent route to :func:`cell_probabilities`.
    """
    z = np.concatenate((std_normal_quantile(grid.levels), [np.inf]))
    out = np.empty(grid.N + 1)
    out[0] = special.ndtr((z[0] - mu) / sigma)

    def density(x):
        return math.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))

    for j in range(grid.N):
        out[j + 1] = integrate.quad(density, z[j], z[j + 1], epsabs=1e-13)[0]
    return out

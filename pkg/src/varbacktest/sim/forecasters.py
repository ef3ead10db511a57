"""VaR forecasters for the rolling backtests.

Every forecaster has two steps.  ``fit`` estimates its model from a window of
past losses.  ``predict`` turns a fitted state into VaR rows for the next
block of time points.  The rolling engine refits every ``stride`` steps and
applies the failure policy: a failed refit reuses the previous state, and a
failed first fit raises :class:`ForecasterFailure`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from ..distributions import Family, LossModel
from ..errors import BacktestError, ConvergenceError, DomainError, InsufficientData
from ..exceptions import LevelGrid
from .garch import GarchParams, garch_fit, garch_variance

QUANTILE_RULE = "ceil(m*u)-th order statistic"


class ForecasterFailure(BacktestError):
    """The first fit of a replication failed, so the replication is dropped."""


def empirical_quantile(window, levels) -> np.ndarray:
    """Upper empirical quantiles: the ``ceil(m u)``-th order statistic of ``m`` points."""
    x = np.sort(np.asarray(window, dtype=float).ravel())
    u = np.atleast_1d(np.asarray(levels, dtype=float))
    m = x.size
    if m < u.size + 1:
        raise InsufficientData(f"empirical quantiles at {u.size} levels need at least {u.size + 1} points, got {m}")
    # the small offset keeps m*u = 495.0000000001 from rounding up a rank
    k = np.clip(np.ceil(m * u - 1e-9).astype(int), 1, m)
    return x[k - 1]


def _levels_of(grid) -> np.ndarray:
    if isinstance(grid, LevelGrid):
        return grid.levels
    return np.atleast_1d(np.asarray(grid, dtype=float))


def _tile(row, steps):
    return np.broadcast_to(np.asarray(row, dtype=float), (steps, len(row))).copy()


# --------------------------------------------------------------------------
# static forecasters
# --------------------------------------------------------------------------

class Forecaster:
    name = ""
    dynamic = False

    def fit(self, window, previous=None):
        raise NotImplementedError

    def predict(self, state, data, t0, window, steps, levels) -> np.ndarray:
        raise NotImplementedError


class StaticOracle(Forecaster):
    name = "oracle"

    def __init__(self, model: LossModel):
        self.model = model

    def fit(self, window, previous=None):
        return self.model

    def predict(self, state, data, t0, window, steps, levels):
        return _tile(state.quantile(levels), steps)


def _fit_standardized_t(z, previous=None):
    """ML for ``z = s Y`` with Y a unit-variance t; returns ``(s, LossModel)``."""
    z2 = z * z
    m = z.size
    if previous is not None and previous[2].family is Family.STUDENT_T:
        start = [math.log(previous[2].nu - 2.0), math.log(previous[1])]
    else:
        start = [math.log(4.0), 0.5 * math.log(float(np.mean(z2)))]

    def nll(theta):
        ln, ls = (min(max(v, -20.0), 20.0) for v in theta)
        nu = min(2.0 + math.exp(ln), 300.0)
        s2 = math.exp(2.0 * ls) * (nu - 2.0)
        logc = math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2) - 0.5 * math.log(math.pi * s2)
        return -(m * logc - 0.5 * (nu + 1.0) * float(np.sum(np.log1p(z2 / s2))))

    res = optimize.minimize(nll, start, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-8})
    ln, ls = (min(max(v, -20.0), 20.0) for v in res.x)
    nu = max(min(2.0 + math.exp(ln), 300.0), 2.01)
    return math.exp(ls), LossModel.student_t(nu)


def _fit_location_scale(x, family: Family, gamma0=1.2, previous=None):
    """``(loc, scale, LossModel)`` for ``x = loc + scale * Y``, Y standardized."""
    loc = float(np.mean(x))
    z = x - loc
    if family is Family.NORMAL:
        return loc, float(np.std(x, ddof=1)), LossModel.normal()
    if family is Family.STUDENT_T:
        return (loc,) + _fit_standardized_t(z, previous)

    sd = float(np.std(z))
    if previous is not None and previous[2].family is Family.SKEWED_T:
        m = previous[2]
        start = [math.log(m.nu - 2.0), math.log(m.gamma), math.log(previous[1])]
    else:
        start = [math.log(3.0), math.log(gamma0), math.log(sd)]

    def nll(theta):
        ln, lg, ls = (min(max(v, -20.0), 20.0) for v in theta)
        nu = min(2.0 + math.exp(ln), 300.0)
        s = math.exp(ls)
        model = LossModel.skewed_t(max(nu, 2.01), math.exp(lg))
        dens = model.pdf(z / s)
        if np.any(dens <= 0):
            return 1e300
        return -float(np.sum(np.log(dens))) + z.size * ls

    res = optimize.minimize(nll, start, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 2000})
    if not np.isfinite(res.fun) or res.fun >= 1e299:
        raise ConvergenceError("skewed t fit failed")
    ln, lg, ls = (min(max(v, -20.0), 20.0) for v in res.x)
    nu = max(min(2.0 + math.exp(ln), 300.0), 2.01)
    return loc, math.exp(ls), LossModel.skewed_t(nu, math.exp(lg))


class GoodModeller(Forecaster):
    """Fits the true family: moments for the normal, ML for the t families."""

    name = "good"

    def __init__(self, model: LossModel):
        self.family = model.family
        self.gamma0 = model.gamma

    def fit(self, window, previous=None):
        return _fit_location_scale(np.asarray(window, dtype=float), self.family, self.gamma0, previous)

    def predict(self, state, data, t0, window, steps, levels):
        loc, scale, model = state
        return _tile(loc + scale * model.quantile(levels), steps)


class PoorModeller(GoodModeller):
    """Always fits a normal distribution."""

    name = "poor"

    def __init__(self, model: LossModel | None = None):
        self.family = Family.NORMAL
        self.gamma0 = 1.0


class HistoricalSimulation(Forecaster):
    """Empirical window quantiles (the industry modeller)."""

    name = "hs"

    def fit(self, window, previous=None):
        return np.asarray(window, dtype=float)

    def predict(self, state, data, t0, window, steps, levels):
        return _tile(empirical_quantile(state, levels), steps)


# --------------------------------------------------------------------------
# dynamic forecasters
# --------------------------------------------------------------------------

class GarchOracle(Forecaster):
    """True conditional quantiles ``sigma_t * F_Z^{-1}(alpha_j)``."""

    name = "oracle"
    dynamic = True

    def __init__(self, params: GarchParams, sigma: np.ndarray):
        self.params = params
        self.sigma = np.asarray(sigma, dtype=float)

    def fit(self, window, previous=None):
        return self.params.innovation

    def predict(self, state, data, t0, window, steps, levels):
        return self.sigma[t0:t0 + steps, None] * state.quantile(levels)[None, :]


def _conditional_sd(fit, data, t0, window, steps):
    """Filtered sigma_t for t0..t0+steps-1, started at the window's mean square."""
    w = data[t0 - window:t0]
    s0 = float(np.mean(w * w))
    s2 = garch_variance(data[t0 - window:t0 + steps - 1], fit.omega, fit.alpha1, fit.beta1, s0)
    return np.sqrt(s2[window:window + steps]), np.sqrt(s2[:window])


class GarchForecaster(Forecaster):
    """GARCH(1,1) or ARCH(1) with normal or t innovations, ``sigma_t * q_Z``."""

    dynamic = True

    def __init__(self, spec: str, innovation: str, name: str):
        self.spec = spec
        self.innovation = innovation
        self.name = name

    def fit(self, window, previous=None):
        return garch_fit(window, self.innovation, self.spec, start=previous)

    def predict(self, state, data, t0, window, steps, levels):
        sd, _ = _conditional_sd(state, data, t0, window, steps)
        return sd[:, None] * state.innovation_model.quantile(levels)[None, :]


class FilteredHistoricalSimulation(Forecaster):
    """Normal-QML GARCH volatility scaled by empirical residual quantiles."""

    name = "garch.hs"
    dynamic = True

    def fit(self, window, previous=None):
        w = np.asarray(window, dtype=float)
        fit = garch_fit(w, "normal", "garch11", start=previous[0] if previous else None)
        s0 = float(np.mean(w * w))
        sd_in = np.sqrt(fit.variance(w, s0)[:-1])
        return fit, w / sd_in

    def predict(self, state, data, t0, window, steps, levels):
        fit, resid = state
        sd, _ = _conditional_sd(fit, data, t0, window, steps)
        return sd[:, None] * empirical_quantile(resid, levels)[None, :]


_DYNAMIC_SPECS = {
    "garch.t": ("garch11", "t"),
    "garch.norm": ("garch11", "normal"),
    "arch.t": ("arch1", "t"),
    "arch.norm": ("arch1", "normal"),
}


def make_forecaster(name: str, *, model: LossModel | None = None, garch: GarchParams | None = None,
                    sigma: np.ndarray | None = None) -> Forecaster:
    """Build a forecaster by name.

    Static names: ``oracle``, ``good``, ``poor``, ``industry``.  Dynamic names:
    ``oracle``, ``garch.t``, ``garch.hs``, ``garch.norm``, ``arch.t``,
    ``arch.norm``, ``hs``.  The oracle takes ``model`` or ``garch`` with its
    ``sigma`` path; the good modeller takes the true ``model``.
    """
    key = name.lower()
    if key == "oracle":
        if garch is not None:
            if sigma is None:
                raise DomainError("the dynamic oracle needs the true sigma path")
            return GarchOracle(garch, sigma)
        if model is None:
            raise DomainError("the oracle needs the true model")
        return StaticOracle(model)
    if key == "good":
        if model is None:
            raise DomainError("the good modeller needs the true model family")
        return GoodModeller(model)
    if key == "poor":
        return PoorModeller()
    if key in ("industry", "hs"):
        f = HistoricalSimulation()
        f.name = key
        return f
    if key == "garch.hs":
        return FilteredHistoricalSimulation()
    if key in _DYNAMIC_SPECS:
        spec, innovation = _DYNAMIC_SPECS[key]
        return GarchForecaster(spec, innovation, key)
    valid = "oracle, good, poor, industry, garch.t, garch.hs, garch.norm, arch.t, arch.norm, hs"
    raise DomainError(f"unknown forecaster {name!r}; valid names are {valid}")


def rolling_forecasts(forecaster: Forecaster, data, window: int, n: int, stride: int, levels) -> tuple[np.ndarray, int]:
    """VaR rows for times ``window .. window + n - 1`` of ``data``.

    Refits on the latest ``window`` losses every ``stride`` steps.  Returns
    the ``(n, len(levels))`` panel and the number of failed refits.
    """
    data = np.asarray(data, dtype=float)
    levels = _levels_of(levels)
    if data.size < window + n:
        raise InsufficientData(f"need {window + n} observations, got {data.size}")
    out = np.empty((n, levels.size))
    state = None
    failures = 0
    for start in range(0, n, stride):
        t0 = window + start
        steps = min(stride, n - start)
        try:
            state = forecaster.fit(data[t0 - window:t0], state)
        except BacktestError as exc:
            if state is None:
                raise ForecasterFailure(f"{forecaster.name}: first fit failed ({exc})") from exc
            failures += 1
        out[start:start + steps] = forecaster.predict(state, data, t0, window, steps, levels)
    return out, failures


def forecast_quantiles(method: str, window, grid, *, model: LossModel | None = None,
                       garch: GarchParams | None = None, sigma_next: float | None = None) -> np.ndarray:
    """One-step VaR row at the grid levels from a window of past losses.

    For the dynamic oracle pass the true ``garch`` parameters and the true
    next-step volatility ``sigma_next``.
    """
    w = np.asarray(window, dtype=float).ravel()
    levels = _levels_of(grid)
    sigma = None
    if garch is not None and method.lower() == "oracle":
        if sigma_next is None:
            raise DomainError("the dynamic oracle needs sigma_next")
        sigma = np.full(w.size + 1, float(sigma_next))
    f = make_forecaster(method, model=model, garch=garch, sigma=sigma)
    state = f.fit(w)
    return f.predict(state, w, w.size, w.size, 1, levels)[0]

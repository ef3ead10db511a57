"""GARCH(1,1) and ARCH(1) simulation and quasi-maximum-likelihood fitting.

The conditional mean is fixed at zero: losses are modelled directly as
``L_t = sigma_t Z_t`` with unit-variance innovations ``Z_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal

from ..distributions import LossModel
from ..errors import ConvergenceError, DegenerateError, DomainError, InsufficientData

MIN_FIT_LENGTH = 250


@dataclass(frozen=True)
class GarchParams:
    """``sigma2_t = alpha0 + alpha1 L_{t-1}^2 + beta1 sigma2_{t-1}``."""

    alpha0: float = 2.18e-6
    alpha1: float = 0.109
    beta1: float = 0.890
    innovation: LossModel = field(default_factory=lambda: LossModel.student_t(5.06))

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise DomainError("alpha0 must be positive")
        if self.alpha1 < 0 or self.beta1 < 0:
            raise DomainError("alpha1 and beta1 must be nonnegative")
        if not self.alpha1 + self.beta1 < 1:
            raise DomainError("alpha1 + beta1 must be below 1 for stationarity")

    @property
    def long_run_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha1 - self.beta1)


def garch_simulate(params: GarchParams, n: int, burn_in: int = 1000, rng: np.random.Generator = None):
    """Simulate ``n`` losses after ``burn_in`` discarded steps.

    The recursion starts from the stationary variance.  Returns
    ``(losses, sigma)`` where ``sigma[t]`` is the conditional standard
    deviation of ``losses[t]``.
    """
    if n < 1 or burn_in < 0:
        raise DomainError("n must be positive and burn_in nonnegative")
    if rng is None:
        rng = np.random.default_rng()
    total = n + burn_in
    z = params.innovation.sample(rng, total)
    a0, a1, b1 = params.alpha0, params.alpha1, params.beta1
    losses = np.empty(total)
    sig2 = np.empty(total)
    s2 = params.long_run_variance
    prev = 0.0
    for t in range(total):
        if t:
            s2 = a0 + a1 * prev * prev + b1 * s2
        sig2[t] = s2
        prev = math.sqrt(s2) * z[t]
        losses[t] = prev
    return losses[burn_in:], np.sqrt(sig2[burn_in:])


def garch_variance(y: np.ndarray, omega: float, alpha1: float, beta1: float, s0: float) -> np.ndarray:
    """Conditional variances ``sigma2_0..sigma2_m`` for ``y_0..y_{m-1}``.

    ``sigma2_0 = s0``; the final entry is the one-step-ahead forecast.
    """
    y = np.asarray(y, dtype=float)
    return _variance_sq(y * y, omega, alpha1, beta1, s0)


def _variance_sq(y2, omega, a1, b1, s0):
    x = omega + a1 * y2
    if b1 == 0.0:
        return np.concatenate(([s0], x))
    rest, _ = signal.lfilter([1.0], [1.0, -b1], x, zi=[b1 * s0])
    return np.concatenate(([s0], rest))


def _logistic(v):
    return 1.0 / (1.0 + math.exp(-v)) if v > -700 else 0.0


def _logit(p):
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class GarchFit:
    spec: str
    innovation: str
    omega: float
    alpha1: float
    beta1: float
    nu: float | None
    loglik: float
    near_integrated: bool
    theta: tuple = ()  # optimiser coordinates, reused to warm-start the next fit

    @property
    def innovation_model(self) -> LossModel:
        if self.innovation == "t":
            return LossModel.student_t(self.nu)
        return LossModel.normal()

    def variance(self, y, s0: float) -> np.ndarray:
        return garch_variance(y, self.omega, self.alpha1, self.beta1, s0)


_SPECS = ("garch11", "arch1")
_INNOVATIONS = ("normal", "t")
_NU_MIN, _NU_MAX = 2.05, 300.0
_BOX = 30.0


def _unpack(theta, spec, innovation):
    omega = math.exp(min(max(theta[0], -_BOX), _BOX))
    if spec == "garch11":
        persist = _logistic(theta[1])
        share = _logistic(theta[2])
        a1, b1 = persist * share, persist * (1.0 - share)
        k = 3
    else:
        a1, b1 = _logistic(theta[1]), 0.0
        k = 2
    nu = None
    if innovation == "t":
        nu = min(max(2.0 + math.exp(min(theta[k], 10.0)), _NU_MIN), _NU_MAX)
    return omega, a1, b1, nu


def _default_theta(spec, innovation):
    if spec == "garch11":
        theta = [math.log(0.05), _logit(0.95), _logit(0.1 / 0.95)]
    else:
        theta = [math.log(0.7), _logit(0.3)]
    if innovation == "t":
        theta.append(math.log(6.0))
    return theta


def _negloglik(theta, y2, s0, spec, innovation):
    omega, a1, b1, nu = _unpack(theta, spec, innovation)
    s2 = _variance_sq(y2[:-1], omega, a1, b1, s0)
    if not np.all(s2 > 0) or not np.all(np.isfinite(s2)):
        return 1e300
    if innovation == "normal":
        ll = -0.5 * np.sum(np.log(s2) + y2 / s2) - 0.5 * len(y2) * math.log(2.0 * math.pi)
    else:
        logc = (math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)
                - 0.5 * math.log(math.pi * (nu - 2.0)))
        ll = (len(y2) * logc - 0.5 * np.sum(np.log(s2))
              - 0.5 * (nu + 1.0) * np.sum(np.log1p(y2 / (s2 * (nu - 2.0)))))
    return -float(ll) if math.isfinite(ll) else 1e300



def garch_fit(series, innovation: str = "normal", spec: str = "garch11", start: GarchFit | None = None) -> GarchFit:
    """Quasi-maximum-likelihood fit of a zero-mean GARCH(1,1) or ARCH(1).

    Positivity is enforced by a log map on ``omega`` and stationarity by a
    logistic map on ``alpha1 + beta1``; for t innovations the degrees of
    freedom are estimated jointly.  The recursion starts from the mean square
    of the series.  ``start`` warm-starts the optimiser from a previous fit.
    """
    if spec not in _SPECS:
        raise DomainError(f"unknown volatility spec {spec!r}; expected one of {_SPECS}")
    if innovation not in _INNOVATIONS:
        raise DomainError(f"unknown innovation {innovation!r}; expected one of {_INNOVATIONS}")
    x = np.asarray(series, dtype=float).ravel()
    if x.size < MIN_FIT_LENGTH:
        raise InsufficientData(f"need at least {MIN_FIT_LENGTH} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("series contains non-finite values")
    if np.ptp(x) == 0:
        raise DegenerateError("cannot fit a volatility model to a constant series")
    rms = math.sqrt(float(np.mean(x * x)))
    y2 = (x / rms) ** 2
    s0 = 1.0

    if start is not None and start.spec == spec and start.innovation == innovation and start.theta:
        theta0 = list(start.theta)
    else:
        theta0 = _default_theta(spec, innovation)
    res = optimize.minimize(_negloglik, theta0, args=(y2, s0, spec, innovation), method="L-BFGS-B",
                            bounds=[(-_BOX, _BOX)] * len(theta0))
    if not np.isfinite(res.fun) or res.fun >= 1e299:
        raise ConvergenceError(f"volatility fit failed: {res.message}")
    theta = [float(v) for v in res.x]
    omega, a1, b1, nu = _unpack(theta, spec, innovation)
    return GarchFit(spec, innovation, omega * rms * rms, a1, b1, nu, -float(res.fun) - x.size * math.log(rms),
                    a1 + b1 > 1.0 - 1e-4, tuple(theta))

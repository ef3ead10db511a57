"""Standardized loss distributions and the special functions the tests need.

Every :class:`LossModel` has mean zero and unit variance.  The Student t
model is the usual t rescaled by ``sqrt((nu - 2) / nu)``; the skewed t model
is the two-piece construction of Fernandez and Steel, affinely standardized
with its first two moments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NonfiniteError

__all__ = [
    "Family",
    "LossModel",
    "SpecialFnTolerances",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "chi2_cdf",
    "chi2_sf",
    "chi2_quantile",
    "student_t_cdf",
    "student_t_quantile",
    "binomial_cdf",
    "binomial_sf",
    "model_quantile",
    "model_es",
    "approx_es",
    "model_sample",
    "parse_model",
]


@dataclass(frozen=True)
class SpecialFnTolerances:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.max_iter > 0):
            raise DomainError("tolerances and max_iter must be strictly positive")


DEFAULT_TOLERANCES = SpecialFnTolerances()


# --------------------------------------------------------------------------
# special functions
# --------------------------------------------------------------------------

def std_normal_cdf(x):
    """Standard normal distribution function; saturates at 0 and 1."""
    return special.ndtr(x)


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def _check_open_unit(p, name="p"):
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {p!r}")
    return arr


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on (0, 1)."""
    _check_open_unit(p)
    return special.ndtri(p)


def _check_chi2_args(x, df):
    if not df > 0:
        raise DomainError(f"degrees of freedom must be positive, got {df!r}")
    if np.any(np.asarray(x) < 0):
        raise DomainError(f"chi-squared argument must be nonnegative, got {x!r}")


def chi2_cdf(x, df):
    """Chi-squared cdf for real-valued ``df``, i.e. ``P(df/2, x/2)``."""
    _check_chi2_args(x, df)
    return special.gammainc(0.5 * df, 0.5 * np.asarray(x, dtype=float))


def chi2_sf(x, df):
    """Upper tail ``1 - chi2_cdf(x, df)`` without cancellation."""
    _check_chi2_args(x, df)
    return special.gammaincc(0.5 * df, 0.5 * np.asarray(x, dtype=float))


def chi2_quantile(p, df):
    if not df > 0:
        raise DomainError(f"degrees of freedom must be positive, got {df!r}")
    arr = np.asarray(p, dtype=float)
    if not np.all((arr >= 0.0) & (arr < 1.0)):
        raise DomainError(f"p must lie in [0, 1), got {p!r}")
    return 2.0 * special.gammaincinv(0.5 * df, arr)


def student_t_cdf(x, nu):
    return special.stdtr(nu, x)


def student_t_quantile(p, nu):
    _check_open_unit(p)
    return special.stdtrit(nu, p)


def binomial_cdf(k, n, p):
    """``P(Bin(n, p) <= k)``."""
    return special.bdtr(k, n, p)


def binomial_sf(k, n, p):
    """``P(Bin(n, p) > k)``."""
    return special.bdtrc(k, n, p)


# --------------------------------------------------------------------------
# loss models
# --------------------------------------------------------------------------

class Family(enum.Enum):
    NORMAL = "normal"
    STUDENT_T = "t"
    SKEWED_T = "skewed_t"


def _abs_t_mean(nu):
    # E|T| for a standard t with nu > 1 degrees of freedom
    return (2.0 * math.sqrt(nu) * math.exp(math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2))
            / (math.sqrt(math.pi) * (nu - 1.0)))


@dataclass(frozen=True)
class LossModel:
    """A loss distribution standardized to mean 0 and variance 1.

    Parameters
    ----------
    family : Family
    nu : float, optional
        Degrees of freedom, required (and > 2) for the t families.
    gamma : float
        Skewness of the skewed t; ``gamma = 1`` is the symmetric t and
        ``gamma > 1`` puts more mass in the right (loss) tail.
    """

    family: Family
    nu: float | None = None
    gamma: float = 1.0
    _loc: float = field(init=False, repr=False, compare=False)
    _scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if family is Family.NORMAL:
            loc, scale = 0.0, 1.0
        else:
            if self.nu is None or not self.nu > 2:
                raise DomainError(f"{family.value} model needs nu > 2, got {self.nu!r}")
            nu = float(self.nu)
            if family is Family.STUDENT_T:
                loc, scale = 0.0, math.sqrt(nu / (nu - 2.0))
            else:
                g = float(self.gamma)
                if not g > 0:
                    raise DomainError(f"gamma must be positive, got {self.gamma!r}")
                loc = _abs_t_mean(nu) * (g - 1.0 / g)
                second = nu / (nu - 2.0) * (g**3 + g**-3) / (g + 1.0 / g)
                scale = math.sqrt(second - loc * loc)
        object.__setattr__(self, "_loc", loc)
        object.__setattr__(self, "_scale", scale)

    # constructors -----------------------------------------------------------
    @classmethod
    def normal(cls) -> "LossModel":
        return cls(Family.NORMAL)

    @classmethod
    def student_t(cls, nu: float) -> "LossModel":
        return cls(Family.STUDENT_T, nu=float(nu))

    @classmethod
    def skewed_t(cls, nu: float, gamma: float) -> "LossModel":
        return cls(Family.SKEWED_T, nu=float(nu), gamma=float(gamma))

    @property
    def label(self) -> str:
        if self.family is Family.NORMAL:
            return "Normal"
        if self.family is Family.STUDENT_T:
            return f"t{_fmt(self.nu)}"
        return f"st{_fmt(self.nu)}" if self.gamma == 1.2 else f"st{_fmt(self.nu)}(g={_fmt(self.gamma)})"

    # raw two-piece variable X; the model is (X - loc) / scale -------------------
    def _raw_cdf(self, x):
        if self.family is Family.NORMAL:
            return special.ndtr(x)
        if self.family is Family.STUDENT_T:
            return special.stdtr(self.nu, x)
        g2 = self.gamma**2
        x = np.asarray(x, dtype=float)
        lower = 2.0 / (1.0 + g2) * special.stdtr(self.nu, self.gamma * np.minimum(x, 0.0))
        upper = 1.0 - 2.0 * g2 / (1.0 + g2) * special.stdtr(self.nu, -np.maximum(x, 0.0) / self.gamma)
        return np.where(x < 0, lower, upper)

    def _raw_sf(self, x):
        if self.family is not Family.SKEWED_T:
            return self._raw_cdf(-np.asarray(x, dtype=float))
        g2 = self.gamma**2
        x = np.asarray(x, dtype=float)
        upper = 2.0 * g2 / (1.0 + g2) * special.stdtr(self.nu, -np.maximum(x, 0.0) / self.gamma)
        lower = 1.0 - 2.0 / (1.0 + g2) * special.stdtr(self.nu, self.gamma * np.minimum(x, 0.0))
        return np.where(x < 0, lower, upper)

    def _raw_pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family is Family.NORMAL:
            return std_normal_pdf(x)
        nu = self.nu
        logc = math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2) - 0.5 * math.log(nu * math.pi)
        if self.family is Family.STUDENT_T:
            u = x
            k = 1.0
        else:
            g = self.gamma
            u = np.where(x >= 0, x / g, x * g)
            k = 2.0 / (g + 1.0 / g)
        return k * np.exp(logc - 0.5 * (nu + 1) * np.log1p(u * u / nu))

    def _raw_quantile(self, u):
        if self.family is Family.NORMAL:
            return special.ndtri(u)
        if self.family is Family.STUDENT_T:
            return special.stdtrit(self.nu, u)
        g = self.gamma
        g2 = g * g
        u = np.asarray(u, dtype=float)
        cut = 1.0 / (1.0 + g2)
        lo = special.stdtrit(self.nu, np.minimum(u, cut) * (1.0 + g2) / 2.0) / g
        # upper branch through the tail probability to keep precision near 1
        tail = np.minimum(1.0 - u, 1.0 - cut) * (1.0 + g2) / (2.0 * g2)
        hi = -g * special.stdtrit(self.nu, tail)
        return np.where(u < cut, lo, hi)

    def _raw_isf(self, p):
        """Upper-tail quantile: x with P(X > x) = p."""
        if self.family is Family.NORMAL:
            return -special.ndtri(p)
        if self.family is Family.STUDENT_T:
            return -special.stdtrit(self.nu, p)
        g = self.gamma
        g2 = g * g
        p = np.asarray(p, dtype=float)
        upper_mass = g2 / (1.0 + g2)
        hi = -g * special.stdtrit(self.nu, np.minimum(p, upper_mass) * (1.0 + g2) / (2.0 * g2))
        lo = special.stdtrit(self.nu, np.minimum(1.0 - p, 1.0 - upper_mass) * (1.0 + g2) / 2.0) / g
        return np.where(p <= upper_mass, hi, lo)

    # public, standardized scale ----------------------------------------------
    def cdf(self, x):
        return self._raw_cdf(self._loc + self._scale * np.asarray(x, dtype=float))

    def sf(self, x):
        return self._raw_sf(self._loc + self._scale * np.asarray(x, dtype=float))

    def pdf(self, x):
        return self._scale * self._raw_pdf(self._loc + self._scale * np.asarray(x, dtype=float))

    def quantile(self, u):
        _check_open_unit(u, "u")
        return (self._raw_quantile(u) - self._loc) / self._scale

    def isf(self, p):
        _check_open_unit(p, "p")
        return (self._raw_isf(p) - self._loc) / self._scale

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family is Family.NORMAL:
            return rng.standard_normal(n)
        t = rng.standard_t(self.nu, n)
        if self.family is Family.STUDENT_T:
            return t / self._scale
        g2 = self.gamma**2
        right = rng.random(n) < g2 / (1.0 + g2)
        x = np.where(right, self.gamma * np.abs(t), -np.abs(t) / self.gamma)
        return (x - self._loc) / self._scale

    def es(self, alpha: float, tol: SpecialFnTolerances = DEFAULT_TOLERANCES) -> float:
        return model_es(self, alpha, tol)


def _fmt(v) -> str:
    return f"{v:g}"


def parse_model(name: str) -> LossModel:
    """Build a model from a short name.

    Accepted forms: ``normal``, ``t5``, ``t:4.5``, ``st3`` (skewed t with the
    default skewness 1.2), ``st:3:1.5``.
    """
    key = name.strip().lower()
    try:
        if key in ("normal", "norm", "n"):
            return LossModel.normal()
        if key.startswith("t:"):
            return LossModel.student_t(float(key[2:]))
        if key.startswith(("st:", "skt:")):
            parts = key.split(":")[1:]
            nu = float(parts[0])
            gamma = float(parts[1]) if len(parts) > 1 else 1.2
            return LossModel.skewed_t(nu, gamma)
        if key.startswith("skt"):
            return LossModel.skewed_t(float(key[3:]), 1.2)
        if key.startswith("st"):
            return LossModel.skewed_t(float(key[2:]), 1.2)
        if key.startswith("t"):
            return LossModel.student_t(float(key[1:]))
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"cannot parse loss model {name!r}") from None
    raise DomainError(f"unknown loss model {name!r}; expected normal, tNU, stNU, t:NU or st:NU:GAMMA")


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def model_quantile(model: LossModel, u) -> float:
    return model.quantile(u)


def _es_quadrature(model: LossModel, alpha: float, tol: SpecialFnTolerances) -> float:
    # integral of the quantile function over (alpha, 1) after u = 1 - (1 - alpha) e^{-s},
    # which removes the endpoint singularity of heavy-tailed quantiles
    tail = 1.0 - alpha

    def integrand(s):
        w = math.exp(-s)
        p = tail * w
        if p < 1e-300:
            return 0.0  # isf grows at most like a power of 1/p, so w * isf(p) has vanished
        return model.isf(p) * w

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0,
                              epsrel=min(tol.rel_tol * 100, 1e-8), limit=tol.max_iter)
    return float(value)


def model_es(model: LossModel, alpha: float, tol: SpecialFnTolerances = DEFAULT_TOLERANCES,
             method: str = "auto") -> float:
    """Expected shortfall ``E[L | L > VaR_alpha]`` of a standardized model.

    Closed forms are used for the normal and Student t families; the skewed
    t (or ``method="quad"``) integrates the quantile function numerically.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if model.nu is not None and model.nu <= 1:
        raise NonfiniteError("expected shortfall is infinite for nu <= 1")
    if method == "quad" or model.family is Family.SKEWED_T:
        return _es_quadrature(model, alpha, tol)
    if method != "auto":
        raise DomainError(f"unknown ES method {method!r}")
    if model.family is Family.NORMAL:
        z = float(special.ndtri(alpha))
        return float(std_normal_pdf(z)) / (1.0 - alpha)
    nu = model.nu
    q = float(special.stdtrit(nu, alpha))
    dens = float(model._raw_pdf(q))
    return dens / (1.0 - alpha) * (nu + q * q) / (nu - 1.0) / model._scale


def approx_es(model: LossModel, alpha: float) -> float:
    """Four-quantile average ``(q(a) + q(.75a+.25) + q(.5a+.5) + q(.25a+.75)) / 4``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    levels = np.array([alpha, 0.75 * alpha + 0.25, 0.5 * alpha + 0.5, 0.25 * alpha + 0.75])
    return float(np.mean(model.quantile(levels)))


def model_sample(model: LossModel, rng: np.random.Generator, n: int) -> np.ndarray:
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    return model.sample(rng, n)

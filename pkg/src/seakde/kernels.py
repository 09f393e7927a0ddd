"""Gaussian, Gamma and Weibull kernels.

Each kernel is a probability density in a standardized argument ``u``.
Gamma and Weibull kernels live on ``u >= 0``: placed inside a KDE they sit
to the right of their sample point.
"""

from dataclasses import dataclass
from enum import Enum
import logging
import math

import numpy as np
from scipy import integrate, special

from . import _kmath
from .errors import ConfigError, DomainError

log = logging.getLogger(__name__)


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    GAMMA = "gamma"
    WEIBULL = "weibull"

    @property
    def code(self):
        return _CODES[self]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"unknown kernel family {value!r}") from None


_CODES = {Family.GAUSSIAN: _kmath.GAUSSIAN, Family.GAMMA: _kmath.GAMMA,
          Family.WEIBULL: _kmath.WEIBULL}
_PARAM_NAMES = {Family.GAUSSIAN: ("mu", "sigma"), Family.GAMMA: ("alpha", "beta"),
                Family.WEIBULL: ("c", "s")}


class MomentMode(str, Enum):
    """How the Gamma second moment is computed.

    ``PAPER`` uses Gamma(alpha+2)/Gamma(alpha) with no rate factor, which is
    what the Gamma fixed-point coefficient is built from. ``CORRECTED`` is
    the true integral of u^2 K(u), i.e. alpha(alpha+1)/beta^2.
    """
    PAPER = "paper"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its two parameters.

    ``a``/``b`` hold (mu, sigma), (alpha, beta) or (c, s) depending on the
    family; use the named properties or the constructors below.
    """
    family: Family
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        a, b = float(self.a), float(self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ConfigError(f"non-finite kernel parameters {self.params}")
        if self.family is Family.GAUSSIAN:
            if b <= 0:
                raise ConfigError(f"sigma must be > 0, got {b}")
        elif a <= 0 or b <= 0:
            names = _PARAM_NAMES[self.family]
            raise ConfigError(f"{names[0]} and {names[1]} must be > 0, got {a}, {b}")

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0):
        return cls(Family.GAUSSIAN, mu, sigma)

    @classmethod
    def gamma(cls, alpha, beta):
        return cls(Family.GAMMA, alpha, beta)

    @classmethod
    def weibull(cls, c, s):
        return cls(Family.WEIBULL, c, s)

    @classmethod
    def from_params(cls, family, params):
        family = Family.parse(family)
        first, second = _PARAM_NAMES[family]
        try:
            return cls(family, params[first], params[second])
        except KeyError as exc:
            raise ConfigError(f"{family.value} kernel needs parameter {exc}") from None

    @property
    def params(self):
        first, second = _PARAM_NAMES[self.family]
        return {first: self.a, second: self.b}

    def __getattr__(self, name):
        # named access: k.sigma, k.alpha, k.s ...
        fam = self.__dict__.get("family")
        if fam is not None:
            names = _PARAM_NAMES[fam]
            if name == names[0]:
                return self.a
            if name == names[1]:
                return self.b
        raise AttributeError(name)

    @property
    def one_sided(self):
        return self.family is not Family.GAUSSIAN

    @property
    def code(self):
        return self.family.code


def _check_u(u):
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("kernel argument must be finite")
    return arr


def _out(arr, u):
    return float(arr) if np.ndim(u) == 0 else arr


def kernel_pdf(k: KernelSpec, u):
    """Kernel density K(u); scalar in, scalar out."""
    arr = _check_u(u)
    return _out(_kmath.evaluate(k.code, k.a, k.b, arr, order=0), u)


def kernel_first_derivative(k: KernelSpec, u):
    arr = _check_u(u)
    return _out(_kmath.evaluate(k.code, k.a, k.b, arr, order=1), u)


def kernel_second_derivative(k: KernelSpec, u):
    """K''(u) in closed form.

    Equals the normalizing constant times the bracket term used by the
    bandwidth equations: 1/(sqrt(2 pi) sigma^3) for Gaussian,
    beta^alpha/Gamma(alpha) for Gamma, s/c^3 for Weibull.
    Raises :class:`SingularityError` at u = 0 when a negative power of u
    survives.
    """
    arr = _check_u(u)
    return _out(_kmath.evaluate(k.code, k.a, k.b, arr, order=2), u)


def second_derivative_scale(k: KernelSpec):
    """Constant c_K with K''(u) = c_K * bracket(u)."""
    return float(np.exp(_kmath.log_norm(k.code, k.a, k.b)))


def kernel_ccdf(k: KernelSpec, u):
    """Survival function P(U > u) of the kernel density."""
    u = np.asarray(u, dtype=float)
    if k.family is Family.GAUSSIAN:
        out = special.ndtr(-(u - k.a) / k.b)
    elif k.family is Family.GAMMA:
        out = np.where(u > 0, special.gammaincc(k.a, k.b * np.maximum(u, 0.0)), 1.0)
    else:
        out = np.where(u > 0, np.exp(-(np.maximum(u, 0.0) / k.a) ** k.b), 1.0)
    return float(out) if out.ndim == 0 else out


def kernel_mean(k: KernelSpec):
    if k.family is Family.GAUSSIAN:
        return k.a
    if k.family is Family.GAMMA:
        return k.a / k.b
    return k.a * math.gamma(1.0 + 1.0 / k.b)


def kernel_std(k: KernelSpec):
    if k.family is Family.GAUSSIAN:
        return k.b
    if k.family is Family.GAMMA:
        return math.sqrt(k.a) / k.b
    c, s = k.a, k.b
    return c * math.sqrt(math.gamma(1.0 + 2.0 / s) - math.gamma(1.0 + 1.0 / s) ** 2)


def support_window(k: KernelSpec, spread=10.0, tail=1e-16):
    """Standardized interval [lo, hi] holding all but ~``tail`` of the mass.

    Gaussian: mu +- spread*sigma. One-sided kernels start at 0 and end at the
    larger of mean + spread*std and the (1 - tail) quantile; the quantile
    term matters for exponential-like tails where ten spreads leave ~1e-5.
    """
    if k.family is Family.GAUSSIAN:
        return k.a - spread * k.b, k.a + spread * k.b
    hi = kernel_mean(k) + spread * kernel_std(k)
    if k.family is Family.GAMMA:
        q = special.gammainccinv(k.a, tail) / k.b
    else:
        q = k.a * (-math.log(tail)) ** (1.0 / k.b)
    return 0.0, max(hi, float(q))


def roughness(k: KernelSpec):
    """R(K), the integral of K^2, in closed form."""
    if k.family is Family.GAUSSIAN:
        return 1.0 / (2.0 * math.sqrt(math.pi) * k.b)
    if k.family is Family.GAMMA:
        alpha, beta = k.a, k.b
        if 2.0 * alpha - 1.0 <= 0.0:
            raise DomainError(f"Gamma roughness needs 2*alpha - 1 > 0, got alpha={alpha}")
        # logs avoid overflow of beta^alpha and Gamma(alpha) for large alpha
        val = (2.0 * alpha * math.log(beta) - 2.0 * math.lgamma(alpha)
               + math.lgamma(2.0 * alpha - 1.0) - (2.0 * alpha - 1.0) * math.log(2.0 * beta))
        return math.exp(val)
    c, s = k.a, k.b
    if 2.0 - 1.0 / s <= 0.0:
        raise DomainError(f"Weibull roughness needs s > 1/2, got s={s}")
    return math.gamma(2.0 - 1.0 / s) * s / (2.0 ** (2.0 - 1.0 / s) * c)


def second_moment(k: KernelSpec, mode=MomentMode.PAPER):
    """mu_2(K).

    Gaussian sigma^2 + mu^2 and Weibull c^2 Gamma(2/s + 1) are exact. For the
    Gamma kernel the default ``paper`` mode returns Gamma(alpha+2)/Gamma(alpha)
    with no 1/beta^2; pass ``mode="corrected"`` for the true integral.
    """
    mode = MomentMode(mode)
    if k.family is Family.GAUSSIAN:
        return k.b ** 2 + k.a ** 2
    if k.family is Family.GAMMA:
        ratio = math.exp(math.lgamma(k.a + 2.0) - math.lgamma(k.a))
        if mode is MomentMode.CORRECTED:
            return ratio / k.b ** 2
        return ratio
    return k.a ** 2 * math.gamma(2.0 / k.b + 1.0)


def numeric_second_moment(k: KernelSpec):
    """Quadrature of u^2 K(u) over the kernel support."""
    f = lambda u: u * u * kernel_pdf(k, u)
    if k.one_sided:
        val, _ = integrate.quad(f, 0.0, np.inf, limit=400, epsabs=0.0, epsrel=1e-12)
    else:
        val, _ = integrate.quad(f, -np.inf, np.inf, limit=400, epsabs=0.0, epsrel=1e-12)
    return val

"""Kernel density estimator f(x) = 1/(N h) sum_i K((x - x_i) / h).

Evaluation is an exact O(N) sum per query point (no binning), delegated to
the accelerated kernel sums in :mod:`seakde._accel`.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate

from . import _accel, _kmath
from .errors import ConfigError, DomainError, NumericalError, SingularityError
from .kernels import KernelSpec, kernel_ccdf, support_window
from .samples_io import SampleSet

_CCDF_CHUNK = 256


def _as_samples(samples):
    if isinstance(samples, SampleSet):
        return samples.amplitudes
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise ConfigError("KDE needs at least one sample")
    return arr


@dataclass(frozen=True)
class KdeModel:
    kernel: KernelSpec
    bandwidth: float
    samples: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self):
        h = float(self.bandwidth)
        if not (h > 0 and math.isfinite(h)):
            raise ConfigError(f"bandwidth must be positive and finite, got {self.bandwidth}")
        arr = np.array(_as_samples(self.samples), dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "bandwidth", h)
        object.__setattr__(self, "samples", arr)
        if not self.name:
            object.__setattr__(self, "name", f"kde-{self.kernel.family.value}")

    @property
    def n(self):
        return self.samples.size

    def _sum(self, x, order):
        k = self.kernel
        return _accel.kernel_sum(np.atleast_1d(x), self.samples, self.bandwidth,
                                 k.code, k.a, k.b, order)

    def pdf(self, x):
        arr = _finite(x)
        out = self._sum(arr.ravel(), 0) / (self.n * self.bandwidth)
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    def derivative(self, x, order=1):
        """m-th derivative, 1/(N h^(m+1)) sum_i K^(m)((x - x_i)/h)."""
        if order not in (1, 2):
            raise ConfigError(f"derivative order must be 1 or 2, got {order}")
        arr = _finite(x)
        if self.kernel.one_sided:
            _check_not_at_pole(self, arr, order)
        out = self._sum(arr.ravel(), order) / (self.n * self.bandwidth ** (order + 1))
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    def ccdf(self, x):
        """Mean of the kernel survival functions; exact and monotone."""
        arr = _finite(x)
        flat = arr.ravel()
        out = np.zeros(flat.size)
        for s in range(0, self.n, _CCDF_CHUNK):
            blk = self.samples[s:s + _CCDF_CHUNK]
            z = (flat[:, None] - blk[None, :]) / self.bandwidth
            out += np.sum(kernel_ccdf(self.kernel, z), axis=1)
        out = np.clip(out / self.n, 0.0, 1.0)
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    def window(self, spread=10.0):
        """Interval holding the estimate's mass; see ``kernels.support_window``."""
        zlo, zhi = support_window(self.kernel, spread)
        return (float(self.samples.min()) + self.bandwidth * zlo,
                float(self.samples.max()) + self.bandwidth * zhi)

    def bounds(self):
        return self.window()


def _finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("evaluation point must be finite")
    return arr


def _check_not_at_pole(model, x, order):
    k = model.kernel
    if _kmath.value_at_zero(k.code, k.a, k.b, order) is not None:
        return
    hit = np.isin(x.ravel(), model.samples)
    if np.any(hit):
        raise SingularityError(
            f"order-{order} derivative is singular at sample point x={x.ravel()[hit][0]!r}")


def kde_pdf(m: KdeModel, x):
    return m.pdf(x)


def kde_derivative(m: KdeModel, x, order=1):
    return m.derivative(x, order)


def kde_ccdf(m, x):
    """Complementary CDF of any density model (KDE or parametric)."""
    return m.ccdf(x)


def quadrature_ccdf(m, x, epsabs=1e-9):
    """1 - integral of the pdf up to x by adaptive quadrature.

    Independent of the closed-form survival sums; used as a cross-check.
    """
    lo, hi = m.bounds()
    if x <= lo:
        return 1.0
    upper = min(x, hi)
    pts = None
    if isinstance(m, KdeModel) and m.n <= 40:
        pts = [p for p in np.unique(m.samples) if lo < p < upper] or None
    val, err = integrate.quad(lambda t: float(m.pdf(t)), lo, upper, epsabs=epsabs,
                              epsrel=1e-12, limit=2000, points=pts)
    if not math.isfinite(val) or err > 100 * epsabs:
        raise NumericalError(f"ccdf quadrature failed at x={x}: value={val}, error={err}")
    return max(0.0, 1.0 - val)

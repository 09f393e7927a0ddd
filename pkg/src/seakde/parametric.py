"""Parametric clutter models fitted to an empirical PDF by least squares.

The fitted family PDF is compared with a density histogram at the bin
centers; the mean squared difference is minimized with Nelder-Mead from a
moment-matched start plus seeded random restarts.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy import optimize

from . import _kmath
from .errors import DegenerateDataError, FitError
from .kernels import Family, KernelSpec, kernel_ccdf, support_window
from .samples_io import SampleSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HistogramDensity:
    bin_edges: np.ndarray
    densities: np.ndarray
    count: int = 0

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        dens = np.asarray(self.densities, dtype=float)
        if edges.ndim != 1 or edges.size != dens.size + 1 or dens.size < 1:
            raise DegenerateDataError("histogram needs len(edges) == len(densities) + 1")
        if np.any(np.diff(edges) <= 0):
            raise DegenerateDataError("histogram edges must be strictly increasing")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise DegenerateDataError("histogram densities must be finite and >= 0")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "densities", dens)

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self):
        return np.diff(self.bin_edges)

    @property
    def mass(self):
        return float(np.sum(self.densities * self.widths))

    def ccdf_at_edges(self):
        """Empirical CCDF at each bin edge (1 at the first, 0 at the last)."""
        mass = self.densities * self.widths
        tail = np.concatenate([np.cumsum(mass[::-1])[::-1], [0.0]])
        return tail / tail[0]


def empirical_pdf(samples, bins=128) -> HistogramDensity:
    """Density histogram over [0, max amplitude] with unit total mass."""
    amps = samples.amplitudes if isinstance(samples, SampleSet) else np.asarray(samples, float)
    if int(bins) != bins or bins < 2:
        raise DegenerateDataError(f"need at least 2 bins, got {bins}")
    if amps.size == 0:
        raise DegenerateDataError("no samples")
    top = float(np.max(amps))
    if top == float(np.min(amps)) or top <= 0.0:
        raise DegenerateDataError("all samples are equal; histogram is degenerate")
    counts, edges = np.histogram(amps, bins=int(bins), range=(0.0, top))
    dens = counts / (amps.size * np.diff(edges))
    return HistogramDensity(edges, dens, int(amps.size))


@dataclass(frozen=True)
class ParametricModel:
    spec: KernelSpec
    fit_mse: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not math.isfinite(self.fit_mse) or self.fit_mse < 0:
            raise FitError(f"fit_mse must be finite and >= 0, got {self.fit_mse}")
        if not self.name:
            object.__setattr__(self, "name", f"param-{self.spec.family.value}")

    def pdf(self, x):
        arr = np.asarray(x, dtype=float)
        out = _kmath.evaluate(self.spec.code, self.spec.a, self.spec.b, arr, 0, strict=False)
        return float(out) if arr.ndim == 0 else out

    def ccdf(self, x):
        return kernel_ccdf(self.spec, x)

    def bounds(self):
        if self.spec.family is Family.GAUSSIAN:
            return self.spec.a - 40.0 * self.spec.b, self.spec.a + 40.0 * self.spec.b
        return support_window(self.spec, spread=40.0)

    def to_dict(self):
        return {"family": self.spec.family.value, "params": self.spec.params,
                "fit_mse": self.fit_mse}

    @classmethod
    def from_dict(cls, d):
        return cls(KernelSpec.from_params(d["family"], d["params"]), float(d.get("fit_mse", 0.0)))


def parametric_pdf(m: ParametricModel, x):
    return m.pdf(x)


def parametric_ccdf(m: ParametricModel, x):
    return m.ccdf(x)


def _moment_start(family, target):
    c, w = target.centers, target.densities * target.widths
    w = w / w.sum()
    m = float(np.dot(c, w))
    v = max(float(np.dot(c * c, w)) - m * m, 1e-12 * max(m * m, 1.0))
    if family is Family.GAUSSIAN:
        return np.array([m, math.sqrt(v)])
    m = max(m, 1e-12)
    if family is Family.GAMMA:
        return np.array([m * m / v, m / v])
    s = min(max((math.sqrt(v) / m) ** -1.086, 0.2), 20.0)
    return np.array([m / math.gamma(1.0 + 1.0 / s), s])


def _to_theta(family, p):
    if family is Family.GAUSSIAN:
        return np.array([p[0], math.log(p[1])])
    return np.log(p)


def _from_theta(family, th):
    if family is Family.GAUSSIAN:
        return KernelSpec(family, th[0], math.exp(th[1]))
    return KernelSpec(family, math.exp(th[0]), math.exp(th[1]))


def mse_against(spec: KernelSpec, target: HistogramDensity):
    model = _kmath.evaluate(spec.code, spec.a, spec.b, target.centers, 0, strict=False)
    return float(np.mean((model - target.densities) ** 2))


def fit_parametric(family, target: HistogramDensity, restarts=20, seed=0,
                   maxiter=4000) -> ParametricModel:
    """Least-squares fit of a family PDF to a histogram.

    Positive parameters are optimized in log space, which keeps every trial
    point valid. The first start is moment matched; the other
    ``restarts - 1`` jitter it by log-normal factors (sd 0.75) drawn from
    ``numpy.random.default_rng(seed)``.
    """
    family = Family.parse(family)
    scale = float(np.mean(target.densities ** 2)) or 1.0
    base = _to_theta(family, _moment_start(family, target))
    rng = np.random.default_rng(seed)
    starts = [base]
    for _ in range(max(int(restarts), 1) - 1):
        jit = rng.normal(0.0, 0.75, size=2)
        if family is Family.GAUSSIAN:
            starts.append(base + np.array([jit[0] * math.exp(base[1]), jit[1]]))
        else:
            starts.append(base + jit)

    def objective(th):
        if not np.all(np.isfinite(th)) or np.any(np.abs(th[1:] if family is Family.GAUSSIAN else th) > 50):
            return np.inf
        try:
            val = mse_against(_from_theta(family, th), target) / scale
        except (ValueError, OverflowError, FloatingPointError):
            return np.inf
        return val if math.isfinite(val) else np.inf

    best = None
    for th0 in starts:
        with np.errstate(all="ignore"):
            res = optimize.minimize(objective, th0, method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-14,
                                             "maxiter": maxiter, "maxfev": 2 * maxiter})
        if not np.isfinite(res.fun):
            continue
        spec = _from_theta(family, res.x)
        key = (res.fun, spec.a, spec.b)
        if best is None or key < best[0]:
            best = (key, spec)
    if best is None:
        raise FitError(f"{family.value} fit failed from every start")
    spec = best[1]
    return ParametricModel(spec, mse_against(spec, target))


def fit_all(target: HistogramDensity, restarts=20, seed=0):
    return {fam: fit_parametric(fam, target, restarts, seed) for fam in Family}

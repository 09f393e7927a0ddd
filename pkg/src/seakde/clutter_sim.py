"""Synthetic sea-clutter cells with known ground truth.

Random numbers come from numpy's PCG64 bit generator seeded with the
scenario's 64-bit seed. Cells are drawn in cell-id order from one stream.

Clutter families (amplitude domain):

``rayleigh``  scale sigma_r; pdf (x/sigma_r^2) exp(-x^2 / 2 sigma_r^2).
``weibull``   scale c, shape s; pdf (s/c)(x/c)^(s-1) exp(-(x/c)^s).
``k``         shape nu, mean power P; Rayleigh speckle whose local power
              is a Gamma(nu, rate nu) texture times P. The amplitude pdf is
              (4/Gamma(nu)) b^(nu+1) x^nu K_(nu-1)(2 b x), b = sqrt(nu/P).

Target returns in the primary cell: with Rayleigh clutter the target is a
steady phasor added to the complex Gaussian return (Rician amplitude); with
the other families the target amplitude is added to the clutter amplitude.
Each primary-cell sample independently carries the target with probability
``target_fraction``.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError
from .samples_io import CellLabel, Dataset, SampleSet

_SEED_MAX = 2 ** 64 - 1


class ClutterFamily(str, Enum):
    RAYLEIGH = "rayleigh"
    WEIBULL = "weibull"
    K_COMPOUND = "k"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"rayleigh": cls.RAYLEIGH, "weibull": cls.WEIBULL,
                   "weibullclutter": cls.WEIBULL, "k": cls.K_COMPOUND,
                   "kcompound": cls.K_COMPOUND, "kdistribution": cls.K_COMPOUND}
        if key not in aliases:
            raise ConfigError(f"unknown clutter family {value!r}")
        return aliases[key]


_PARAMS = {
    ClutterFamily.RAYLEIGH: ("scale",),
    ClutterFamily.WEIBULL: ("c", "s"),
    ClutterFamily.K_COMPOUND: ("shape", "mean_power"),
}
# families usable without explicit parameters
_DEFAULTS = {ClutterFamily.RAYLEIGH: {"scale": 1.0}}


@dataclass(frozen=True)
class ClutterScenario:
    clutter_family: ClutterFamily = ClutterFamily.RAYLEIGH
    params: dict = field(default_factory=lambda: {"scale": 1.0})
    target_amplitude: float = 0.0
    target_fraction: float = 0.0
    n_cells: int = 14
    samples_per_cell: int = 2048
    rng_seed: int = 0

    def __post_init__(self):
        fam = ClutterFamily.parse(self.clutter_family)
        object.__setattr__(self, "clutter_family", fam)
        names = _PARAMS[fam]
        extra = set(self.params) - set(names)
        missing = [n for n in names if n not in self.params]
        if extra or missing:
            raise ConfigError(f"{fam.value} clutter takes parameters {names}, "
                              f"got {sorted(self.params)}")
        vals = {n: float(self.params[n]) for n in names}
        for n, v in vals.items():
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{fam.value} parameter {n} must be finite and > 0, got {v}")
        object.__setattr__(self, "params", vals)
        if not (math.isfinite(self.target_amplitude) and self.target_amplitude >= 0):
            raise DomainError(f"target_amplitude must be >= 0, got {self.target_amplitude}")
        if not (0.0 <= self.target_fraction < 1.0):
            raise DomainError(f"target_fraction must lie in [0, 1), got {self.target_fraction}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ConfigError(f"n_cells must be a positive integer, got {self.n_cells}")
        if self.target_fraction > 0 and self.n_cells < 2:
            raise ConfigError("a target scenario needs at least one clutter cell besides the primary")
        if int(self.samples_per_cell) != self.samples_per_cell or self.samples_per_cell < 1:
            raise ConfigError(f"samples_per_cell must be a positive integer, got {self.samples_per_cell}")
        if int(self.rng_seed) != self.rng_seed or not (0 <= self.rng_seed <= _SEED_MAX):
            raise ConfigError(f"rng_seed must be an integer in [0, 2^64), got {self.rng_seed}")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "samples_per_cell", int(self.samples_per_cell))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))

    @property
    def primary_index(self):
        """Cell id carrying the target, or None."""
        return self.n_cells // 2 if self.target_fraction > 0 else None

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        fam = ClutterFamily.parse(d.pop("family", d.pop("clutter_family", "rayleigh")))
        params = d.pop("params", None)
        if params is None:
            params = {n: d.pop(n) for n in _PARAMS[fam] if n in d}
        if not params:
            params = dict(_DEFAULTS.get(fam, {}))
        known = {"target_amplitude", "target_fraction", "n_cells", "samples_per_cell", "rng_seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
        return cls(fam, params, **d)

    def to_dict(self):
        return {"family": self.clutter_family.value, "params": dict(self.params),
                "target_amplitude": self.target_amplitude,
                "target_fraction": self.target_fraction, "n_cells": self.n_cells,
                "samples_per_cell": self.samples_per_cell, "rng_seed": self.rng_seed}


def _clutter(sc: ClutterScenario, rng, n):
    p = sc.params
    if sc.clutter_family is ClutterFamily.RAYLEIGH:
        return p["scale"] * rng.rayleigh(1.0, n)
    if sc.clutter_family is ClutterFamily.WEIBULL:
        return p["c"] * rng.weibull(p["s"], n)
    nu, power = p["shape"], p["mean_power"]
    texture = rng.gamma(nu, 1.0 / nu, n)
    # rayleigh(1) has mean square 2
    return np.sqrt(0.5 * power * texture) * rng.rayleigh(1.0, n)


def _with_target(sc: ClutterScenario, rng, n):
    carries = rng.random(n) < sc.target_fraction
    a = sc.target_amplitude
    if sc.clutter_family is ClutterFamily.RAYLEIGH:
        sd = sc.params["scale"]
        i = sd * rng.standard_normal(n)
        q = sd * rng.standard_normal(n)
        return np.hypot(i + np.where(carries, a, 0.0), q)
    return _clutter(sc, rng, n) + np.where(carries, a, 0.0)


def generate(scenario: ClutterScenario, name=None) -> Dataset:
    """Draw every cell of the scenario; deterministic in ``rng_seed``."""
    rng = np.random.Generator(np.random.PCG64(scenario.rng_seed))
    n = scenario.samples_per_cell
    src = f"sim:{scenario.clutter_family.value}:seed={scenario.rng_seed}"
    cells = []
    for cid in range(scenario.n_cells):
        if cid == scenario.primary_index:
            cells.append(SampleSet(cid, CellLabel.PRIMARY, _with_target(scenario, rng, n), src))
        else:
            cells.append(SampleSet(cid, CellLabel.CLUTTER_ONLY, _clutter(scenario, rng, n), src))
    return Dataset(name or f"{scenario.clutter_family.value}-{scenario.rng_seed}", tuple(cells))


def _k_log_b(sc):
    return 0.5 * math.log(sc.params["shape"] / sc.params["mean_power"])


def true_pdf(scenario: ClutterScenario, x):
    """Clutter amplitude pdf of the scenario (0 for x < 0)."""
    arr = np.asarray(x, dtype=float)
    xs = np.atleast_1d(arr)
    out = np.zeros(xs.shape)
    pos = xs > 0
    z = xs[pos]
    p = scenario.params
    fam = scenario.clutter_family
    if fam is ClutterFamily.RAYLEIGH:
        s2 = p["scale"] ** 2
        out[pos] = z / s2 * np.exp(-0.5 * z * z / s2)
    elif fam is ClutterFamily.WEIBULL:
        c, s = p["c"], p["s"]
        t = z / c
        out[pos] = s / c * np.exp((s - 1.0) * np.log(t) - t ** s)
        if s == 1.0:
            out[xs == 0] = 1.0 / c
        elif s < 1.0:
            out[xs == 0] = np.inf
    else:
        nu = p["shape"]
        lb = _k_log_b(scenario)
        b = math.exp(lb)
        with np.errstate(divide="ignore"):
            logv = (math.log(4.0) - special.gammaln(nu) + (nu + 1.0) * lb
                    + nu * np.log(z) + np.log(special.kve(nu - 1.0, 2.0 * b * z)) - 2.0 * b * z)
        out[pos] = np.exp(logv)
        if nu == 0.5:
            out[xs == 0] = 2.0 * b
        elif nu < 0.5:
            out[xs == 0] = np.inf
    return float(out[0]) if arr.ndim == 0 else out


def true_ccdf(scenario: ClutterScenario, x):
    """P(amplitude > x) for the clutter family."""
    arr = np.asarray(x, dtype=float)
    xs = np.atleast_1d(arr)
    out = np.ones(xs.shape)
    pos = xs > 0
    z = xs[pos]
    p = scenario.params
    fam = scenario.clutter_family
    if fam is ClutterFamily.RAYLEIGH:
        out[pos] = np.exp(-0.5 * (z / p["scale"]) ** 2)
    elif fam is ClutterFamily.WEIBULL:
        out[pos] = np.exp(-(z / p["c"]) ** p["s"])
    else:
        nu = p["shape"]
        b = math.exp(_k_log_b(scenario))
        u = 2.0 * b * z
        logv = (math.log(2.0) - special.gammaln(nu) + nu * np.log(0.5 * u)
                + np.log(special.kve(nu, u)) - u)
        out[pos] = np.exp(logv)
    return float(out[0]) if arr.ndim == 0 else out


@dataclass(frozen=True)
class TrueClutterModel:
    """The scenario's clutter distribution as a density model."""
    scenario: ClutterScenario
    name: str = "truth"

    def pdf(self, x):
        return true_pdf(self.scenario, x)

    def ccdf(self, x):
        return true_ccdf(self.scenario, x)

    def bounds(self):
        hi = 1.0
        while true_ccdf(self.scenario, hi) > 1e-16:
            hi *= 2.0
        return 0.0, hi

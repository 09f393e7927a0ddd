"""AMISE-optimal bandwidths as fixed points.

The plug-in estimate of R(f'') is the integral of the squared second
derivative of the KDE itself, so the optimal bandwidth solves
``h = psi(h)`` with

* Gaussian: psi(h) = (sigma^2 + mu^2)^2 Q(h) / (sqrt(pi) sigma^5 N)
* Gamma:    psi(h) = (2 beta)^(2 alpha - 1) Gamma(alpha + 2)^2 W(h)
                     / (Gamma(2 alpha - 1) Gamma(alpha)^2 N)
* Weibull:  psi(h) = 2^(2 - 1/s) Gamma(2/s + 1)^2 s V(h) / (Gamma(2 - 1/s) c N)

where Q, W, V integrate the squared sum of the per-sample K'' bracket terms
over x. All three are the same identity
``psi(h) = mu2^2 N h^6 R_plugin(h) / R(K)``, i.e. ``h_AMISE(R_plugin(h))^5
= h^6 / psi(h)``.

Convergence note: ``psi(h) / h`` tends to ``mu2^2 R(K'') / R(K)`` as h -> 0
and grows with h, so where a fixed point exists it repels the plain update
``h <- psi(h)``. :func:`solve_bandwidth` therefore defaults to a safeguarded
update in log h with the same stopping rule and the same fixed points;
``scheme="direct"`` reproduces the plain iteration.
"""

from dataclasses import dataclass, field, asdict
import json
import logging
import math

import numpy as np

from . import _accel, _kmath
from .errors import ConfigError, DomainError, NumericalError, SolverError
from .kernels import (Family, KernelSpec, MomentMode, roughness, second_derivative_scale,
                      kernel_std, second_moment, support_window)
from .samples_io import SampleSet

log = logging.getLogger(__name__)

SCHEMES = ("safeguarded", "direct")


@dataclass(frozen=True)
class FixedPointConfig:
    h0: float = 0.1
    tol: float = 1e-3
    max_iter: int = 50
    scheme: str = "safeguarded"

    def __post_init__(self):
        if not (self.h0 > 0 and math.isfinite(self.h0)):
            raise ConfigError(f"h0 must be > 0, got {self.h0}")
        if not (0.0 < self.tol < 1.0):
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True)
class QuadratureConfig:
    grid_points: int = 8192
    window_spread_multiplier: float = 10.0
    singularity_epsilon: float = 1e-6
    moment_mode: MomentMode = MomentMode.PAPER

    def __post_init__(self):
        if int(self.grid_points) != self.grid_points or self.grid_points < 2:
            raise ConfigError(f"grid_points must be an integer >= 2, got {self.grid_points}")
        if not self.window_spread_multiplier > 0:
            raise ConfigError("window_spread_multiplier must be > 0")
        if not self.singularity_epsilon > 0:
            raise ConfigError("singularity_epsilon must be > 0")
        object.__setattr__(self, "moment_mode", MomentMode(self.moment_mode))


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    h: float
    psi: float
    rel_change: float


@dataclass(frozen=True)
class BandwidthResult:
    """Outcome of the fixed-point search.

    ``h_opt`` is the value fed into psi on the accepted iteration (the
    pre-update value), matching the stopping rule. When not converged it is
    the last evaluated point and ``status`` says why the loop ended:
    ``max_iter``, ``diverged`` or ``underflow``.
    """
    h_opt: float
    iterations: tuple
    converged: bool
    status: str = "converged"
    kernel: KernelSpec = None

    def to_jsonl(self):
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.iterations)

    def to_dict(self):
        out = {"h_opt": self.h_opt, "converged": self.converged, "status": self.status,
               "iterations": len(self.iterations),
               "trace": [asdict(r) for r in self.iterations]}
        if self.kernel is not None:
            out["kernel"] = {"family": self.kernel.family.value, "params": self.kernel.params}
        return out


def _samples(samples):
    if isinstance(samples, SampleSet):
        return samples.amplitudes
    return np.asarray(samples, dtype=float).ravel()


# AMISE and the closed-form minimizer ----------------------------------------

def amise_from_constants(r_k, mu2, h, n, r_f2):
    return r_k / (n * h) + 0.25 * h ** 4 * mu2 ** 2 * r_f2


def amise(k: KernelSpec, h, n, r_f2, moment_mode=MomentMode.PAPER):
    """Variance term R(K)/(N h) plus squared-bias term h^4 mu2^2 R(f'') / 4."""
    if h <= 0 or n <= 0 or r_f2 <= 0:
        raise DomainError(f"amise needs positive h, N, R(f''); got {h}, {n}, {r_f2}")
    return amise_from_constants(roughness(k), second_moment(k, moment_mode), h, n, r_f2)


def h_from_constants(r_k, mu2, n, r_f2):
    if r_f2 <= 0:
        raise DomainError(f"R(f'') must be > 0, got {r_f2}")
    return (r_k / (mu2 ** 2 * r_f2 * n)) ** 0.2


def h_amise_closed_form(k: KernelSpec, n, r_f2, moment_mode=MomentMode.PAPER):
    """[R(K) / (mu2^2 R(f'') N)]^(1/5), the minimizer of :func:`amise`."""
    return h_from_constants(roughness(k), second_moment(k, moment_mode), n, r_f2)


# Plug-in R(f'') ---------------------------------------------------------------

def quadrature_grid(k: KernelSpec, samples, h, q: QuadratureConfig):
    """Simpson nodes covering every kernel bump (even number of intervals)."""
    x = _samples(samples)
    zlo, zhi = support_window(k, q.window_spread_multiplier)
    lo = float(x.min()) + h * zlo
    hi = float(x.max()) + h * zhi
    n = int(q.grid_points) + int(q.grid_points) % 2
    return np.linspace(lo, hi, n + 1)


def _simpson(values, dx):
    w = np.ones(values.size)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(dx / 3.0 * np.dot(w, values))


# Bracket terms below e^-60 of the kernel constant are skipped; each skipped
# term moves the integral by a relative ~N e^-60 at most.
BRACKET_LOG_CUT = -60.0


def bracket_sum(k: KernelSpec, samples, h, x, eps=0.0):
    """sum_i P_i (or G_i, L_i) at points x, with z_i = (x - x_i)/h."""
    s = _accel.kernel_sum(np.asarray(x, dtype=float), _samples(samples), h,
                          k.code, k.a, k.b, 2, eps)
    return s / second_derivative_scale(k)


def _bracket_on_grid(k, x, h, grid, eps, backend=None):
    s = _accel.grid_kernel_sum(grid[0], grid[-1], grid.size - 1, x, h, k.code, k.a, k.b,
                               2, eps, backend=backend, log_cut=BRACKET_LOG_CUT)
    return s / second_derivative_scale(k)


def _singular_power(k):
    # (coefficient, exponent) of the leading bracket term near z = 0 when it
    # is a negative power, in z units; None when the bracket is bounded
    if not k.one_sided:
        return None
    for coef, expo in _kmath._pole_exponents(k.code, k.a, k.b, 2):
        if coef != 0.0 and expo < 0.0:
            if k.family is Family.WEIBULL:
                return coef * k.a ** (-expo), expo
            return coef, expo
        if coef != 0.0:
            return None
    return None


def _log_exclusion(k, n, h, q):
    lead = _singular_power(k)
    if lead is None:
        return
    coef, expo = lead
    radius = q.singularity_epsilon * h
    p = 2.0 * expo + 1.0
    if p > 0:
        dropped = n * h * coef ** 2 * q.singularity_epsilon ** p / p
        log.info("bracket integrand ~ z^%.3g at each sample; excluded (x_i, x_i + %.3g), "
                 "dropped mass ~ %.3g", expo, radius, dropped)
    else:
        log.warning("bracket integrand ~ z^%.3g is not square integrable at sample points; "
                    "value depends on the exclusion radius %.3g", expo, radius)


def bracket_integral(k: KernelSpec, samples, h, q: QuadratureConfig = QuadratureConfig(),
                     backend=None):
    """Q(h), W(h) or V(h): integral over x of (sum_i bracket_i)^2.

    Composite Simpson on ``q.grid_points`` intervals. Bracket terms of
    one-sided kernels vanish for z_i <= 0 and are forced to 0 for
    0 < z_i < ``q.singularity_epsilon``.
    """
    x = _samples(samples)
    if x.size == 0:
        return 0.0
    if not h > 0:
        raise DomainError(f"bandwidth must be > 0, got {h}")
    grid = quadrature_grid(k, x, h, q)
    vals = _bracket_on_grid(k, x, h, grid, q.singularity_epsilon, backend)
    if not np.all(np.isfinite(vals)):
        bad = grid[~np.isfinite(vals)][0]
        near = x[np.argmin(np.abs(x - bad))]
        raise NumericalError(f"non-finite bracket integrand at x={bad:.6g} "
                             f"(nearest sample {near:.6g})")
    _log_exclusion(k, x.size, h, q)
    return _simpson(vals * vals, grid[1] - grid[0])


def plugin_prefactor(k: KernelSpec, n, h):
    """Squared K'' normalizer over (N h^3)^2; Gaussian gives 1/(2 pi (N h^3 sigma^3)^2)."""
    return second_derivative_scale(k) ** 2 / (n * h ** 3) ** 2


def plugin_r_f2(k: KernelSpec, samples, h, q: QuadratureConfig = QuadratureConfig()):
    """Plug-in R(f''): integral of the squared second derivative of the KDE."""
    x = _samples(samples)
    return plugin_prefactor(k, x.size, h) * bracket_integral(k, x, h, q)


# psi and Algorithm 1 ---------------------------------------------------------

def psi_coefficient(k: KernelSpec, n):
    """Factor multiplying Q, W or V in the fixed-point map."""
    if k.family is Family.GAUSSIAN:
        mu, sigma = k.a, k.b
        return (sigma ** 2 + mu ** 2) ** 2 / (math.sqrt(math.pi) * sigma ** 5 * n)
    if k.family is Family.GAMMA:
        alpha, beta = k.a, k.b
        if 2.0 * alpha - 1.0 <= 0:
            raise DomainError(f"Gamma fixed point needs 2*alpha - 1 > 0, got alpha={alpha}")
        logc = ((2.0 * alpha - 1.0) * math.log(2.0 * beta) + 2.0 * math.lgamma(alpha + 2.0)
                - math.lgamma(2.0 * alpha - 1.0) - 2.0 * math.lgamma(alpha))
        return math.exp(logc) / n
    c, s = k.a, k.b
    if 2.0 - 1.0 / s <= 0:
        raise DomainError(f"Weibull fixed point needs s > 1/2, got s={s}")
    return (2.0 ** (2.0 - 1.0 / s) * math.gamma(2.0 / s + 1.0) ** 2 * s
            / (math.gamma(2.0 - 1.0 / s) * c * n))


def psi(k: KernelSpec, samples, h, q: QuadratureConfig = QuadratureConfig()):
    """Fixed-point map for the kernel family (Gaussian, Gamma, Weibull)."""
    x = _samples(samples)
    val = psi_coefficient(k, x.size) * bracket_integral(k, x, h, q)
    if not (math.isfinite(val) and val > 0):
        raise SolverError(f"degenerate fixed-point map: psi({h:.6g}) = {val!r}")
    return val


def _safeguarded_next(points):
    """Next log-bandwidth from the evaluated (u, F) history, F = log psi - u.

    With a sign change on record: Illinois false position on the tightest
    bracket. Without one: secant through the last two points, or the
    AMISE re-substitution step u - F/5 when the secant points the wrong
    way, capped at a factor 4.
    """
    u, f = points[-1]
    lower = [p for p in points if p[1] < 0]
    upper = [p for p in points if p[1] > 0]
    if lower and upper:
        (ua, fa), (ub, fb) = min(((a, b) for a in lower for b in upper),
                                 key=lambda ab: abs(ab[0][0] - ab[1][0]))
        if len(points) >= 2 and points[-2][1] * f > 0:
            if (ua, fa) == (u, f):
                fb *= 0.5
            elif (ub, fb) == (u, f):
                fa *= 0.5
        un = ub - fb * (ub - ua) / (fb - fa)
        lo, hi = min(ua, ub), max(ua, ub)
        if not (lo < un < hi):
            un = 0.5 * (lo + hi)
        return un
    step = -f / 5.0
    if len(points) >= 2:
        u0, f0 = points[-2]
        if u != u0 and f != f0:
            sec = -f * (u - u0) / (f - f0)
            # a secant against the sign of -F would walk back over visited points
            if math.isfinite(sec) and sec * f < 0:
                step = sec
    cap = math.log(4.0)
    return u + max(-cap, min(cap, step))


def fixed_point_iterate(psi_fn, cfg: FixedPointConfig = FixedPointConfig(), h_floor=0.0,
                        kernel=None):
    """Bandwidth selection loop.

    Each pass evaluates h_new = psi(h0) and stops when |(h_new - h0)/h_new|
    < tol, returning h0. Otherwise h0 is replaced by h_new (``direct``) or
    by a safeguarded secant / false-position step in log h that targets
    the same fixed point (``safeguarded``).
    """
    h0 = float(cfg.h0)
    trace = []
    points = []
    for i in range(1, int(cfg.max_iter) + 1):
        h_new = float(psi_fn(h0))
        if not (math.isfinite(h_new) and h_new > 0):
            raise SolverError(f"psi({h0:.6g}) = {h_new!r} at iteration {i}", trace)
        rel = abs((h_new - h0) / h_new)
        trace.append(IterationRecord(i, h0, h_new, rel))
        log.debug("iter %d h=%.6g psi=%.6g rel=%.3g", i, h0, h_new, rel)
        if rel < cfg.tol:
            return BandwidthResult(h0, tuple(trace), True, "converged", kernel)
        if i == cfg.max_iter:
            break
        if cfg.scheme == "direct":
            if h_new > 10.0 * h0:
                log.warning("fixed-point iteration diverging: psi(%.4g) = %.4g", h0, h_new)
                return BandwidthResult(h0, tuple(trace), False, "diverged", kernel)
            nxt = h_new
        else:
            u = math.log(h0)
            f = math.log(h_new) - u
            points.append((u, f))
            nxt = math.exp(_safeguarded_next(points))
        if nxt < h_floor:
            log.warning("bandwidth %.4g fell below the resolvable floor %.4g; "
                        "psi(h) > h on the whole path (no fixed point found)", nxt, h_floor)
            return BandwidthResult(h0, tuple(trace), False, "underflow", kernel)
        h0 = nxt
    return BandwidthResult(h0, tuple(trace), False, "max_iter", kernel)


def resolvable_floor(k: KernelSpec, samples, q: QuadratureConfig, points_per_spread=None):
    """Smallest h whose kernel spread still spans a few quadrature nodes.

    Simpson's rule on a Gaussian integrand is accurate to ~e^-39 relative
    at 2 nodes per kernel sd, so 2 is the Gaussian default. One-sided
    kernels have a kink at z = 0 and get 8.
    """
    x = _samples(samples)
    if points_per_spread is None:
        points_per_spread = 8 if k.one_sided else 2
    dx = (float(x.max()) - float(x.min())) / q.grid_points
    return points_per_spread * dx / kernel_std(k)


def solve_bandwidth(k: KernelSpec, samples, cfg: FixedPointConfig = FixedPointConfig(),
                    q: QuadratureConfig = QuadratureConfig()) -> BandwidthResult:
    """Solve h = psi(h) for the kernel on the given samples."""
    x = _samples(samples)
    if x.size == 0:
        raise ConfigError("no samples")
    floor = resolvable_floor(k, x, q)
    return fixed_point_iterate(lambda h: psi(k, x, h, q), cfg, h_floor=floor, kernel=k)


# Brute-force oracle ------------------------------------------------------------

def log_grid(lo=1e-3, hi=1.0, n=200):
    return np.geomspace(lo, hi, n)


def amise_profile(k: KernelSpec, samples, h_grid, q: QuadratureConfig = QuadratureConfig()):
    """AMISE with the plug-in R(f'') evaluated at each grid bandwidth (nan if degenerate)."""
    x = _samples(samples)
    r_k = roughness(k)
    mu2 = second_moment(k, q.moment_mode)
    out = np.full(len(h_grid), np.nan)
    for j, h in enumerate(h_grid):
        try:
            r = plugin_r_f2(k, x, float(h), q)
        except NumericalError:
            continue
        if math.isfinite(r) and r > 0:
            out[j] = amise_from_constants(r_k, mu2, float(h), x.size, r)
    return out


def brute_force_h_opt(k: KernelSpec, samples, h_grid, q: QuadratureConfig = QuadratureConfig()):
    """Grid argmin of AMISE(h) with R(f'') plugged in at the same h."""
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.size == 0:
        raise ConfigError("empty bandwidth grid")
    if np.any(np.diff(h_grid) <= 0):
        raise ConfigError("bandwidth grid must be strictly increasing")
    prof = amise_profile(k, samples, h_grid, q)
    if not np.any(np.isfinite(prof)):
        raise SolverError("AMISE degenerate at every grid bandwidth")
    # nanargmin returns the first minimum: ties go to the smaller h
    return float(h_grid[int(np.nanargmin(prof))])


def first_local_min(profile):
    """Index of the smallest-h interior local minimum, else the global argmin.

    For h far wider than the data the plug-in R(f'') decays like h^-5, so
    both AMISE terms fall like 1/h and the profile turns down again at the
    top of the grid. The first interior minimum is the meaningful one.
    """
    p = np.asarray(profile, dtype=float)
    idx = np.flatnonzero(np.isfinite(p))
    if idx.size == 0:
        raise SolverError("AMISE degenerate at every grid bandwidth")
    v = p[idx]
    for m in range(1, v.size - 1):
        if v[m] <= v[m - 1] and v[m] < v[m + 1]:
            return int(idx[m])
    return int(idx[np.argmin(v)])


def coarse_to_fine_h_opt(k: KernelSpec, samples, h_grid, q: QuadratureConfig = QuadratureConfig(),
                         stride=5):
    """First local AMISE minimum on the grid, found coarse to fine.

    Every ``stride``-th point is evaluated first; the grid points within
    one stride of the coarse minimum are then filled in.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.size == 0 or np.any(np.diff(h_grid) <= 0):
        raise ConfigError("bandwidth grid must be non-empty and strictly increasing")
    coarse = np.arange(0, h_grid.size, stride)
    if coarse[-1] != h_grid.size - 1:
        coarse = np.append(coarse, h_grid.size - 1)
    prof = np.full(h_grid.size, np.nan)
    prof[coarse] = amise_profile(k, samples, h_grid[coarse], q)
    # unevaluated points are nan, so this scans the coarse points only
    j = first_local_min(prof)
    near = np.arange(max(j - stride, 0), min(j + stride, h_grid.size - 1) + 1)
    todo = near[np.isnan(prof[near])]
    prof[todo] = amise_profile(k, samples, h_grid[todo], q)
    window = prof[near]
    if not np.any(np.isfinite(window)):
        return float(h_grid[j])
    return float(h_grid[near[int(np.nanargmin(window))]])


@dataclass(frozen=True)
class BandwidthChoice:
    h: float
    method: str
    result: BandwidthResult = field(default=None, repr=False)


def select_bandwidth(k: KernelSpec, samples, cfg: FixedPointConfig = FixedPointConfig(),
                     q: QuadratureConfig = QuadratureConfig(), fallback_grid=None):
    """Fixed-point bandwidth, falling back to the AMISE grid minimizer.

    The fallback is used when the fixed-point search does not converge,
    which is the normal outcome for kernels where psi(h) > h everywhere.
    """
    res = solve_bandwidth(k, samples, cfg, q)
    if res.converged:
        return BandwidthChoice(res.h_opt, "fixed-point", res)
    grid = log_grid() if fallback_grid is None else np.asarray(fallback_grid, dtype=float)
    h = coarse_to_fine_h_opt(k, samples, grid, q)
    log.info("%s kernel: fixed point not found (%s); AMISE grid minimizer h=%.4g",
             k.family.value, res.status, h)
    return BandwidthChoice(h, "amise-grid", res)

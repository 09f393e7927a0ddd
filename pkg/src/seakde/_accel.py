"""Hot loops: kernel sums over samples.

Two interchangeable backends compute ``sum_i K^(m)((x - x_i) / h)``:

* numba ``@njit`` loops over sorted samples (default when numba imports),
* a chunked numpy broadcast (fallback, also the reference in tests).

Set ``SEAKDE_DISABLE_NUMBA=1`` before import to force the numpy path.
Samples are summed in ascending order, so each backend is bitwise
reproducible; the two backends agree to rounding.

Terms are skipped once they are provably below ``exp(log_cut)`` relative to
the kernel's normalizing constant. The default cut (-800 minus the log
constant) only drops terms that underflow anyway; the bracket integrals
pass a relative cut of -60, see :mod:`seakde.bandwidth`.
"""

import math
import os

import numpy as np

from . import _kmath

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_DISABLED = os.environ.get("SEAKDE_DISABLE_NUMBA", "").strip().lower() in {
    "1", "true", "yes", "on"}
USE_NUMBA = numba is not None and not NUMBA_DISABLED

EXACT = None
_LOG_TINY = -800.0
_CHUNK = 512
_ANCHOR_EVERY = 32


def default_backend():
    return "numba" if USE_NUMBA else "numpy"


def cutoff(code, a, b, order, rel_log):
    """Standardized range [zlo, zhi] outside which |bracket| < exp(rel_log)."""
    coefs = [1.0] if code == _kmath.GAUSSIAN else [
        abs(c) for c, _ in _kmath._pole_exponents(code, a, b, order)]
    if code == _kmath.GAUSSIAN:
        # |bracket| <= max(b^2, b, 1) (t^2 + 1) exp(-t^2 / 2)
        need = -rel_log + math.log(max(b * b, b, 1.0))
        t = math.sqrt(2.0 * max(need, 1.0))
        for _ in range(4):
            t = math.sqrt(2.0 * (max(need, 1.0) + math.log1p(t * t)))
        return a - t * b, a + t * b
    if code == _kmath.GAMMA:
        const = math.log(sum(coefs) + 1.0)
        bound = lambda z: const + (a - 1.0) * math.log(z) - b * z
        z = max(1.0, a / b)
        while bound(z) > rel_log:
            z *= 1.25
        return 0.0, z
    const = math.log((sum(coefs) + 1.0) * max(a * a, a, 1.0))
    bound = lambda t: const + 3.0 * b * math.log(t) - t ** b
    t = 1.0
    while bound(t) > rel_log:
        t *= 1.25
    return 0.0, a * t


def _rel_log(code, a, b, log_cut):
    if log_cut is None:
        return _LOG_TINY - float(_kmath.log_norm(code, a, b))
    return float(log_cut)


def _prep(samples):
    return np.sort(np.asarray(samples, dtype=float).ravel())


def kernel_sum_numpy(xq, samples, h, code, a, b, order=0, eps=0.0, log_cut=EXACT):
    """Reference path: every term evaluated, no cutoff."""
    xq = np.asarray(xq, dtype=float)
    samples = _prep(samples)
    out = np.zeros(xq.shape[0])
    for start in range(0, samples.shape[0], _CHUNK):
        blk = samples[start:start + _CHUNK]
        z = (xq[:, None] - blk[None, :]) / h
        vals = _kmath.evaluate(code, a, b, z, order=order, eps=eps, strict=False)
        out += vals.sum(axis=1)
    return out


if numba is not None:

    @numba.njit(cache=True)
    def _term(z, code, a, b, order, eps, lognorm, at0):
        if code == 0:
            t = (z - a) / b
            e = math.exp(lognorm - 0.5 * t * t)
            if order == 0:
                return b * b * e
            if order == 1:
                return -b * t * e
            return (t * t - 1.0) * e
        if z < 0.0:
            return 0.0
        if z == 0.0:
            if order > 0 and eps > 0.0:
                return 0.0
            return at0
        if order > 0 and z < eps:
            return 0.0
        if code == 1:
            # z^(a-1) e^(lognorm - b z); lower powers by division
            p1 = math.exp(lognorm - b * z + (a - 1.0) * math.log(z))
            if order == 0:
                return p1
            if order == 1:
                return p1 * ((a - 1.0) / z - b)
            return p1 * ((a - 1.0) * (a - 2.0) / (z * z) - 2.0 * b * (a - 1.0) / z + b * b)
        lt = math.log(z / a)
        ts = math.exp(b * lt)
        if order == 0:
            return a * a * math.exp(lognorm - ts + (b - 1.0) * lt)
        if order == 1:
            return a * math.exp(lognorm - ts + (b - 2.0) * lt) * ((b - 1.0) - b * ts)
        return math.exp(lognorm - ts + (b - 3.0) * lt) * (
            (b - 1.0) * (b - 2.0) - 3.0 * b * (b - 1.0) * ts + b * b * ts * ts)

    @numba.njit(cache=True)
    def _pointwise_loop(xq, samples, h, code, a, b, order, eps, lognorm, at0, zlo, zhi):
        out = np.empty(xq.shape[0])
        for j in range(xq.shape[0]):
            x = xq[j]
            i0 = np.searchsorted(samples, x - h * zhi, side="left")
            i1 = np.searchsorted(samples, x - h * zlo, side="right")
            acc = 0.0
            for i in range(i0, i1):
                acc += _term((x - samples[i]) / h, code, a, b, order, eps, lognorm, at0)
            out[j] = acc
        return out

    @numba.njit(cache=True)
    def _grid_loop(lo, step, last, m, samples, h, code, a, b, order, eps, lognorm, at0,
                   zlo, zhi):
        # grid x_j = j * step + lo (numpy.linspace arithmetic), x_{m-1} = last
        out = np.zeros(m)
        for i in range(samples.shape[0]):
            xi = samples[i]
            j0 = int(math.floor((xi + h * zlo - lo) / step)) - 1
            j1 = int(math.ceil((xi + h * zhi - lo) / step)) + 1
            if j0 < 0:
                j0 = 0
            if j1 > m - 1:
                j1 = m - 1
            for j in range(j0, j1 + 1):
                x = last if j == m - 1 else j * step + lo
                out[j] += _term((x - xi) / h, code, a, b, order, eps, lognorm, at0)
        return out

    @numba.njit(cache=True)
    def _grid_loop_gauss2(lo, step, last, m, samples, h, mu, sigma, lognorm, tcut, anchor):
        # Gaussian P-bracket with exp recurrence between exact anchors:
        # e_{j+1} = e_j g_j, g_{j+1} = g_j q, q = exp(-d^2), d = step / (h sigma)
        out = np.zeros(m)
        d = step / (h * sigma)
        q = math.exp(-d * d)
        for i in range(samples.shape[0]):
            xi = samples[i]
            j0 = int(math.floor((xi + h * (mu - tcut * sigma) - lo) / step)) - 1
            j1 = int(math.ceil((xi + h * (mu + tcut * sigma) - lo) / step)) + 1
            if j0 < 0:
                j0 = 0
            if j1 > m - 1:
                j1 = m - 1
            t = 0.0
            e = 0.0
            g = 0.0
            for j in range(j0, j1 + 1):
                if (j - j0) % anchor == 0 or j == m - 1 or d > 0.5:
                    x = last if j == m - 1 else j * step + lo
                    t = ((x - xi) / h - mu) / sigma
                    e = math.exp(lognorm - 0.5 * t * t)
                    g = math.exp(-t * d - 0.5 * d * d)
                else:
                    e *= g
                    g *= q
                    t += d
                out[j] += (t * t - 1.0) * e
        return out


def _at0(code, a, b, order):
    if code == _kmath.GAUSSIAN:
        return 0.0
    lim = _kmath.value_at_zero(code, a, b, order)
    # right limit already includes the normalizing constant
    return 0.0 if lim is None else float(lim)


def kernel_sum_numba(xq, samples, h, code, a, b, order=0, eps=0.0, log_cut=EXACT):
    if numba is None:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    xq = np.ascontiguousarray(xq, dtype=float)
    lognorm = float(_kmath.log_norm(code, a, b))
    zlo, zhi = cutoff(code, a, b, order, _rel_log(code, a, b, log_cut))
    return _pointwise_loop(xq, _prep(samples), float(h), int(code), float(a), float(b),
                           int(order), float(eps), lognorm, _at0(code, a, b, order),
                           float(zlo), float(zhi))


def kernel_sum(xq, samples, h, code, a, b, order=0, eps=0.0, backend=None, log_cut=EXACT):
    """Kernel sum at arbitrary query points."""
    backend = backend or default_backend()
    if backend == "numba":
        return kernel_sum_numba(xq, samples, h, code, a, b, order, eps, log_cut)
    if backend == "numpy":
        return kernel_sum_numpy(xq, samples, h, code, a, b, order, eps, log_cut)
    raise ValueError(f"unknown backend {backend!r}")


def grid_kernel_sum(lo, hi, intervals, samples, h, code, a, b, order=0, eps=0.0,
                    backend=None, log_cut=EXACT):
    """Kernel sum on ``numpy.linspace(lo, hi, intervals + 1)``.

    The numba path loops samples outermost and touches only the grid nodes
    inside each sample's cutoff window.
    """
    backend = backend or default_backend()
    m = int(intervals) + 1
    if backend == "numpy":
        return kernel_sum_numpy(np.linspace(lo, hi, m), samples, h, code, a, b, order, eps)
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    step = (hi - lo) / (m - 1)
    lognorm = float(_kmath.log_norm(code, a, b))
    rel = _rel_log(code, a, b, log_cut)
    zlo, zhi = cutoff(code, a, b, order, rel)
    srt = _prep(samples)
    if code == _kmath.GAUSSIAN and order == 2:
        tcut = (zhi - a) / b
        return _grid_loop_gauss2(float(lo), step, float(hi), m, srt, float(h), float(a),
                                 float(b), lognorm, tcut, _ANCHOR_EVERY)
    return _grid_loop(float(lo), step, float(hi), m, srt, float(h), int(code), float(a),
                      float(b), int(order), float(eps), lognorm, _at0(code, a, b, order),
                      float(zlo), float(zhi))

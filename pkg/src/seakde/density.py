"""Common surface shared by KDE and parametric models.

Anything with ``pdf``, ``ccdf`` and ``bounds`` works with the detector and
the fit metrics.
"""

import math
from typing import Protocol, Tuple

import numpy as np

from .errors import NumericalError, TailResolutionError


MONOTONE_SLACK = 1e-12


class DensityModel(Protocol):
    name: str

    def pdf(self, x): ...

    def ccdf(self, x): ...

    def bounds(self) -> Tuple[float, float]:
        """Interval outside which the density is negligible (lower may be -inf)."""
        ...


def inverse_ccdf(model, q, rtol=1e-6, max_iter=400):
    """Bisection for ``model.ccdf(x) == q``.

    Runs on x until the bracket collapses to adjacent floats, so the result
    does not depend on how steep the tail is. The returned x satisfies
    ``|ccdf(x) - q| <= rtol * q``; otherwise :class:`TailResolutionError`.
    """
    if not (0.0 < q < 1.0):
        raise ValueError(f"probability must lie in (0, 1), got {q}")
    lo, hi = model.bounds()
    if not math.isfinite(lo):
        lo = _expand(model, q, start=hi, direction=-1.0)
    f_lo = float(model.ccdf(lo))
    if f_lo < q:
        raise NumericalError(f"ccdf at lower bound {lo!r} is {f_lo} < {q}")
    f_hi = float(model.ccdf(hi))
    if f_hi > q:
        hi = _expand(model, q, start=hi, direction=1.0, origin=lo)
        f_hi = float(model.ccdf(hi))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = float(model.ccdf(mid))
        if not math.isfinite(f_mid):
            raise NumericalError(f"non-finite ccdf at x={mid!r}")
        # summation rounding moves a CCDF by a few ulps; anything larger is real
        slack = MONOTONE_SLACK * max(f_lo, 1e-300)
        if f_mid > f_lo + slack or f_mid < f_hi - slack:
            raise NumericalError(
                f"ccdf not monotone near x={mid!r}: {f_lo} >= {f_mid} >= {f_hi} violated")
        if f_mid > q:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    # pick the side closest in probability
    x, fx = (lo, f_lo) if abs(f_lo - q) <= abs(f_hi - q) else (hi, f_hi)
    if abs(fx - q) > rtol * q:
        raise TailResolutionError(
            f"cannot resolve ccdf={q:g}: closest value {fx:.6g} at x={x:.6g}")
    return x


def _expand(model, q, start, direction, origin=None):
    step = max(abs(start), 1.0)
    x = start
    for _ in range(200):
        x = x + direction * step
        step *= 2.0
        v = float(model.ccdf(x))
        if (direction > 0 and v <= q) or (direction < 0 and v >= q):
            return x
    raise TailResolutionError(f"ccdf never crosses {q:g} (tail too heavy or q too small)")


def grid_between(model, n=512, tail=1e-4):
    """Uniform grid from the lower support edge to the (1 - tail) quantile."""
    lo, _ = model.bounds()
    hi = inverse_ccdf(model, tail)
    if not math.isfinite(lo):
        lo = inverse_ccdf(model, 1.0 - tail)
    return np.linspace(lo, hi, n)

"""Vectorized kernel formulas keyed by integer family code.

Codes: 0 Gaussian (a=mu, b=sigma), 1 Gamma (a=alpha, b=beta),
2 Weibull (a=c, b=s). ``order`` selects K, K' or K''. Kept free of
package imports so both accelerator backends can share it.
"""

import numpy as np
from scipy.special import gammaln

from .errors import SingularityError

GAUSSIAN, GAMMA, WEIBULL = 0, 1, 2
_SQRT2PI = np.sqrt(2.0 * np.pi)


def log_norm(code, a, b):
    """Log of the constant multiplying the K'' bracket (P, G or L term)."""
    if code == GAUSSIAN:
        return -np.log(_SQRT2PI) - 3.0 * np.log(b)
    if code == GAMMA:
        return a * np.log(b) - gammaln(a)
    return np.log(b) - 3.0 * np.log(a)


def _pole_exponents(code, a, b, order):
    # (coefficient, exponent of z) pairs of the power terms multiplying the
    # exponential factor; used only to decide what happens at z == 0.
    if code == GAMMA:
        al, be = a, b
        if order == 0:
            return [(1.0, al - 1.0)]
        if order == 1:
            return [(al - 1.0, al - 2.0), (-be, al - 1.0)]
        return [((al - 1.0) * (al - 2.0), al - 3.0),
                (-2.0 * be * (al - 1.0), al - 2.0), (be * be, al - 1.0)]
    s = b
    if order == 0:
        return [(1.0, s - 1.0)]
    if order == 1:
        return [(s - 1.0, s - 2.0), (-s, 2.0 * s - 2.0)]
    return [((s - 1.0) * (s - 2.0), s - 3.0), (-3.0 * s * (s - 1.0), 2.0 * s - 3.0),
            (s * s, 3.0 * s - 3.0)]


def value_at_zero(code, a, b, order):
    """Right limit at z = 0 for a one-sided kernel, or ``None`` at a pole."""
    total = 0.0
    for coef, expo in _pole_exponents(code, a, b, order):
        if coef == 0.0 or expo > 0.0:
            continue
        if expo < 0.0:
            return None
        total += coef
    if code == GAMMA:
        return float(np.exp(log_norm(code, a, b))) * total
    scale = (b / a, b / a ** 2, b / a ** 3)[order]
    return scale * total


def bracket(code, a, b, z, order=2):
    """Unnormalized kernel derivative: P_i, G_i or L_i for order 2.

    No support masking; callers handle z <= 0 for one-sided kernels.
    """
    if code == GAUSSIAN:
        t = (z - a) / b
        e = np.exp(-0.5 * t * t)
        if order == 0:
            return b * b * e
        if order == 1:
            return -b * t * e
        return (t * t - 1.0) * e
    if code == GAMMA:
        al, be = a, b
        e = np.exp(-be * z)
        if order == 0:
            return e * z ** (al - 1.0)
        if order == 1:
            return e * ((al - 1.0) * z ** (al - 2.0) - be * z ** (al - 1.0))
        return e * ((al - 1.0) * (al - 2.0) * z ** (al - 3.0)
                    - 2.0 * be * (al - 1.0) * z ** (al - 2.0)
                    + be * be * z ** (al - 1.0))
    c, s = a, b
    t = z / c
    ts = t ** s
    e = np.exp(-ts)
    if order == 0:
        return c * c * e * t ** (s - 1.0)
    if order == 1:
        return c * e * t ** (s - 2.0) * ((s - 1.0) - s * ts)
    return e * t ** (s - 3.0) * ((s - 1.0) * (s - 2.0) - 3.0 * s * (s - 1.0) * ts
                                 + s * s * ts * ts)


def evaluate(code, a, b, z, order=0, eps=0.0, strict=True):
    """K^(order)(z) for an array of standardized arguments.

    One-sided kernels vanish for z < 0. Inside ``(0, eps)`` derivative terms
    are dropped (singularity exclusion). At z == 0 the right limit is used;
    a pole raises in ``strict`` mode and contributes 0 otherwise.
    """
    z = np.asarray(z, dtype=float)
    scale = np.exp(log_norm(code, a, b))
    if code == GAUSSIAN:
        # bracket() carries sigma^2 / sigma for orders 0 / 1
        return scale * bracket(code, a, b, z, order)
    out = np.zeros_like(z)
    pos = z > 0.0
    if order > 0 and eps > 0.0:
        pos &= z >= eps
    if np.any(pos):
        with np.errstate(over="ignore", invalid="ignore"):
            out[pos] = scale * bracket(code, a, b, z[pos], order)
    at0 = z == 0.0
    if np.any(at0) and not (order > 0 and eps > 0.0):
        lim = value_at_zero(code, a, b, order)
        if lim is None:
            if strict:
                raise SingularityError(
                    f"kernel derivative of order {order} has a pole at z=0")
            lim = 0.0
        out[at0] = lim
    return out

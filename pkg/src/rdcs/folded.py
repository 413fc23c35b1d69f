"""Folded normal distribution |N(r, 1)| and its bias-aware critical value.

critical_value(alpha, r) is the (1-alpha)-quantile of |N(r, 1)|: the usual
two-sided normal quantile at r = 0, approaching r + z_{1-alpha} as the
bias-to-sd ratio r grows.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri  # |error| <= 1e-15 for the normal CDF

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def folded_cdf(x, r):
    """CDF of |N(r, 1)| at x >= 0: Phi(x - r) - Phi(-x - r)."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(x < 0):
        raise ValueError("folded_cdf requires x >= 0")
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("folded_cdf requires finite r >= 0")
    out = ndtr(x - r) - ndtr(-x - r)
    if out.ndim == 0:
        return float(out)
    return out


def critical_value(alpha: float, r):
    """(1-alpha)-quantile of |N(r, 1)|, elementwise in r.

    For r >= 4 the lower folding term is below machine precision and the
    quantile is exactly r + z_{1-alpha}; below that, a bracket-safeguarded
    Newton iteration solves the quantile equation to ~1e-12 absolute.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or not np.all(np.isfinite(r_arr)):
        raise ValueError("critical_value requires finite r >= 0")
    scalar = r_arr.ndim == 0
    r_arr = np.atleast_1d(r_arr)
    target = 1.0 - alpha
    z_one = ndtri(target)            # one-sided quantile
    z_two = ndtri(1.0 - alpha / 2.0)  # two-sided quantile at r = 0
    out = np.empty_like(r_arr)

    # past this point the lower folding term is below machine precision
    far = r_arr >= 4.0 + max(0.0, -z_one)
    out[far] = r_arr[far] + z_one

    near = ~far
    if near.any():
        rn = r_arr[near]
        lo = np.maximum(rn + z_one, 0.0)   # folded CDF there is <= target
        hi = rn + z_two                    # folded CDF there is >= target
        z = 0.5 * (lo + hi)
        for _ in range(40):
            f = ndtr(z - rn) - ndtr(-z - rn) - target
            lo = np.where(f < 0.0, z, lo)
            hi = np.where(f >= 0.0, z, hi)
            fp = (np.exp(-0.5 * (z - rn) ** 2)
                  + np.exp(-0.5 * (z + rn) ** 2)) / _SQRT_2PI
            step = np.where(fp > 0.0, f / np.maximum(fp, 1e-300), 0.0)
            z_new = z - step
            inside = (z_new > lo) & (z_new < hi)
            z = np.where(inside, z_new, 0.5 * (lo + hi))
            if np.all(hi - lo < 1e-13):
                break
        out[near] = z
    if scalar:
        return float(out[0])
    return out

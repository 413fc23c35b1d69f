"""Worst-case bias bounds, conditional standard deviations, and the
projection-based nearest-neighbor variance estimator.

The variance estimator replaces the usual local-average nearest-neighbor
residual with the residual from a best linear predictor over the neighbor
set, which removes the slope-proportional bias term and leaves only a
curvature-proportional one.  Variance, covariance, and cross terms share
one projection, so sigma2_m(c) = sig2_y + c^2 sig2_t - 2c sig_yt is an
exact square and never negative beyond floating-point noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .data import Sample, SmoothnessBounds
from .errors import DataError, DegenerateVarianceError
from .local_poly import WeightVector


@dataclass(frozen=True)
class NnVarianceComponents:
    """Per-observation variance pieces from the neighbor projection.

    sig2_m(c) = sig2_y + c^2 sig2_t - 2 c sig_yt reconstructs the variance
    of the composite outcome y - c t for any c without revisiting the data.
    """

    sig2_y: np.ndarray
    sig2_t: np.ndarray
    sig_yt: np.ndarray
    r_used: np.ndarray
    h_leverage: np.ndarray

    def composite(self, c: float) -> np.ndarray:
        """Variance estimates of y - c*t, clipped at zero."""
        vals = self.sig2_y + c * c * self.sig2_t - 2.0 * c * self.sig_yt
        return np.maximum(vals, 0.0)


@dataclass(frozen=True)
class BiasSdBundle:
    """Estimate, worst-case bias bound, standard error, and their ratio
    for the composite outcome at one (bandwidth, c) pair."""

    tau_hat: float
    bias_bound: float
    sd: float
    ratio: float
    h: tuple[float, float]
    c: float


def _side_neighbor_stats(xs, ys, ts, r_neighbors):
    """Projection residual components for one side's sorted arrays.

    Neighbor sets are contiguous in sorted order, found by two-pointer
    expansion; exact distance ties at the r-th rank are all included.
    """
    m = len(xs)
    if m < 2:
        raise DataError("nearest-neighbor variances need >= 2 points per side")
    cy = np.concatenate([[0.0], np.cumsum(ys)])
    ct = np.concatenate([[0.0], np.cumsum(ts)])
    cx = np.concatenate([[0.0], np.cumsum(xs)])
    cxx = np.concatenate([[0.0], np.cumsum(xs * xs)])
    cxy = np.concatenate([[0.0], np.cumsum(xs * ys)])
    cxt = np.concatenate([[0.0], np.cumsum(xs * ts)])

    def window_sum(csum, lo, hi, pos):
        # sum over sorted positions [lo, hi] excluding pos
        return csum[hi + 1] - csum[lo] - (csum[pos + 1] - csum[pos])

    s2y = np.empty(m)
    s2t = np.empty(m)
    syt = np.empty(m)
    r_used = np.empty(m, dtype=int)
    lever = np.empty(m)
    for pos in range(m):
        lo = hi = pos
        count = 0
        d_last = 0.0
        while count < r_neighbors and (lo > 0 or hi < m - 1):
            dl = xs[pos] - xs[lo - 1] if lo > 0 else np.inf
            dr = xs[hi + 1] - xs[pos] if hi < m - 1 else np.inf
            if dl <= dr:
                lo -= 1
                d_last = dl
            else:
                hi += 1
                d_last = dr
            count += 1
        # include every point tied with the r-th smallest distance
        while lo > 0 and xs[pos] - xs[lo - 1] == d_last:
            lo -= 1
            count += 1
        while hi < m - 1 and xs[hi + 1] - xs[pos] == d_last:
            hi += 1
            count += 1
        k = count
        x_i = xs[pos]
        min_nb = xs[lo] if lo < pos else xs[pos + 1]
        max_nb = xs[hi] if hi > pos else xs[pos - 1]
        s0 = float(k)
        s1 = window_sum(cx, lo, hi, pos)
        s2 = window_sum(cxx, lo, hi, pos)
        sy = window_sum(cy, lo, hi, pos)
        st_ = window_sum(ct, lo, hi, pos)
        sxy = window_sum(cxy, lo, hi, pos)
        sxt = window_sum(cxt, lo, hi, pos)
        if min_nb == max_nb:
            # single distinct neighbor location: intercept-only predictor
            h_i = 1.0 / s0
            y_hat = sy / s0
            t_hat = st_ / s0
        else:
            det = s0 * s2 - s1 * s1
            h_i = (s2 - 2.0 * x_i * s1 + s0 * x_i * x_i) / det
            y_hat = ((s2 - x_i * s1) * sy + (x_i * s0 - s1) * sxy) / det
            t_hat = ((s2 - x_i * s1) * st_ + (x_i * s0 - s1) * sxt) / det
        scale = 1.0 / (1.0 + h_i)
        ey = ys[pos] - y_hat
        et = ts[pos] - t_hat
        s2y[pos] = ey * ey * scale
        s2t[pos] = et * et * scale
        syt[pos] = ey * et * scale
        r_used[pos] = k
        lever[pos] = h_i
    return s2y, s2t, syt, r_used, lever


def nn_variances(sample: Sample, r_neighbors: int = 5) -> NnVarianceComponents:
    """Nearest-neighbor variance components, neighbors restricted to the
    observation's own side of the cutoff."""
    if r_neighbors < 1:
        raise DataError("r_neighbors must be >= 1")
    sample.require_both_sides()
    n = sample.n
    out = [np.empty(n), np.empty(n), np.empty(n),
           np.empty(n, dtype=int), np.empty(n)]
    for mask in (sample.right, ~sample.right):
        idx = np.flatnonzero(mask)
        order = np.argsort(sample.x[idx], kind="stable")
        idx = idx[order]
        pieces = _side_neighbor_stats(sample.x[idx], sample.y[idx],
                                      sample.t[idx], r_neighbors)
        for target, piece in zip(out, pieces):
            target[idx] = piece
    return NnVarianceComponents(*out)


def _bias_geometry(wv: WeightVector) -> tuple[float, float]:
    """Per-side bias factors g_plus, g_minus (both nonnegative).

    The worst-case bias over the smoothness class with per-side caps
    (b_minus, b_plus) on the (p+1)-th derivative is
        (b_plus * g_plus + b_minus * g_minus) / (p+1)!.
    The side signs follow from the sign pattern of the one-sided remainder
    kernel: (-1)^(p-v) * sum_right w_plus x^(p+1) and
    -sum_left w_minus x^(p+1) are nonnegative.
    """
    parity = (-1.0) ** (wv.p - wv.v)
    xp1 = wv.x ** (wv.p + 1)
    g_plus = parity * float(wv.w_plus @ xp1)
    g_minus = -float(wv.w_minus @ xp1)
    # exact nonnegativity holds mathematically; tolerate rounding
    return max(g_plus, 0.0), max(g_minus, 0.0)


def bias_bound_vp(wv: WeightVector, bounds: SmoothnessBounds, c: float) -> float:
    """Worst-case conditional bias of the composite-outcome estimator for
    general derivative/polynomial orders."""
    by_minus, by_plus = bounds.y_sides
    bt_minus, bt_plus = bounds.t_sides
    g_plus, g_minus = _bias_geometry(wv)
    scale = 1.0 / factorial(wv.p + 1)
    return scale * ((by_plus + abs(c) * bt_plus) * g_plus
                    + (by_minus + abs(c) * bt_minus) * g_minus)


def bias_bound(wv: WeightVector, bounds: SmoothnessBounds, c: float) -> float:
    """Worst-case bias for the local linear jump estimator (v=0, p=1)."""
    if (wv.v, wv.p) != (0, 1):
        raise ValueError("bias_bound expects v=0, p=1 weights; "
                         "use bias_bound_vp for general orders")
    return bias_bound_vp(wv, bounds, c)


def worst_case_dep(x: np.ndarray, v: int, p: int,
                   b_plus: float, b_minus: float) -> np.ndarray:
    """Piecewise polynomial attaining the bias bound with equality.

    Plugged into the jump estimator it returns exactly +bias_bound (its
    true v-th derivative jump at zero is 0, so the estimate is pure bias).
    """
    parity = (-1.0) ** (p - v)
    xp1 = x ** (p + 1) / factorial(p + 1)
    return np.where(x >= 0, parity * b_plus * xp1, b_minus * xp1)


def aux_bundle(sample: Sample, wv: WeightVector, nv: NnVarianceComponents,
               bounds: SmoothnessBounds, c: float) -> BiasSdBundle:
    """Estimate, bias bound, and standard error for y - c*t at wv's bandwidth."""
    m = sample.y - c * sample.t
    tau_hat = float(wv.w @ m)
    var = float((wv.w * wv.w) @ nv.composite(c))
    if var <= 0.0:
        raise DegenerateVarianceError(
            "all in-window variance estimates are zero; the standard error "
            "of the jump estimator is degenerate"
        )
    sd = float(np.sqrt(var))
    bb = bias_bound_vp(wv, bounds, c)
    return BiasSdBundle(tau_hat=tau_hat, bias_bound=bb, sd=sd,
                        ratio=bb / sd, h=wv.h, c=c)

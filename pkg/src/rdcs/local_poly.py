"""Local polynomial regression weights at the cutoff.

Each side of the cutoff gets its own kernel-weighted least squares fit on
the regressors (1, x, x^2/2!, ..., x^p/p!); the selector weights for the
(v+1)-th coefficient express the fitted v-th derivative at zero as a linear
combination of the dependent variable.  The jump estimator is then the
difference of the two linear combinations, w_i = w_{i,+} - w_{i,-}.

Per-side systems are solved by QR on the sqrt-kernel-weighted design with
regressors rescaled by the bandwidth, which keeps the moment matrix well
conditioned even when the window contains barely p+1 points.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .data import FitSpec, Sample
from .errors import InsufficientSupportError
from .kernels import kernel_value


@dataclass(frozen=True)
class WeightVector:
    """Estimator weights w = w_plus - w_minus at a concrete bandwidth pair.

    Carries the running variable and the fit description so downstream
    bias/variance formulas do not need to be handed the sample again.
    """

    w: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    x: np.ndarray
    h: tuple[float, float]
    v: int
    p: int
    kernel: str
    effective_n_plus: int
    effective_n_minus: int


def _side_weights(x_abs: np.ndarray, h: float, kernel: str, p: int, v: int,
                  side: str) -> np.ndarray:
    """Selector weights for one side, x_abs = |x| of that side's points."""
    k = kernel_value(kernel, x_abs / h)
    inside = k > 0.0
    n_distinct = len(np.unique(x_abs[inside]))
    if n_distinct < p + 1:
        raise InsufficientSupportError(side, h, p + 1, n_distinct)
    z = x_abs[inside] / h
    design = np.column_stack([z**j / factorial(j) for j in range(p + 1)])
    sqrt_k = np.sqrt(k[inside])
    q, r = np.linalg.qr(design * sqrt_k[:, None])
    # gamma solves (D'D) gamma = e_{v+1} via two triangular solves
    rhs = np.zeros(p + 1)
    rhs[v] = 1.0
    try:
        gamma = np.linalg.solve(r, np.linalg.solve(r.T, rhs))
    except np.linalg.LinAlgError:
        raise InsufficientSupportError(side, h, p + 1, n_distinct) from None
    w = np.zeros_like(x_abs)
    w[inside] = (design @ gamma) * k[inside] / h**v
    return w


def weights(sample: Sample, spec: FitSpec) -> WeightVector:
    """Jump-estimator weights for the given sample and fit description.

    The convention x = 0 belongs to the right (treated) side.  Left-side
    weights are computed on reflected magnitudes, so the returned w_minus
    are the weights of the left-side fitted v-th derivative; for odd v the
    reflection sign is already folded in.
    """
    h_minus, h_plus = spec.bandwidths
    right = sample.right
    w_plus = np.zeros(sample.n)
    w_minus = np.zeros(sample.n)
    w_plus[right] = _side_weights(sample.x[right], h_plus, spec.kernel,
                                  spec.p, spec.v, "right")
    # reflect the left side onto [0, inf); the v-th derivative of f(-u)
    # picks up a factor (-1)^v
    w_left = _side_weights(-sample.x[~right], h_minus, spec.kernel,
                           spec.p, spec.v, "left")
    w_minus[~right] = (-1.0) ** spec.v * w_left
    return WeightVector(
        w=w_plus - w_minus,
        w_plus=w_plus,
        w_minus=w_minus,
        x=sample.x,
        h=(h_minus, h_plus),
        v=spec.v,
        p=spec.p,
        kernel=spec.kernel,
        effective_n_plus=int(np.count_nonzero(w_plus)),
        effective_n_minus=int(np.count_nonzero(w_minus)),
    )


def srd_estimate(sample: Sample, dep, spec: FitSpec) -> float:
    """Jump (of the v-th derivative) estimator: sum_i w_i(h) dep_i."""
    wv = weights(sample, spec)
    return float(wv.w @ sample.dep(dep))


def w_ratio(wv: WeightVector) -> float:
    """Maximum normalized squared weight, max_j w_j^2 / sum_i w_i^2.

    Values near 1 mean the estimator behaves like an average of very few
    observations and normal approximations are suspect.
    """
    sq = wv.w * wv.w
    total = sq.sum()
    if total <= 0.0:
        raise ValueError("all weights are zero")
    return float(sq.max() / total)

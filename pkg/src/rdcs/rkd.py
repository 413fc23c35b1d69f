"""Confidence sets for ratios of derivative jumps (fuzzy kink designs).

The whole inversion pipeline is order-generic, so this module mostly
re-parametrizes it: order-(v, p) weights, the generalized bias bound, and
the same root search and shape classification.  Orders are capped at
p <= 3, the range over which the one-sided sign property backing the bias
bound has been verified.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import factorial
from typing import Optional

import numpy as np

from .data import AnalysisConfig, FitSpec, Sample, SmoothnessBounds
from .errors import DataError
from .inversion import ConfidenceSet, compute_cs
from .local_poly import _side_weights


@dataclass(frozen=True)
class RkdSpec:
    """Derivative order v and polynomial order p (default v+1), with
    curvature bounds on the (p+1)-th derivative."""

    v: int = 1
    p: Optional[int] = None
    bounds: Optional[SmoothnessBounds] = None

    def __post_init__(self):
        p = self.v + 1 if self.p is None else self.p
        object.__setattr__(self, "p", p)
        if not (0 <= self.v <= self.p):
            raise DataError("need 0 <= v <= p")
        if self.p > 3:
            raise DataError(
                "polynomial orders above 3 are not supported: the bias "
                "bound's sign property is only verified for p <= 3"
            )


def rkd_cs(sample: Sample, cfg: AnalysisConfig, spec: RkdSpec,
           expansion_cap: int = 3) -> ConfidenceSet:
    """Bias-aware inversion confidence set for the v-th derivative jump
    ratio, using order-p local polynomial regression."""
    fit = FitSpec(kernel=cfg.fit.kernel, p=spec.p, v=spec.v,
                  bandwidth=cfg.fit.bandwidth)
    bounds = spec.bounds if spec.bounds is not None else cfg.bounds
    cfg_vp = replace(cfg, fit=fit, bounds=bounds)
    return compute_cs(sample, cfg_vp, expansion_cap=expansion_cap)


def beta_vp(t: float, chi, v: int, p: int, kernel: str = "triangular",
            h: Optional[float] = None) -> float:
    """(v+1)-th coefficient of the one-sided weighted regression of
    1{x >= t} (x - t)^p on the scaled polynomial basis over chi.

    For t below min(chi) the target is an exact degree-p polynomial and
    the coefficient is p!/(p-v)! * (-t)^(p-v); for t above max(chi) it is
    zero.  In between its sign is (-1)^(p-v), the property underpinning
    the worst-case bias bound.
    """
    chi = np.asarray(chi, dtype=float)
    if np.any(chi < 0.0):
        raise DataError("chi must lie in [0, h)")
    if len(np.unique(chi)) < p + 1:
        raise DataError("chi needs at least p+1 distinct elements")
    if h is None:
        h = float(chi.max()) * (1.0 + 1e-9) + 1e-300
    if np.any(chi >= h):
        raise DataError("chi must lie strictly inside [0, h)")
    w = _side_weights(chi, h, kernel, p, v, "right")
    target = np.where(chi >= t, (chi - t) ** p, 0.0)
    return float(w @ target)


def beta_vp_polynomial_value(t: float, v: int, p: int) -> float:
    """Closed form of beta_vp when every element of chi exceeds t."""
    return factorial(p) / factorial(p - v) * (-t) ** (p - v)

"""Test inversion: pseudo-p-value, root bracketing, and the shape-tagged
confidence set.

Membership of a candidate c in the confidence set is equivalent to
p_hat(c) >= 0, where p_hat is one minus the level minus the folded-normal
CDF evaluated at the composite t-ratio.  The set is assembled from the
roots of p_hat on a grid, with the tails decided by whether zero lies in a
bias-aware CI for the treatment jump: when it does, both half-lines belong
to the set because the two t-ratios coincide as |c| grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .bandwidth import CandidateProfile, ar_profile, ar_sd2
from .data import AnalysisConfig, FitSpec, Sample
from .errors import ClassificationError, WeakIdentificationError
from .folded import critical_value, folded_cdf
from .moments import NnVarianceComponents, nn_variances

SHAPES = ("interval", "complement_of_interval", "real_line",
          "half_line_left", "half_line_right",
          # with a c-dependent bandwidth the pseudo-p-value can have more
          # than two roots; the root search then pairs them into disjoint
          # pieces exactly as the fixed-h cases are assembled
          "union_of_intervals", "complement_of_union")


@dataclass(frozen=True)
class AuxInference:
    """Auxiliary-statistic inference record at a single candidate c."""

    c: float
    tau_hat: float
    sd: float
    bias_bound: float
    ratio: float
    h_used: float
    p_value: float

    def to_dict(self) -> dict:
        return {
            "c": self.c, "tau_hat": self.tau_hat, "sd": self.sd,
            "bias_bound": self.bias_bound, "ratio": self.ratio,
            "h_used": self.h_used, "p_value": self.p_value,
        }


@dataclass(frozen=True)
class SrdCi:
    """Bias-aware CI for a jump estimated by a single local regression."""

    estimate: float
    lo: float
    hi: float
    sd: float
    bias_bound: float
    ratio: float
    h_used: float
    alpha: float

    @property
    def half_length(self) -> float:
        return 0.5 * (self.hi - self.lo)


@dataclass(frozen=True)
class ConfidenceSet:
    shape: str
    endpoints: tuple
    alpha: float
    tau_t_ci: tuple
    diagnostics: tuple = field(default_factory=tuple)
    expansions: int = 0

    def __contains__(self, c: float) -> bool:
        return self.covers(float(c))

    def pieces(self) -> list:
        """The set as a list of (lo, hi) pieces, +-inf for open tails."""
        e = self.endpoints
        if self.shape == "real_line":
            return [(-np.inf, np.inf)]
        if self.shape == "interval":
            return [(e[0], e[1])]
        if self.shape == "complement_of_interval":
            return [(-np.inf, e[0]), (e[1], np.inf)]
        if self.shape == "half_line_left":
            return [(-np.inf, e[0])]
        if self.shape == "half_line_right":
            return [(e[0], np.inf)]
        if self.shape == "union_of_intervals":
            return [(e[2 * k], e[2 * k + 1]) for k in range(len(e) // 2)]
        # complement_of_union: tails plus interior pieces
        inner = [(e[2 * k + 1], e[2 * k + 2]) for k in range((len(e) - 2) // 2)]
        return [(-np.inf, e[0])] + inner + [(e[-1], np.inf)]

    def covers(self, c: float) -> bool:
        return any(lo <= c <= hi for lo, hi in self.pieces())

    @property
    def length(self) -> float:
        total = 0.0
        for lo, hi in self.pieces():
            if not (np.isfinite(lo) and np.isfinite(hi)):
                return np.inf
            total += hi - lo
        return total

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "endpoints": list(self.endpoints),
            "alpha": self.alpha,
            "tau_t_ci": list(self.tau_t_ci),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "expansions": self.expansions,
        }


class _Evaluator:
    """Evaluates p_hat(c) against a fixed candidate profile."""

    def __init__(self, profile: CandidateProfile, cfg: AnalysisConfig):
        self.profile = profile
        self.cfg = cfg

    def __call__(self, c: float) -> AuxInference:
        prof, cfg = self.profile, self.cfg
        sd2 = ar_sd2(prof, c)
        bias = prof.bias_terms(cfg.bounds, c)
        idx, bres = prof.optimize(sd2, bias, cfg.alpha, cfg.eta)
        tau = prof.A["y"][idx] - c * prof.A["t"][idx]
        sd = float(np.sqrt(sd2[idx]))
        ratio = float(bias[idx]) / sd
        p_val = 1.0 - cfg.alpha - folded_cdf(abs(tau / sd), ratio)
        return AuxInference(c=c, tau_hat=float(tau), sd=sd,
                            bias_bound=float(bias[idx]), ratio=ratio,
                            h_used=bres.h_used, p_value=float(p_val))


def p_hat(sample: Sample, nv: NnVarianceComponents, cfg: AnalysisConfig,
          c: float) -> AuxInference:
    """Pseudo-p-value record at candidate c; c is in the set iff >= 0."""
    candidates = (np.array([cfg.fixed_bandwidth])
                  if cfg.fixed_bandwidth is not None else None)
    profile = ar_profile(sample, nv, cfg.fit, candidates=candidates)
    return _Evaluator(profile, cfg)(c)


def _dep_variance(sample: Sample, dep, nv: NnVarianceComponents,
                  r_neighbors: int) -> np.ndarray:
    if isinstance(dep, str):
        return nv.sig2_y if dep == "y" else nv.sig2_t
    proxy = Sample(x=sample.x, y=sample.dep(dep),
                   t=np.zeros_like(sample.x))
    return nn_variances(proxy, r_neighbors).sig2_y


def _srd_from_profile(profile: CandidateProfile, bound_sides, alpha: float,
                      eta: float) -> SrdCi:
    """Bias-aware single-jump CI from a prebuilt one-channel profile."""
    from math import factorial

    b_minus, b_plus = bound_sides
    scale = 1.0 / factorial(profile.spec.p + 1)
    bias = scale * (b_plus * profile.g_plus + b_minus * profile.g_minus)
    idx, bres = profile.optimize(profile.V["ww"], bias, alpha, eta)
    est = float(profile.A["w"][idx])
    sd = float(np.sqrt(profile.V["ww"][idx]))
    ratio = float(bias[idx]) / sd
    half = critical_value(alpha, ratio) * sd
    return SrdCi(estimate=est, lo=est - half, hi=est + half, sd=sd,
                 bias_bound=float(bias[idx]), ratio=ratio,
                 h_used=bres.h_used, alpha=alpha)


def srd_ci(sample: Sample, dep, cfg: AnalysisConfig,
           bound=None, nv: Optional[NnVarianceComponents] = None,
           fixed_h: Optional[float] = None) -> SrdCi:
    """Bias-aware CI for a single jump at its length-minimizing bandwidth.

    dep selects the dependent variable ('y', 't', or an array); bound
    overrides the smoothness cap (scalar or (minus, plus) pair), defaulting
    to the config's cap for the selected variable.
    """
    if nv is None:
        nv = nn_variances(sample, cfg.r_neighbors)
    values = sample.dep(dep)
    var = _dep_variance(sample, dep, nv, cfg.r_neighbors)
    if bound is None:
        if not isinstance(dep, str):
            raise ValueError("array dependent variables need an explicit bound")
        bound = cfg.bounds.y_sides if dep == "y" else cfg.bounds.t_sides
    if np.isscalar(bound):
        bound = (float(bound), float(bound))
    if fixed_h is None and cfg.fixed_bandwidth is not None:
        fixed_h = cfg.fixed_bandwidth
    candidates = np.array([fixed_h]) if fixed_h is not None else None
    profile = CandidateProfile(sample, cfg.fit,
                               dep_channels={"w": values},
                               var_channels={"ww": var},
                               candidates=candidates)
    return _srd_from_profile(profile, bound, cfg.alpha, cfg.eta)


def _default_c_range_from(ci_y: SrdCi, ci_t: SrdCi) -> tuple[float, float]:
    """Heuristic plausible range for the ratio parameter; the expansion
    loop is the backstop when it is too narrow."""
    y_scale = abs(ci_y.estimate) + ci_y.half_length
    if ci_t.lo > 0.0 or ci_t.hi < 0.0:
        theta = ci_y.estimate / ci_t.estimate
        denom = min(abs(ci_t.lo), abs(ci_t.hi))
        half = 3.0 * (ci_y.half_length + abs(theta) * ci_t.half_length) / denom
        half = max(half, 0.5 * abs(theta), 1.0)
        return theta - half, theta + half
    denom = max(abs(ci_t.estimate), 0.25 * (ci_t.hi - ci_t.lo), 1e-12)
    half = 4.0 * y_scale / denom + 1.0
    return -half, half


def _default_c_range(sample: Sample, cfg: AnalysisConfig,
                     nv: NnVarianceComponents) -> tuple[float, float]:
    ci_y = srd_ci(sample, "y", cfg, nv=nv)
    ci_t = srd_ci(sample, "t", cfg, nv=nv)
    return _default_c_range_from(ci_y, ci_t)


def _classify(grid_vals, roots, root_records, tau_t_ci, alpha, expansions):
    """Map the sign pattern of the pseudo-p-value to a confidence set.

    The accepted region inside the search window is read off the root list
    and the end signs; the tails are validated against whether zero lies
    in the treatment-jump CI (the two tests agree as |c| grows).  Returns
    None when the pattern is inconsistent, which triggers grid expansion.
    """
    lo_t, hi_t = tau_t_ci
    scale_t = max(abs(lo_t), abs(hi_t))
    knife = min(abs(lo_t), abs(hi_t)) <= 1e-9 * scale_t
    zero_inside = lo_t < 0.0 < hi_t
    s = len(roots)
    left_pos = grid_vals[0] >= 0.0
    right_pos = grid_vals[-1] >= 0.0

    # parity: an odd number of sign changes iff the end signs differ
    if (left_pos != right_pos) != (s % 2 == 1):
        return None
    # tail consistency with the treatment-jump CI
    if left_pos and right_pos and not (zero_inside or knife):
        return None
    if not left_pos and not right_pos and zero_inside and not knife:
        return None
    if (left_pos != right_pos) and not knife:
        return None

    segments = []
    sign = left_pos
    bounds = [-np.inf] + list(roots) + [np.inf]
    for k in range(len(bounds) - 1):
        if sign:
            segments.append((bounds[k], bounds[k + 1]))
        sign = not sign
    if not segments:
        return None

    def cs(shape, endpoints):
        return ConfidenceSet(shape=shape, endpoints=tuple(endpoints),
                             alpha=alpha, tau_t_ci=(lo_t, hi_t),
                             diagnostics=tuple(root_records),
                             expansions=expansions)

    finite = [seg for seg in segments
              if np.isfinite(seg[0]) and np.isfinite(seg[1])]
    open_left = not np.isfinite(segments[0][0])
    open_right = not np.isfinite(segments[-1][1])
    if open_left and open_right:
        if len(segments) == 1:
            return cs("real_line", ())
        flat = [v for seg in segments for v in seg
                if np.isfinite(v)]
        if len(segments) == 2:
            return cs("complement_of_interval", flat)
        return cs("complement_of_union", flat)
    if open_left != open_right:
        if len(segments) > 1:
            return None  # knife edge with extra lobes: treat as no match
        return cs("half_line_left" if open_left else "half_line_right",
                  (segments[0][1] if open_left else segments[0][0],))
    if len(finite) == 1:
        return cs("interval", finite[0])
    return cs("union_of_intervals", [v for seg in finite for v in seg])


def _invert(sample: Sample, cfg: AnalysisConfig, profile: CandidateProfile,
            tau_t_ci: tuple, expansion_cap: int = 3) -> ConfidenceSet:
    evaluator = _Evaluator(profile, cfg)
    if cfg.c_grid is None:
        raise ValueError("c_grid must be resolved before inversion")
    c_lo, c_hi, j_points = cfg.c_grid

    last_diag = {}
    for expansion in range(expansion_cap + 1):
        grid = np.linspace(c_lo, c_hi, j_points + 1)
        records = [evaluator(c) for c in grid]
        vals = np.array([r.p_value for r in records])
        roots = []
        root_records = []
        for j in range(len(grid) - 1):
            a, b = vals[j], vals[j + 1]
            if a == 0.0:
                continue
            if a * b < 0.0:
                xtol = max(1e-8 * (c_hi - c_lo), 1e-15)
                root = brentq(lambda c: evaluator(c).p_value,
                              grid[j], grid[j + 1], xtol=xtol, rtol=1e-14)
                roots.append(float(root))
                root_records.append(evaluator(float(root)))
        exact = [(c, rec) for c, rec in zip(grid, records)
                 if rec.p_value == 0.0]
        for c, rec in exact:
            roots.append(float(c))
            root_records.append(rec)
        order = np.argsort(roots)
        roots = [roots[k] for k in order]
        root_records = [root_records[k] for k in order]
        result = _classify(vals, roots, root_records, tau_t_ci, cfg.alpha,
                           expansion)
        if result is not None:
            return result
        last_diag = {
            "c_range": (c_lo, c_hi),
            "grid_points": int(j_points),
            "roots": roots,
            "p_at_ends": (float(vals[0]), float(vals[-1])),
            "tau_t_ci": tau_t_ci,
        }
        center = 0.5 * (c_lo + c_hi)
        half = (c_hi - c_lo)
        c_lo, c_hi = center - half, center + half
        j_points *= 2
    raise ClassificationError(
        "could not match the sign pattern of the pseudo-p-value to an "
        "admissible confidence-set shape after expanding the search grid",
        diagnostics=last_diag,
    )


def compute_cs(sample: Sample, cfg: AnalysisConfig,
               expansion_cap: int = 3) -> ConfidenceSet:
    """Bias-aware test-inversion confidence set for the jump ratio.

    The bandwidth is re-optimized at every candidate c; the treatment-jump
    CI used for tail classification gets its own optimized bandwidth.
    """
    sample.require_both_sides()
    nv = nn_variances(sample, cfg.r_neighbors)
    if cfg.fixed_bandwidth is not None:
        return compute_cs_fixed_h(sample, cfg, cfg.fixed_bandwidth,
                                  expansion_cap=expansion_cap)
    ci_t = srd_ci(sample, "t", cfg, nv=nv)
    if cfg.c_grid is None:
        lo, hi = _default_c_range(sample, cfg, nv)
        cfg = _with_grid(cfg, lo, hi)
    profile = ar_profile(sample, nv, cfg.fit)
    return _invert(sample, cfg, profile, (ci_t.lo, ci_t.hi),
                   expansion_cap)


def compute_cs_fixed_h(sample: Sample, cfg: AnalysisConfig, h: float,
                       expansion_cap: int = 3) -> ConfidenceSet:
    """Inversion with the bandwidth pinned at h for every candidate c.

    The treatment-jump CI uses the same h, which makes the tail test exact
    and guarantees one of the admissible shapes.
    """
    sample.require_both_sides()
    nv = nn_variances(sample, cfg.r_neighbors)
    ci_t = srd_ci(sample, "t", cfg, nv=nv, fixed_h=h)
    if cfg.c_grid is None:
        lo, hi = _default_c_range(sample, cfg, nv)
        cfg = _with_grid(cfg, lo, hi)
    profile = ar_profile(sample, nv, cfg.fit, candidates=np.array([h]))
    return _invert(sample, cfg, profile, (ci_t.lo, ci_t.hi),
                   expansion_cap)


def _with_grid(cfg: AnalysisConfig, lo: float, hi: float) -> AnalysisConfig:
    from dataclasses import replace
    return replace(cfg, c_grid=(lo, hi, cfg.c_grid[2] if cfg.c_grid else 100))

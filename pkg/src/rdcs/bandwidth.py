"""Bandwidth candidates, the Lindeberg floor, and CI-length minimization.

Weights are piecewise smooth in h with kinks only where observations enter
or leave the window, so for discrete running variables any h strictly
between adjacent support magnitudes yields identical weights.  The search
set is therefore the sorted distinct |x| values together with their
midpoints, truncated to [smallest definable h, max |x|].

The profile object precomputes, for every candidate bandwidth, the linear
aggregates every caller needs (estimates, squared-weight variance sums,
bias geometry).  Because candidate windows are prefixes of the |x|-sorted
side arrays, all kernel-weighted moments reduce to prefix sums evaluated
at window cutoffs, and the per-side normal equations solve as one batched
linear system: construction is a handful of vector operations regardless
of how many candidates there are.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Optional

import numpy as np

from .data import AnalysisConfig, FitSpec, Sample
from .errors import DegenerateVarianceError, InsufficientSupportError
from .folded import critical_value
from .kernels import kernel_value
from .moments import NnVarianceComponents

# kernel values as polynomials in z = |x|/h over the window
_K_POLY = {
    "triangular": np.array([1.0, -1.0]),
    "epanechnikov": np.array([0.75, 0.0, -0.75]),
    "uniform": np.array([0.5]),
}


@dataclass(frozen=True)
class BandwidthResult:
    h_star: float          # unconstrained length minimizer
    h_min: float           # Lindeberg floor
    h_used: float          # final bandwidth, >= h_min
    objective: float       # cv * sd at h_used
    floor_bound: bool      # True when the floor displaced the minimizer
    floor_satisfied: bool  # False when no candidate meets w_ratio < eta


def candidate_bandwidths(sample: Sample, spec: FitSpec) -> np.ndarray:
    """Distinct |x| magnitudes plus midpoints of adjacent pairs."""
    d = np.unique(np.abs(sample.x))
    mids = 0.5 * (d[:-1] + d[1:])
    cands = np.unique(np.concatenate([d, mids]))
    cands = cands[cands > 0.0]
    if len(cands) == 0:
        raise InsufficientSupportError("both", 0.0, spec.p + 1, 0)
    return cands


class _SideData:
    """One side's observations sorted by distance from the cutoff."""

    def __init__(self, dist, deps, vars_, is_right):
        order = np.argsort(dist, kind="stable")
        self.dist = dist[order]
        self.deps = {k: v[order] for k, v in deps.items()}
        self.vars = {k: v[order] for k, v in vars_.items()}
        self.is_right = is_right
        if len(self.dist):
            newval = np.concatenate([[True], self.dist[1:] != self.dist[:-1]])
            self.distinct = np.cumsum(newval)
        else:
            self.distinct = np.zeros(0, dtype=int)

    def prefix_powers(self, values: np.ndarray, max_power: int) -> np.ndarray:
        """(max_power+1, n+1) prefix sums of dist^m * values."""
        out = np.zeros((max_power + 1, len(self.dist) + 1))
        term = values.astype(float).copy()
        out[0, 1:] = np.cumsum(term)
        for m in range(1, max_power + 1):
            term = term * self.dist
            out[m, 1:] = np.cumsum(term)
        return out


class CandidateProfile:
    """Per-candidate aggregates of the local polynomial weights.

    dep_channels maps names to dependent-variable arrays (aggregated as
    sum_i w_i dep_i); var_channels maps names to per-observation variance
    components (aggregated as sum_i w_i^2 var_i).  Candidates where either
    side is rank deficient are masked invalid rather than raising; at
    least one candidate must be valid.
    """

    def __init__(self, sample: Sample, spec: FitSpec,
                 dep_channels: dict, var_channels: dict,
                 candidates: Optional[np.ndarray] = None):
        sample.require_both_sides()
        self.spec = spec
        if candidates is None:
            candidates = candidate_bandwidths(sample, spec)
        h = np.asarray(candidates, dtype=float)
        if h.ndim == 0:
            h = h[None]
        p, v, kernel = spec.p, spec.v, spec.kernel
        k_poly = _K_POLY[kernel]
        k2_poly = np.convolve(k_poly, k_poly)
        strict = kernel != "uniform"
        parity = (-1.0) ** (p - v)
        fact = np.array([factorial(j) for j in range(p + 1)], dtype=float)
        names_a = list(dep_channels)
        names_v = list(var_channels)

        n_cand = len(h)
        self.h = h
        self.A = {k: np.zeros(n_cand) for k in names_a}
        self.V = {k: np.zeros(n_cand) for k in names_v}
        self.g_plus = np.zeros(n_cand)
        self.g_minus = np.zeros(n_cand)
        self.valid = np.ones(n_cand, dtype=bool)
        self._wratio_cache = np.full(n_cand, np.nan)
        self._floor_cache = {}
        self._sides = []
        self._gammas = []

        for is_right in (True, False):
            mask = sample.right if is_right else ~sample.right
            side = _SideData(
                np.abs(sample.x[mask]),
                {k: np.asarray(dep_channels[k], dtype=float)[mask]
                 for k in names_a},
                {k: np.asarray(var_channels[k], dtype=float)[mask]
                 for k in names_v},
                is_right,
            )
            self._sides.append(side)
            cut = np.searchsorted(side.dist, h,
                                  side="left" if strict else "right")
            ok = cut >= p + 1
            ok[ok] = side.distinct[cut[ok] - 1] >= p + 1
            self.valid &= ok
            cut_safe = np.maximum(cut, 1)

            kdeg = len(k_poly) - 1
            k2deg = len(k2_poly) - 1
            m_ones = 2 * p + 1 + kdeg
            pref_ones = side.prefix_powers(np.ones_like(side.dist), m_ones)
            s_ones = pref_ones[:, cut_safe]          # (m_ones+1, n_cand)

            def kernel_moment(s_table, m, poly):
                # sum over window of K^a(d/h) * d^m * channel
                total = np.zeros(n_cand)
                for a, coef in enumerate(poly):
                    if coef != 0.0:
                        total += coef * s_table[m + a] / h**a
                return total

            hp = h ** np.arange(0, 2 * p + 2)[:, None]  # hp[m] = h^m

            q = np.empty((n_cand, p + 1, p + 1))
            for j in range(p + 1):
                for k in range(j, p + 1):
                    val = (kernel_moment(s_ones, j + k, k_poly)
                           / (fact[j] * fact[k] * hp[j + k]))
                    q[:, j, k] = val
                    q[:, k, j] = val
            q[~self.valid] = np.eye(p + 1)
            rhs = np.zeros(p + 1)
            rhs[v] = 1.0
            gamma = np.linalg.solve(
                q, np.tile(rhs, (n_cand, 1))[:, :, None])[:, :, 0]
            self._gammas.append(gamma)

            g_vec = np.empty((n_cand, p + 1))
            for j in range(p + 1):
                g_vec[:, j] = (kernel_moment(s_ones, j + p + 1, k_poly)
                               / (fact[j] * hp[j]))
            g_side = parity * np.einsum("cj,cj->c", gamma, g_vec) / h**v
            if is_right:
                self.g_plus = np.maximum(g_side, 0.0)
            else:
                self.g_minus = np.maximum(g_side, 0.0)

            sign_a = 1.0 if is_right else -((-1.0) ** v)
            m_dep = p + kdeg
            for name in names_a:
                pref = side.prefix_powers(side.deps[name], m_dep)
                s_dep = pref[:, cut_safe]
                r_vec = np.empty((n_cand, p + 1))
                for j in range(p + 1):
                    r_vec[:, j] = (kernel_moment(s_dep, j, k_poly)
                                   / (fact[j] * hp[j]))
                self.A[name] += sign_a * np.einsum("cj,cj->c", gamma,
                                                   r_vec) / h**v

            m_var = 2 * p + k2deg
            for name in names_v:
                pref = side.prefix_powers(side.vars[name], m_var)
                s_var = pref[:, cut_safe]
                mmat = np.empty((n_cand, p + 1, p + 1))
                for j in range(p + 1):
                    for k in range(j, p + 1):
                        val = (kernel_moment(s_var, j + k, k2_poly)
                               / (fact[j] * fact[k] * hp[j + k]))
                        mmat[:, j, k] = val
                        mmat[:, k, j] = val
                self.V[name] += np.einsum("cj,cjk,ck->c", gamma, mmat,
                                          gamma) / h ** (2 * v)

        if not self.valid.any():
            raise InsufficientSupportError("both", float(self.h[-1]), p + 1, 0)
        for name in names_a:
            self.A[name][~self.valid] = np.nan
        for name in names_v:
            self.V[name][~self.valid] = np.nan
        self.g_plus[~self.valid] = np.nan
        self.g_minus[~self.valid] = np.nan
        first = int(np.argmax(self.valid))
        if first > 0:
            self._truncate(first)

    def _truncate(self, first: int):
        self.h = self.h[first:]
        for store in (self.A, self.V):
            for name in store:
                store[name] = store[name][first:]
        self.g_plus = self.g_plus[first:]
        self.g_minus = self.g_minus[first:]
        self.valid = self.valid[first:]
        self._wratio_cache = self._wratio_cache[first:]
        self._gammas = [g[first:] for g in self._gammas]

    # -- weight concentration ------------------------------------------

    def w_ratio_at(self, index: int) -> float:
        """max_j w_j^2 / sum_i w_i^2 at candidate index (lazy, cached)."""
        cached = self._wratio_cache[index]
        if not np.isnan(cached):
            return float(cached)
        if not self.valid[index]:
            self._wratio_cache[index] = np.inf
            return np.inf
        h = self.h[index]
        strict = self.spec.kernel != "uniform"
        p, v = self.spec.p, self.spec.v
        max_sq = 0.0
        sum_sq = 0.0
        for side, gamma in zip(self._sides, self._gammas):
            cut = int(np.searchsorted(side.dist, h,
                                      side="left" if strict else "right"))
            z = side.dist[:cut] / h
            kern = kernel_value(self.spec.kernel, z)
            poly = np.zeros_like(z)
            zj = np.ones_like(z)
            for j in range(p + 1):
                poly += gamma[index, j] * zj / factorial(j)
                zj = zj * z
            w = poly * kern / h**v
            w_sq = w * w
            max_sq = max(max_sq, float(w_sq.max()))
            sum_sq += float(w_sq.sum())
        ratio = max_sq / sum_sq
        self._wratio_cache[index] = ratio
        return ratio

    def floor(self, eta: float) -> tuple[float, bool]:
        """Smallest candidate with w_ratio strictly below eta."""
        key = float(eta)
        if key not in self._floor_cache:
            found = None
            for j in range(len(self.h)):
                if self.valid[j] and self.w_ratio_at(j) < eta:
                    found = (float(self.h[j]), True)
                    break
            if found is None:
                found = (float(self.h[self.valid][-1]), False)
            self._floor_cache[key] = found
        return self._floor_cache[key]

    # -- objective ------------------------------------------------------

    def bias_terms(self, bounds, c: float) -> np.ndarray:
        by_minus, by_plus = bounds.y_sides
        bt_minus, bt_plus = bounds.t_sides
        scale = 1.0 / factorial(self.spec.p + 1)
        return scale * ((by_plus + abs(c) * bt_plus) * self.g_plus
                        + (by_minus + abs(c) * bt_minus) * self.g_minus)

    def _objective(self, sd2: np.ndarray, bias: np.ndarray,
                   alpha: float) -> np.ndarray:
        usable = self.valid & (sd2 > 0.0)
        if not usable.any():
            raise DegenerateVarianceError(
                "no candidate bandwidth has a positive variance estimate"
            )
        obj = np.full(len(self.h), np.inf)
        sd = np.sqrt(sd2[usable])
        obj[usable] = critical_value(alpha, bias[usable] / sd) * sd
        return obj

    def optimize(self, sd2: np.ndarray, bias: np.ndarray, alpha: float,
                 eta: float) -> tuple[int, BandwidthResult]:
        """Minimize cv * sd over candidates, floored at the Lindeberg h.

        Ties break toward the larger bandwidth.  Returns the candidate
        index together with the populated BandwidthResult.
        """
        obj = self._objective(sd2, bias, alpha)
        rev_star = len(obj) - 1 - int(np.argmin(obj[::-1]))
        h_min, floor_satisfied = self.floor(eta)
        allowed = np.where(self.h >= h_min, obj, np.inf)
        if not np.isfinite(allowed).any():
            raise DegenerateVarianceError(
                "no candidate bandwidth above the Lindeberg floor has a "
                "positive variance estimate"
            )
        rev_used = len(allowed) - 1 - int(np.argmin(allowed[::-1]))
        result = BandwidthResult(
            h_star=float(self.h[rev_star]),
            h_min=h_min,
            h_used=float(self.h[rev_used]),
            objective=float(allowed[rev_used]),
            floor_bound=bool(self.h[rev_star] < h_min),
            floor_satisfied=floor_satisfied,
        )
        return rev_used, result


def ar_profile(sample: Sample, nv: NnVarianceComponents, spec: FitSpec,
               candidates: Optional[np.ndarray] = None) -> CandidateProfile:
    """Profile with the channels the composite-outcome inversion needs."""
    return CandidateProfile(
        sample, spec,
        dep_channels={"y": sample.y, "t": sample.t},
        var_channels={"yy": nv.sig2_y, "tt": nv.sig2_t, "yt": nv.sig_yt},
        candidates=candidates,
    )


def ar_sd2(profile: CandidateProfile, c: float) -> np.ndarray:
    vals = (profile.V["yy"] + c * c * profile.V["tt"]
            - 2.0 * c * profile.V["yt"])
    with np.errstate(invalid="ignore"):
        return np.where(np.isnan(vals), np.nan, np.maximum(vals, 0.0))


def h_floor(sample: Sample, spec: FitSpec, eta: float,
            candidates: Optional[np.ndarray] = None) -> tuple[float, bool]:
    """Smallest candidate bandwidth keeping w_ratio below eta.

    Returns (h, satisfied); when no candidate qualifies the largest valid
    candidate is returned with satisfied=False.
    """
    if not (0.0 < eta <= 1.0):
        raise ValueError("eta must lie in (0, 1]")
    profile = CandidateProfile(sample, spec, {}, {}, candidates)
    return profile.floor(eta)


def optimize_bandwidth(sample: Sample, nv: NnVarianceComponents,
                       cfg: AnalysisConfig, c: float) -> BandwidthResult:
    """CI-length-minimizing bandwidth for the composite outcome y - c*t."""
    if cfg.fixed_bandwidth is not None:
        h = cfg.fixed_bandwidth
        profile = ar_profile(sample, nv, cfg.fit, candidates=np.array([h]))
        obj = profile._objective(ar_sd2(profile, c),
                                 profile.bias_terms(cfg.bounds, c), cfg.alpha)
        return BandwidthResult(h_star=h, h_min=h, h_used=h,
                               objective=float(obj[0]),
                               floor_bound=False, floor_satisfied=True)
    profile = ar_profile(sample, nv, cfg.fit)
    _, result = profile.optimize(ar_sd2(profile, c),
                                 profile.bias_terms(cfg.bounds, c),
                                 cfg.alpha, cfg.eta)
    return result

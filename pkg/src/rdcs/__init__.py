"""Bias-aware test-inversion confidence sets for fuzzy regression
discontinuity and regression kink designs, with delta-method baselines,
smoothness-bound tooling, and a Monte Carlo harness."""

__version__ = "0.1.0"

from .bandwidth import (BandwidthResult, candidate_bandwidths, h_floor,
                        optimize_bandwidth)
from .data import (AnalysisConfig, FitSpec, Sample, SmoothnessBounds,
                   apply_donut, load_sample, write_sample)
from .dm import DmInference, dm_ci_bias_aware, dm_ci_naive
from .errors import (ClassificationError, DataError, DegenerateVarianceError,
                     InsufficientSupportError, RdcsError,
                     WeakIdentificationError)
from .folded import critical_value, folded_cdf
from .inversion import (AuxInference, ConfidenceSet, SrdCi, compute_cs,
                        compute_cs_fixed_h, p_hat, srd_ci)
from .local_poly import WeightVector, srd_estimate, w_ratio, weights
from .moments import (BiasSdBundle, NnVarianceComponents, aux_bundle,
                      bias_bound, bias_bound_vp, nn_variances,
                      worst_case_dep)
from .rkd import RkdSpec, beta_vp, rkd_cs
from .simulate import CoverageReport, DgpSpec, coverage_study, draw_dgp
from .smoothness import ExtremeFunction, RotResult, extreme_function, rot1, rot2

__all__ = [
    "AnalysisConfig", "AuxInference", "BandwidthResult", "BiasSdBundle",
    "ClassificationError", "ConfidenceSet", "CoverageReport", "DataError",
    "DegenerateVarianceError", "DgpSpec", "DmInference", "ExtremeFunction",
    "FitSpec", "InsufficientSupportError", "NnVarianceComponents",
    "RdcsError", "RkdSpec", "RotResult", "Sample", "SmoothnessBounds",
    "SrdCi", "WeakIdentificationError", "WeightVector", "apply_donut",
    "aux_bundle", "beta_vp", "bias_bound", "bias_bound_vp",
    "candidate_bandwidths", "compute_cs", "compute_cs_fixed_h",
    "coverage_study", "critical_value", "dm_ci_bias_aware", "dm_ci_naive",
    "draw_dgp", "extreme_function", "folded_cdf", "h_floor", "load_sample",
    "nn_variances", "optimize_bandwidth", "p_hat", "rkd_cs", "rot1", "rot2",
    "srd_ci", "srd_estimate", "w_ratio", "weights", "worst_case_dep",
    "write_sample",
]

"""Two-sample tests for relevant differences between eigenfunctions of covariance operators."""

__version__ = "0.1.0"

from .covop import CovKernel, EigenSystem, align_signs, eigen_decompose, estimate_cov, estimate_cov_partial
from .fda import Curve, CurveSample, Grid, center, inner_product, norm_sq, smooth_to_curve
from .measure import NuMeasure
from .multiplicity import MultiTestResult, bonferroni, holm
from .nulldist import QuantileTable, get_table, p_value, quantile, simulate_W
from .selfnorm import (
    RelevanceTestConfig,
    TestResult,
    dhat_distance,
    dhat_process,
    test_eigenfunction,
    test_eigenfunctions,
    test_eigenvalue,
    vhat,
)

__all__ = [
    "Curve",
    "CurveSample",
    "Grid",
    "center",
    "inner_product",
    "norm_sq",
    "smooth_to_curve",
    "CovKernel",
    "EigenSystem",
    "estimate_cov",
    "estimate_cov_partial",
    "eigen_decompose",
    "align_signs",
    "NuMeasure",
    "QuantileTable",
    "simulate_W",
    "get_table",
    "quantile",
    "p_value",
    "RelevanceTestConfig",
    "TestResult",
    "dhat_process",
    "dhat_distance",
    "vhat",
    "test_eigenfunction",
    "test_eigenfunctions",
    "test_eigenvalue",
    "MultiTestResult",
    "bonferroni",
    "holm",
]

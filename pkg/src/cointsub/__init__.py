"""Specification tests for cointegrating regression with long-memory and
semi-long-memory regressors, calibrated by subsampling."""

__version__ = "0.1.0"

from .errors import CointsubError  # noqa: E402
from .kernel import BandwidthRule, nw_fit, lcv_score, select_bandwidth  # noqa: E402
from .models import ModelSpec, fit, residuals, nonparametric_residuals  # noqa: E402
from .processes import (  # noqa: E402
    AR1, MA1, ProcessConfig, SeriesPair, build_series, c_d_constant, frac_coeffs, scaling_dn,
)
from .subsampling import (  # noqa: E402
    SubsampleDistribution, block_scan, debias_mhm, minimal_volatility, pvalue_mhm,
    pvalue_snu, subsample_mhm, subsample_snu,
)
from .teststats import (  # noqa: E402
    TestOutcome, WeightWindow, chi2_sf, mhm_statistic, portmanteau, snu_statistic,
)
from .montecarlo import ExperimentConfig, RejectionTable, run_cell, run_suite  # noqa: E402

__all__ = [
    "__version__", "CointsubError", "BandwidthRule", "nw_fit", "lcv_score", "select_bandwidth",
    "ModelSpec", "fit", "residuals", "nonparametric_residuals", "AR1", "MA1", "ProcessConfig",
    "SeriesPair", "build_series", "c_d_constant", "frac_coeffs", "scaling_dn",
    "SubsampleDistribution", "block_scan", "debias_mhm", "minimal_volatility", "pvalue_mhm",
    "pvalue_snu", "subsample_mhm", "subsample_snu", "TestOutcome", "WeightWindow", "chi2_sf",
    "mhm_statistic", "portmanteau", "snu_statistic", "ExperimentConfig", "RejectionTable",
    "run_cell", "run_suite",
]

"""marinfer: mixed causal/noncausal autoregressions with Student-t errors.

Simulation, approximate maximum likelihood estimation, three standard-error
constructions for the coefficients (classical, block-Hessian, robust), and
Monte-Carlo calibration of the robust scale constant k*(nu, T).
"""

__version__ = "0.1.0"

from .estimator import FitOptions, FitResult, MarModel, fit_ar_ols, fit_mar, select_p, select_rs
from .harness import ErfConfig, ErfRow, SdGrowthRow, run_erf, run_sd_growth
from .infer import (
    GammaBlocks,
    SeReport,
    compute_se_report,
    gamma_blocks,
    omega_standard_errors,
    sigma_block_hessian,
    sigma_classic,
    sigma_robust,
    standard_errors,
    t_test,
)
from .lagpoly import LagPolynomial, filter_causal, filter_noncausal, is_stationary, ma_weights
from .robustscale import (
    KCalibration,
    calibrate_kstar,
    k_statistic,
    kde_mode,
    kstar_reference,
    mad,
    trim_interval,
)
from .simulator import SimConfig, residuals, simulate_mar
from .tdist import TParams, error_variance, fisher_J, fisher_J_tilde, log_density, loglik, sample

__all__ = [
    "ErfConfig",
    "ErfRow",
    "FitOptions",
    "FitResult",
    "GammaBlocks",
    "KCalibration",
    "LagPolynomial",
    "MarModel",
    "SdGrowthRow",
    "SeReport",
    "SimConfig",
    "TParams",
    "calibrate_kstar",
    "compute_se_report",
    "error_variance",
    "filter_causal",
    "filter_noncausal",
    "fisher_J",
    "fisher_J_tilde",
    "fit_ar_ols",
    "fit_mar",
    "gamma_blocks",
    "is_stationary",
    "k_statistic",
    "kde_mode",
    "kstar_reference",
    "log_density",
    "loglik",
    "ma_weights",
    "mad",
    "omega_standard_errors",
    "residuals",
    "run_erf",
    "run_sd_growth",
    "sample",
    "select_p",
    "select_rs",
    "sigma_block_hessian",
    "sigma_classic",
    "sigma_robust",
    "simulate_mar",
    "standard_errors",
    "t_test",
    "trim_interval",
]

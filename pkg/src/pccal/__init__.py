"""pccal: polynomial chaos surrogates and Bayesian calibration.

Builds noise-tolerant polynomial chaos surrogates of an expensive model's
scalar cost statistic, via Smolyak sparse-grid spectral projection or
basis-pursuit denoising, and calibrates the model's parameters against the
surrogate with a Metropolis-within-Gibbs sampler whose likelihood carries a
Gamma-distributed scaling hyper-parameter.
"""

__version__ = "0.1.0"

from .basis import PCBasis, build_basis
from .bpdn import (BpdnConfig, BpdnReport, BpdnSolution, cross_validate_delta,
                   fit_ensemble, measurement_matrix, solve_bpdn)
from .calibrate import (CalibrationConfig, Chain, HyperPrior, gibbs_draw_S,
                        kde_marginal, log_posterior, run_mcmc, running_mean)
from .ensemble import DesignEnsemble, read_ensemble, write_ensemble
from .errors import (CapacityError, ConfigError, DomainError, EvaluationError,
                     NumericalError, PartialEnsembleError, PccalError,
                     ShapeError, SolverError)
from .harness import (ExternalModelSpec, OutputParser, SyntheticModel,
                      evaluate_synthetic, planted_polynomial_model,
                      run_ensemble, smooth_model)
from .nisp import degree_band_means, nisp_coefficients, projection_matrix, spectrum
from .parameters import ParameterSpace, ParameterSpec
from .quadrature import (QuadratureRule1D, SparseGrid, build_1d_rule,
                         build_smolyak, read_design, subset_levels,
                         uniform_random_design, write_design)
from .surrogate import PCExpansion, read_coefficients, write_coefficients

__all__ = [
    "__version__",
    "PCBasis", "build_basis",
    "BpdnConfig", "BpdnReport", "BpdnSolution", "cross_validate_delta",
    "fit_ensemble", "measurement_matrix", "solve_bpdn",
    "CalibrationConfig", "Chain", "HyperPrior", "gibbs_draw_S",
    "kde_marginal", "log_posterior", "run_mcmc", "running_mean",
    "DesignEnsemble", "read_ensemble", "write_ensemble",
    "CapacityError", "ConfigError", "DomainError", "EvaluationError",
    "NumericalError", "PartialEnsembleError", "PccalError",
    "ShapeError", "SolverError",
    "ExternalModelSpec", "OutputParser", "SyntheticModel",
    "evaluate_synthetic", "planted_polynomial_model", "run_ensemble",
    "smooth_model",
    "degree_band_means", "nisp_coefficients", "projection_matrix", "spectrum",
    "ParameterSpace", "ParameterSpec",
    "QuadratureRule1D", "SparseGrid", "build_1d_rule", "build_smolyak",
    "read_design", "subset_levels", "uniform_random_design", "write_design",
    "PCExpansion", "read_coefficients", "write_coefficients",
]

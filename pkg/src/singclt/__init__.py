"""Central limit machinery for weighted Hermite functionals of Gaussian processes
whose spectral density has power singularities at nonzero frequencies."""

from . import errors, kernels
from .diagrams import (ContractionSpec, Diagram, classify_levels, classify_regular,
                       contraction_norm, enumerate_diagrams, fourth_moment_statistic,
                       hermite_moment)
from .errors import (AssumptionViolation, DomainError, NumericalError, OverlapError,
                     SingCLTError)
from .harness import ExperimentConfig, MCReport, normality_tests, run_experiment
from .hermite import HermiteExpansion, Psi, hermite_coefficients, psi_from_spec
from .limitcov import LimitCovarianceResult, limit_covariance, sigma_T_squared
from .simulate import SamplePath, SimulationPlan, simulate, weighted_functional
from .spectral import (SpectralComponent, SpectralModel, bessel_k, convolution_density,
                       covariance, single_component, spectral_density, validate_assumptions)
from .weights import (WeightSpec, limit_measure, matrix_measure, trig_regression_gradient,
                      weight_transform)

__version__ = "0.1.0"

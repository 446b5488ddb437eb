"""Exact stochastic phase-space simulation of a pumped, damped three-well
Bose-Hubbard chain, with a truncated-Fock master-equation oracle and
linearized output-beam spectra."""

from __future__ import annotations

__version__ = "0.1.0"

from .backend import available_backends, default_backend
from .engine import (
    DEFAULT_STEADY_WINDOW,
    EnsembleRunReport,
    IntegrationConfig,
    TrajectoryOutcome,
    integrate_trajectory,
    run_ensemble,
)
from .errors import (
    AllDiverged,
    ConfigError,
    DegenerateInference,
    EmptyAccumulator,
    GaussianRegimeError,
    NonConvergence,
    PptrimerError,
    SamplingDiagnosticWarning,
    SchemaError,
    SingularAtFrequency,
    TruncationOverflow,
    UnstableDriftMatrix,
    ZeroPopulation,
)
from .model import SystemParams, TrajectoryState, semiclassical_steady_state
from .moments import (
    CorrelationReport,
    Estimate,
    MomentAccumulator,
    MomentVector,
    ScanResult,
    build_correlation_report,
    duan_simon,
    fano_number_difference,
    g2,
    pool_samples,
    population,
    quadrature_covariance,
    quadrature_variance,
    reid_epr,
    scan_angles,
)
from .oracle import (
    DensityMatrix,
    FockConfig,
    evolve_master_equation,
    observables_from_rho,
)
from .spectra import (
    EntanglementSpectra,
    OutputSpectrum,
    SpectralModel,
    build_spectral_model,
    lyapunov_covariance,
    means_from_accumulator,
    means_from_fixed_point,
    output_entanglement_spectra,
    output_quadrature_spectra,
    spectral_matrix,
    verify_lyapunov,
)

__all__ = [
    "__version__",
    "available_backends",
    "default_backend",
    "DEFAULT_STEADY_WINDOW",
    "EnsembleRunReport",
    "IntegrationConfig",
    "TrajectoryOutcome",
    "integrate_trajectory",
    "run_ensemble",
    "AllDiverged",
    "ConfigError",
    "DegenerateInference",
    "EmptyAccumulator",
    "GaussianRegimeError",
    "NonConvergence",
    "PptrimerError",
    "SamplingDiagnosticWarning",
    "SchemaError",
    "SingularAtFrequency",
    "TruncationOverflow",
    "UnstableDriftMatrix",
    "ZeroPopulation",
    "SystemParams",
    "TrajectoryState",
    "semiclassical_steady_state",
    "CorrelationReport",
    "Estimate",
    "MomentAccumulator",
    "MomentVector",
    "ScanResult",
    "build_correlation_report",
    "duan_simon",
    "fano_number_difference",
    "g2",
    "pool_samples",
    "population",
    "quadrature_covariance",
    "quadrature_variance",
    "reid_epr",
    "scan_angles",
    "DensityMatrix",
    "FockConfig",
    "evolve_master_equation",
    "observables_from_rho",
    "EntanglementSpectra",
    "OutputSpectrum",
    "SpectralModel",
    "build_spectral_model",
    "lyapunov_covariance",
    "means_from_accumulator",
    "means_from_fixed_point",
    "output_entanglement_spectra",
    "output_quadrature_spectra",
    "spectral_matrix",
    "verify_lyapunov",
]

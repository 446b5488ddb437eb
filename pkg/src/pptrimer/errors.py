"""Exception types raised across the package.

Everything numerical that can fail in an expected, diagnosable way gets its
own class so callers (and the CLI) can map failures to exit codes without
string matching.
"""

from __future__ import annotations


class PptrimerError(Exception):
    """Base class for all package errors."""


class ConfigError(PptrimerError):
    """Invalid parameter or configuration value."""


class NonConvergence(PptrimerError):
    """Deterministic relaxation failed to reach the requested residual."""


class AllDiverged(PptrimerError):
    """Every trajectory diverged before the first sample time."""


class EmptyAccumulator(PptrimerError):
    """A statistic was requested from an accumulator with no samples."""


class ZeroPopulation(PptrimerError):
    """A normalized statistic was requested where the population vanishes."""


class DegenerateInference(PptrimerError):
    """Conditional-variance inference attempted on a degenerate conditioner."""


class TruncationOverflow(PptrimerError):
    """Fock-space truncation too small for the state being evolved."""


class UnstableDriftMatrix(PptrimerError):
    """Linearized drift matrix has a non-decaying mode; spectra undefined."""


class SingularAtFrequency(PptrimerError):
    """Linear solve for the spectral matrix is singular at a grid frequency."""


class GaussianRegimeError(ConfigError):
    """Linearized spectra requested outside the weak-nonlinearity regime."""


class SchemaError(PptrimerError):
    """Tabular artifact does not match the expected column schema."""


class SamplingDiagnosticWarning(UserWarning):
    """A nominally real estimator carries a large imaginary residue,
    indicating an under-converged ensemble."""

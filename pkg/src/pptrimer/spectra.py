"""Linearized fluctuation spectra of the output beams.

Around the steady state the fluctuations delta-alpha obey a linear SDE
with constant drift matrix A and diffusion matrix D, i.e. an
Ornstein-Uhlenbeck process, whose stationary spectral matrix is

    S(omega) = (A + i omega)^-1 D (A^T - i omega)^-1.

Rotated output quadrature spectra follow from the input-output
normalization S_out(X_i, X_j) = delta_ij + gamma (S_ij + S_ji) applied to
the bilinear combinations picked out by
delta X_i(theta) = delta alpha_i e^{-i theta} + delta alpha_i+ e^{i theta}.

This treatment is only trusted in the weak-nonlinearity regime where the
fluctuations are Gaussian; a guard refuses larger chi unless explicitly
overridden.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    GaussianRegimeError,
    SingularAtFrequency,
    UnstableDriftMatrix,
)
from .model import SystemParams, semiclassical_steady_state
from .moments import FIRST_MOMENT_INDICES

__all__ = [
    "GAUSSIAN_CHI_MAX",
    "DEFAULT_OMEGA_GRID",
    "SpectralModel",
    "means_from_fixed_point",
    "means_from_accumulator",
    "build_spectral_model",
    "spectral_matrix",
    "OutputSpectrum",
    "output_quadrature_spectra",
    "EntanglementSpectra",
    "output_entanglement_spectra",
    "lyapunov_covariance",
    "verify_lyapunov",
]

# Largest chi for which the Gaussian linearization is accepted by default.
GAUSSIAN_CHI_MAX = 2e-3

DEFAULT_OMEGA_GRID = np.linspace(-6.0, 6.0, 512)


@dataclass
class SpectralModel:
    """Steady means (a1, a1*, a2, a2*, a3, a3*), drift matrix A, diagonal
    diffusion matrix D and the end-well loss rate."""

    steady_means: np.ndarray
    A: np.ndarray
    D: np.ndarray
    gamma: float


def means_from_fixed_point(params: SystemParams) -> np.ndarray:
    """Six steady means from the noiseless fixed point."""
    a = semiclassical_steady_state(params)
    out = np.empty(6, dtype=np.complex128)
    out[0::2] = a
    out[1::2] = np.conj(a)
    return out


def means_from_accumulator(source) -> np.ndarray:
    """Six steady means from pooled ensemble first moments."""
    return source.mean_vector()[list(FIRST_MOMENT_INDICES)]


def build_spectral_model(
    params: SystemParams,
    steady_means: np.ndarray,
    allow_strong_nonlinearity: bool = False,
) -> SpectralModel:
    """Populate A and D entrywise from the steady means and verify that
    every fluctuation mode decays."""
    if params.chi > GAUSSIAN_CHI_MAX and not allow_strong_nonlinearity:
        raise GaussianRegimeError(
            f"chi={params.chi:g} exceeds {GAUSSIAN_CHI_MAX:g}: the linearized "
            "Gaussian treatment is not trusted at this nonlinearity "
            "(override to proceed anyway)"
        )
    mm = np.asarray(steady_means, dtype=np.complex128)
    if mm.shape != (6,):
        raise ValueError(f"steady_means must hold 6 values, got shape {mm.shape}")
    a1, p1, a2, p2, a3, p3 = mm
    chi, g, j = params.chi, params.gamma, params.j_tunnel
    n1 = p1 * a1
    n2 = p2 * a2
    n3 = p3 * a3
    tic = 2j * chi
    ij = 1j * j

    a_mat = np.array(
        [
            [g + tic * n1, tic * a1 * a1, -ij, 0, 0, 0],
            [-tic * p1 * p1, g - tic * n1, 0, ij, 0, 0],
            [-ij, 0, tic * n2, tic * a2 * a2, -ij, 0],
            [0, ij, -tic * p2 * p2, -tic * n2, 0, ij],
            [0, 0, -ij, 0, g + tic * n3, tic * a3 * a3],
            [0, 0, 0, ij, -tic * p3 * p3, g - tic * n3],
        ],
        dtype=np.complex128,
    )
    d_mat = np.diag(
        [
            -tic * a1 * a1,
            tic * p1 * p1,
            -tic * a2 * a2,
            tic * p2 * p2,
            -tic * a3 * a3,
            tic * p3 * p3,
        ]
    ).astype(np.complex128)

    eigs = np.linalg.eigvals(a_mat)
    if np.any(eigs.real <= 0):
        raise UnstableDriftMatrix(
            "drift matrix has a non-decaying fluctuation mode; eigenvalues: "
            + ", ".join(f"{e:.6g}" for e in eigs)
        )
    return SpectralModel(mm, a_mat, d_mat, float(g))


def spectral_matrix(model: SpectralModel, omega: float) -> np.ndarray:
    """S(omega), with omega in tunneling units."""
    eye = np.eye(6)
    try:
        left = np.linalg.solve(model.A + 1j * omega * eye, model.D)
        s = np.linalg.solve((model.A.T - 1j * omega * eye).T, left.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularAtFrequency(f"spectral solve singular at omega={omega:g}") from exc
    return s


def _selector(well: int, theta: float) -> np.ndarray:
    u = np.zeros(6, dtype=np.complex128)
    base = 0 if well == 1 else 4
    u[base] = np.exp(-1j * theta)
    u[base + 1] = np.exp(1j * theta)
    return u


@dataclass
class OutputSpectrum:
    """Real output quadrature spectra of wells 1 and 3 at one frequency."""

    x11: float
    x13: float
    x33: float
    y11: float
    y13: float
    y33: float
    imag_residue: float


def output_quadrature_spectra(model: SpectralModel, omega: float, theta: float) -> OutputSpectrum:
    """Spectral variances and covariances of X_1, X_3, Y_1, Y_3 at angle
    theta (radians), normalized so a vacuum-limited output sits at 1."""
    s = spectral_matrix(model, omega)
    u1x = _selector(1, theta)
    u3x = _selector(3, theta)
    u1y = _selector(1, theta + np.pi / 2.0)
    u3y = _selector(3, theta + np.pi / 2.0)

    def sout(ui: np.ndarray, uj: np.ndarray, diagonal: bool) -> complex:
        return (1.0 if diagonal else 0.0) + model.gamma * (ui @ s @ uj + uj @ s @ ui)

    vals = (
        sout(u1x, u1x, True),
        sout(u1x, u3x, False),
        sout(u3x, u3x, True),
        sout(u1y, u1y, True),
        sout(u1y, u3y, False),
        sout(u3y, u3y, True),
    )
    residue = max(abs(v.imag) for v in vals)
    return OutputSpectrum(*(v.real for v in vals), imag_residue=residue)


@dataclass
class EntanglementSpectra:
    """Inseparability and steering spectra of the two output beams over a
    frequency grid.  ds is the combined quadrature variance
    V(X1 - X3) + V(Y1 + Y3): the beams' X fluctuations are anticorrelated
    and their Y fluctuations correlated, so this pairing is the one that
    dips below the separability bound of 4.  epr is the product of
    inferred variances of beam 1 given beam 3, bound 1."""

    omega: np.ndarray
    ds: np.ndarray
    epr: np.ndarray
    x11: np.ndarray
    x13: np.ndarray
    x33: np.ndarray
    y11: np.ndarray
    y13: np.ndarray
    y33: np.ndarray
    max_imag_residue: float

    @property
    def ds_min(self) -> tuple[float, float]:
        k = int(np.argmin(self.ds))
        return float(self.omega[k]), float(self.ds[k])

    @property
    def epr_min(self) -> tuple[float, float]:
        k = int(np.argmin(self.epr))
        return float(self.omega[k]), float(self.epr[k])

    def _band(self, values: np.ndarray, bound: float) -> Optional[tuple[float, float]]:
        below = values < bound
        if not below.any():
            return None
        k = int(np.argmin(values))
        lo = k
        while lo > 0 and below[lo - 1]:
            lo -= 1
        hi = k
        while hi < len(values) - 1 and below[hi + 1]:
            hi += 1
        return float(self.omega[lo]), float(self.omega[hi])

    @property
    def ds_violation_band(self) -> Optional[tuple[float, float]]:
        return self._band(self.ds, 4.0)

    @property
    def epr_violation_band(self) -> Optional[tuple[float, float]]:
        return self._band(self.epr, 1.0)


def output_entanglement_spectra(
    model: SpectralModel,
    theta: float,
    omega_grid: np.ndarray | None = None,
) -> EntanglementSpectra:
    """Evaluate the output quadrature spectra on a frequency grid and form
    the inseparability and steering combinations at angle theta."""
    if omega_grid is None:
        omega_grid = DEFAULT_OMEGA_GRID
    omega_grid = np.asarray(omega_grid, dtype=float)
    n = omega_grid.size
    cols = {k: np.empty(n) for k in ("x11", "x13", "x33", "y11", "y13", "y33")}
    residue = 0.0
    for i, om in enumerate(omega_grid):
        sp = output_quadrature_spectra(model, float(om), theta)
        cols["x11"][i] = sp.x11
        cols["x13"][i] = sp.x13
        cols["x33"][i] = sp.x33
        cols["y11"][i] = sp.y11
        cols["y13"][i] = sp.y13
        cols["y33"][i] = sp.y33
        residue = max(residue, sp.imag_residue)
    ds = cols["x11"] + cols["x33"] - 2.0 * cols["x13"] + cols["y11"] + cols["y33"] + 2.0 * cols["y13"]
    epr = (cols["x11"] - cols["x13"] ** 2 / cols["x33"]) * (
        cols["y11"] - cols["y13"] ** 2 / cols["y33"]
    )
    return EntanglementSpectra(
        omega=omega_grid,
        ds=ds,
        epr=epr,
        max_imag_residue=residue,
        **cols,
    )


def lyapunov_covariance(model: SpectralModel) -> np.ndarray:
    """Stationary covariance C solving A C + C A^T = D."""
    eye = np.eye(6)
    m = np.kron(model.A, eye) + np.kron(eye, model.A)
    return np.linalg.solve(m, model.D.reshape(-1)).reshape(6, 6)


def verify_lyapunov(model: SpectralModel, n_nodes: int = 400) -> float:
    """Relative defect between (1/2 pi) integral of S over all frequencies
    and the stationary covariance.  The infinite integral is mapped to
    (-pi/2, pi/2) by omega = tan(u) and evaluated with Gauss-Legendre
    nodes."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    u = 0.5 * np.pi * x
    omegas = np.tan(u)
    jac = 0.5 * np.pi * w / np.cos(u) ** 2
    total = np.zeros((6, 6), dtype=np.complex128)
    for om, jw in zip(omegas, jac):
        total += jw * spectral_matrix(model, float(om))
    total /= 2.0 * np.pi
    c = lyapunov_covariance(model)
    scale = np.max(np.abs(c))
    if scale < 1e-300:
        return float(np.max(np.abs(total)))
    return float(np.max(np.abs(total - c)) / scale)

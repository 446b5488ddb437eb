"""Physical definition of the pumped, damped three-well chain.

A coherent pump with amplitude eps drives the middle well, the two end
wells decay at rate gamma, and all three share an on-site Kerr
nonlinearity chi.  The phase-space description doubles each mode into an
independent pair (alpha_j, alpha_jp); the pair is not constrained to be
complex conjugate, which is what lets classical-looking trajectories
represent nonclassical states.

Everything downstream (the stochastic integrator, the truncated-Fock
checker, the linearized spectra) consumes the drift and noise amplitudes
defined here, in the fixed variable order

    (alpha_1, alpha_1p, alpha_2, alpha_2p, alpha_3, alpha_3p).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonConvergence

__all__ = [
    "SystemParams",
    "TrajectoryState",
    "drift",
    "noise_amplitudes",
    "semiclassical_steady_state",
]


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of one simulation, in units where the tunneling
    strength sets the time scale.

    chi      on-site nonlinearity (>= 0)
    gamma    loss rate at wells 1 and 3 (>= 0)
    epsilon  coherent pump amplitude into well 2 (complex)
    j_tunnel tunneling strength between adjacent wells (> 0, default 1)
    """

    chi: float
    gamma: float
    epsilon: complex
    j_tunnel: float = 1.0

    def __post_init__(self) -> None:
        if not self.j_tunnel > 0:
            raise ConfigError(f"j_tunnel must be > 0, got {self.j_tunnel}")
        if self.chi < 0:
            raise ConfigError(f"chi must be >= 0, got {self.chi}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "epsilon", complex(self.epsilon))


@dataclass
class TrajectoryState:
    """Doubled phase-space point of a single trajectory.

    alpha and alpha_plus each hold three complex entries, one per well.
    alpha_plus is an independent variable, not the conjugate of alpha.
    """

    alpha: np.ndarray
    alpha_plus: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=np.complex128)
        self.alpha_plus = np.asarray(self.alpha_plus, dtype=np.complex128)
        if self.alpha.shape != (3,) or self.alpha_plus.shape != (3,):
            raise ConfigError("alpha and alpha_plus must each hold 3 entries")

    @classmethod
    def vacuum(cls) -> "TrajectoryState":
        return cls(np.zeros(3, complex), np.zeros(3, complex), 0.0)

    @classmethod
    def from_vector(cls, z: np.ndarray, t: float = 0.0) -> "TrajectoryState":
        z = np.asarray(z, dtype=np.complex128)
        return cls(z[0::2].copy(), z[1::2].copy(), t)

    def as_vector(self) -> np.ndarray:
        z = np.empty(6, dtype=np.complex128)
        z[0::2] = self.alpha
        z[1::2] = self.alpha_plus
        return z

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.alpha_plus)))


def drift(state: TrajectoryState, params: SystemParams) -> np.ndarray:
    """Deterministic part of the equations of motion, as six complex rates
    in the fixed variable order."""
    a1, a2, a3 = state.alpha
    p1, p2, p3 = state.alpha_plus
    chi, g, j = params.chi, params.gamma, params.j_tunnel
    eps = params.epsilon
    two_i_chi = 2j * chi

    out = np.empty(6, dtype=np.complex128)
    out[0] = -(g + two_i_chi * p1 * a1) * a1 + 1j * j * a2
    out[1] = -(g - two_i_chi * p1 * a1) * p1 - 1j * j * p2
    out[2] = eps - two_i_chi * p2 * a2 * a2 + 1j * j * (a1 + a3)
    out[3] = np.conj(eps) + two_i_chi * p2 * p2 * a2 - 1j * j * (p1 + p3)
    out[4] = -(g + two_i_chi * p3 * a3) * a3 + 1j * j * a2
    out[5] = -(g - two_i_chi * p3 * a3) * p3 - 1j * j * p2
    return out


def noise_amplitudes(state: TrajectoryState, params: SystemParams) -> np.ndarray:
    """Multiplicative noise amplitudes b_k: the stochastic increment of
    variable k over a step dt is b_k eta_k sqrt(dt) with independent real
    standard Gaussians eta_k.

    b for an alpha_j row is sqrt(-2i chi alpha_j^2); for an alpha_jp row
    it is sqrt(+2i chi alpha_jp^2).  The principal branch is used
    throughout: the distribution of b eta is symmetric under b -> -b, so
    the branch cannot bias any moment, and fixing it keeps runs
    reproducible.
    """
    two_i_chi = 2j * params.chi
    out = np.empty(6, dtype=np.complex128)
    out[0::2] = np.sqrt(-two_i_chi * state.alpha**2)
    out[1::2] = np.sqrt(two_i_chi * state.alpha_plus**2)
    return out


def _conjugate_closed_drift(a: np.ndarray, params: SystemParams) -> np.ndarray:
    """Drift restricted to the classical submanifold alpha_plus = conj(alpha)."""
    st = TrajectoryState(a, np.conj(a))
    return drift(st, params)[0::2]


def semiclassical_steady_state(params: SystemParams) -> np.ndarray:
    """Steady point of the noiseless equations with alpha_plus = conj(alpha),
    returned as the three mean amplitudes (alpha_1, alpha_2, alpha_3).

    For chi = 0 the linear system is solved exactly:

        alpha_1 = alpha_3 = i eps / (2 J),   alpha_2 = gamma eps / (2 J^2).

    For chi > 0 the noiseless equations are integrated from that linear
    solution until the drift norm falls below tolerance.  Relaxation is
    preferred over root-finding because it lands on the attractor that the
    stochastic ensemble mean actually tracks when several fixed points
    coexist.
    """
    j = params.j_tunnel
    eps = params.epsilon
    linear = np.array(
        [1j * eps / (2 * j), params.gamma * eps / (2 * j * j), 1j * eps / (2 * j)],
        dtype=np.complex128,
    )
    if params.chi == 0.0:
        return linear

    tol = 1e-10
    t_budget = 200.0
    dt = 5e-3
    n_steps = int(round(t_budget / dt))
    check_every = 10

    a = linear.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps):
            k1 = _conjugate_closed_drift(a, params)
            k2 = _conjugate_closed_drift(a + 0.5 * dt * k1, params)
            k3 = _conjugate_closed_drift(a + 0.5 * dt * k2, params)
            k4 = _conjugate_closed_drift(a + dt * k3, params)
            a = a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if (step + 1) % check_every == 0:
                resid = np.max(np.abs(_conjugate_closed_drift(a, params)))
                if resid < tol:
                    return a
    resid = float(np.max(np.abs(_conjugate_closed_drift(a, params))))
    raise NonConvergence(
        f"noiseless relaxation residual {resid:.3e} above {tol:.0e} "
        f"after t = {t_budget:g}; parameters may self-pulse"
    )

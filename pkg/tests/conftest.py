"""Session-scoped fixtures for the heavy acceptance runs.

The expensive pieces (1e5-trajectory ensembles and truncated-Fock oracle
integrations at two truncations) are computed once and shared across the
acceptance tests so the suite stays inside its runtime budgets.  Every
ensemble here uses a fixed master seed; the numbers the tests see are
fully reproducible.
"""

from __future__ import annotations

import time
from typing import NamedTuple

import numpy as np
import pytest

from pptrimer.engine import IntegrationConfig, EnsembleRunReport, run_ensemble
from pptrimer.model import SystemParams, semiclassical_steady_state
from pptrimer.oracle import FockConfig, evolve_master_equation, observables_from_rho

ACCEPT_SEED = 20260823

ORACLE_PARAMS = SystemParams(chi=0.1, gamma=1.0, epsilon=1.5)
ORACLE_TIMES = np.arange(0.5, 4.0 + 1e-9, 0.5)
ORACLE_DT = 0.02


class TimedRun(NamedTuple):
    report: EnsembleRunReport
    wall: float


class OracleRun(NamedTuple):
    samples: list          # observables_from_rho output per sample time
    max_trace_err: float
    max_herm_defect: float
    wall: float


def _timed_ensemble(params: SystemParams, cfg: IntegrationConfig) -> TimedRun:
    t0 = time.perf_counter()
    report = run_ensemble(params, cfg, n_workers=1)
    return TimedRun(report, time.perf_counter() - t0)


def _paper_run(chi: float, epsilon: float, t_final: float) -> TimedRun:
    params = SystemParams(chi=chi, gamma=1.0, epsilon=epsilon)
    cfg = IntegrationConfig(t_final=t_final, n_traj=100_000,
                            master_seed=ACCEPT_SEED)
    return _timed_ensemble(params, cfg)


@pytest.fixture(scope="session")
def coherent_suite():
    """chi=0 ensembles for both pump strengths.

    Two legs per pump: a vacuum start (the moment identities hold at every
    sample, populations still relaxing) and a start pinned at the classical
    fixed point, where the populations themselves are steady to rounding.
    """
    out = {}
    for eps in (10.0, 10.0 * np.sqrt(2.0)):
        params = SystemParams(chi=0.0, gamma=1.0, epsilon=eps)
        alpha = semiclassical_steady_state(params)
        pinned_z0 = tuple(z for a in alpha for z in (a, a.conjugate()))
        t0 = time.perf_counter()
        vacuum = run_ensemble(
            params,
            IntegrationConfig(t_final=4.0, n_traj=10_000,
                              master_seed=ACCEPT_SEED),
            n_workers=1)
        pinned = run_ensemble(
            params,
            IntegrationConfig(t_final=4.0, n_traj=10_000,
                              master_seed=ACCEPT_SEED + 1,
                              initial_state=pinned_z0),
            n_workers=1)
        out[eps] = (vacuum, pinned, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def pp_strong():
    """Positive-P ensemble at the oracle comparison point (chi=0.1, eps=1.5)."""
    cfg = IntegrationConfig(t_final=4.0, n_traj=100_000,
                            master_seed=ACCEPT_SEED)
    return _timed_ensemble(ORACLE_PARAMS, cfg)


@pytest.fixture(scope="session")
def oracle_pair():
    """Master-equation runs at two truncations for the same parameter point.

    Samples are harvested through the callback so the density matrices are
    never retained; invariant defects are measured at every sample time.
    """
    runs = {}
    for n_cut in (12, 14):
        samples: list = []
        trace_errs: list[float] = []
        herm_defects: list[float] = []

        def grab(t: float, dm) -> None:
            trace_errs.append(abs(dm.trace() - 1.0))
            herm_defects.append(dm.hermiticity_defect())
            samples.append(observables_from_rho(dm))

        t0 = time.perf_counter()
        evolve_master_equation(
            ORACLE_PARAMS,
            FockConfig(n_cut=n_cut, dt=ORACLE_DT, t_final=4.0),
            sample_times=ORACLE_TIMES,
            on_sample=grab)
        runs[n_cut] = OracleRun(samples, max(trace_errs), max(herm_defects),
                                time.perf_counter() - t0)
    return runs


@pytest.fixture(scope="session")
def run_weak_10():
    """chi=1e-3, eps=10: the weakly nonlinear squeezing-table point."""
    return _paper_run(1e-3, 10.0, 25.0)


@pytest.fixture(scope="session")
def run_weak_14():
    """chi=1e-3, eps=10*sqrt(2)."""
    return _paper_run(1e-3, 10.0 * np.sqrt(2.0), 25.0)


@pytest.fixture(scope="session")
def run_strong_10():
    """chi=1e-2, eps=10: the strongly nonlinear squeezing-table point."""
    return _paper_run(1e-2, 10.0, 25.0)


@pytest.fixture(scope="session")
def run_strong_14():
    """chi=1e-2, eps=10*sqrt(2): runs to t=35 to expose trajectory blowup."""
    return _paper_run(1e-2, 10.0 * np.sqrt(2.0), 35.0)

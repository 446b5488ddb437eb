"""Ensemble engine: determinism, partitioning, divergence bookkeeping."""

from __future__ import annotations

import numpy as np
import pytest

from pptrimer import backend
from pptrimer.engine import (
    DEFAULT_STEADY_WINDOW,
    EnsembleRunReport,
    IntegrationConfig,
    integrate_trajectory,
    run_ensemble,
)
from pptrimer.errors import AllDiverged, ConfigError
from pptrimer.model import SystemParams
from pptrimer.moments import population

HAVE_CYTHON = "cython" in backend.available_backends()

QUIET = SystemParams(chi=1e-3, gamma=1.0, epsilon=10.0)
SHORT = IntegrationConfig(dt=1e-3, t_final=0.5, n_traj=60, master_seed=5,
                          sample_stride=100, n_batches=6)


class TestIntegrationConfig:
    @pytest.mark.parametrize("kw", [
        dict(dt=0.0),
        dict(t_final=-1.0),
        dict(n_traj=0),
        dict(master_seed=-1),
        dict(master_seed=2**64),
        dict(sample_stride=0),
        dict(divergence_threshold=0.0),
        dict(n_batches=0),
        dict(initial_state=(0j,) * 5),
        dict(initial_state=(0j,) * 5 + (np.nan + 0j,)),
        dict(t_final=0.05, sample_stride=100),
    ])
    def test_invalid_configs_rejected(self, kw):
        with pytest.raises(ConfigError):
            IntegrationConfig(**kw)

    def test_sample_grid(self):
        cfg = IntegrationConfig(dt=1e-3, t_final=2.0, sample_stride=400)
        assert cfg.steps == 2000
        assert cfg.n_samples == 6
        np.testing.assert_allclose(cfg.sample_times, [0.0, 0.4, 0.8, 1.2, 1.6, 2.0])

    def test_initial_state_normalized_to_complex(self):
        cfg = IntegrationConfig(initial_state=(1, 0, 0, 0, 0, 0))
        assert cfg.initial_state[0] == 1 + 0j
        assert isinstance(cfg.initial_state[0], complex)


def _mean_bytes(report: EnsembleRunReport) -> list[bytes]:
    return [acc.mean_vector().tobytes() for acc in report.samples]


class TestDeterminism:
    def test_worker_count_invariance(self):
        reports = [run_ensemble(QUIET, SHORT, n_workers=nw) for nw in (1, 2, 5)]
        ref = _mean_bytes(reports[0])
        for r in reports[1:]:
            assert _mean_bytes(r) == ref
            assert r.n_completed == reports[0].n_completed
            assert r.n_diverged == reports[0].n_diverged

    def test_repeat_run_identical(self):
        a = run_ensemble(QUIET, SHORT)
        b = run_ensemble(QUIET, SHORT)
        assert _mean_bytes(a) == _mean_bytes(b)

    @pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernel not built")
    def test_backend_invariance(self):
        a = run_ensemble(QUIET, SHORT, backend="cython")
        b = run_ensemble(QUIET, SHORT, backend="numpy")
        assert _mean_bytes(a) == _mean_bytes(b)
        assert a.backend == "cython" and b.backend == "numpy"

    def test_block_partition_only_reassociates_sums(self):
        # same trajectories, different block counts: identical up to
        # floating-point reassociation of the ensemble sums
        a = run_ensemble(QUIET, SHORT)
        cfg_b = IntegrationConfig(dt=1e-3, t_final=0.5, n_traj=60, master_seed=5,
                                  sample_stride=100, n_batches=1)
        b = run_ensemble(QUIET, cfg_b)
        for acc_a, acc_b in zip(a.samples, b.samples):
            np.testing.assert_allclose(acc_a.mean_vector(), acc_b.mean_vector(),
                                       rtol=1e-12, atol=1e-12)

    def test_first_trajectory_contribution_stable(self):
        cfg1 = IntegrationConfig(dt=1e-3, t_final=0.3, n_traj=1, master_seed=17,
                                 sample_stride=100, n_batches=1)
        cfg2 = IntegrationConfig(dt=1e-3, t_final=0.3, n_traj=2, master_seed=17,
                                 sample_stride=100, n_batches=2)
        r1 = run_ensemble(QUIET, cfg1)
        r2 = run_ensemble(QUIET, cfg2)
        for acc1, acc2 in zip(r1.samples, r2.samples):
            m1 = acc1.block_mean_matrix()
            m2 = acc2.block_mean_matrix()
            assert m1[0].tobytes() == m2[0].tobytes()


class TestTrajectoryPath:
    def test_sink_receives_every_sample(self):
        cfg = IntegrationConfig(dt=1e-3, t_final=1.0, n_traj=1, master_seed=2,
                                sample_stride=200)
        seen = []
        out = integrate_trajectory(QUIET, cfg, 3,
                                   sink=lambda k, t, z: seen.append((k, t, z)))
        assert out.completed and out.divergence_time is None
        assert [k for k, _, _ in seen] == list(range(cfg.n_samples))
        np.testing.assert_allclose([t for _, t, _ in seen], cfg.sample_times)
        assert all(z.shape == (6,) for _, _, z in seen)

    def test_linear_trajectory_lands_on_fixed_point(self):
        # chi=0 removes all noise; Euler iteration leaves the fixed point
        # invariant, so the end state sits at the transient residual level
        p = SystemParams(chi=0.0, gamma=1.0, epsilon=10.0)
        cfg = IntegrationConfig(dt=1e-3, t_final=25.0, n_traj=1, master_seed=0,
                                sample_stride=25000)
        got = {}
        integrate_trajectory(p, cfg, 0, sink=lambda k, t, z: got.update({k: z}))
        target = np.array([5j, -5j, 5, 5, 5j, -5j])
        np.testing.assert_allclose(got[1], target, atol=1e-3)

    def test_zero_pump_stays_at_vacuum(self):
        p = SystemParams(chi=0.0, gamma=1.0, epsilon=0.0)
        cfg = IntegrationConfig(dt=1e-3, t_final=0.5, n_traj=1, sample_stride=100)
        states = []
        integrate_trajectory(p, cfg, 0, sink=lambda k, t, z: states.append(z))
        assert all(np.array_equal(z, np.zeros(6)) for z in states)


class TestDivergenceHandling:
    BLOWUP = SystemParams(chi=0.3, gamma=1.0, epsilon=10.0)

    def test_divergences_counted_and_excluded(self):
        cfg = IntegrationConfig(dt=1e-3, t_final=2.0, n_traj=64, master_seed=9,
                                sample_stride=100, divergence_threshold=30.0,
                                n_batches=8)
        r = run_ensemble(self.BLOWUP, cfg)
        assert r.n_diverged > 0
        assert r.n_completed + r.n_diverged == cfg.n_traj
        assert r.first_divergence_time is not None and r.first_divergence_time > 0
        alive = [r.alive_at(k) for k in range(len(r.samples))]
        assert alive[0] == cfg.n_traj
        assert all(a >= b for a, b in zip(alive, alive[1:]))
        assert alive[-1] == r.n_completed

    def test_all_diverged_raises(self):
        cfg = IntegrationConfig(dt=1e-3, t_final=1.0, n_traj=10, master_seed=0,
                                sample_stride=100, divergence_threshold=1e-3,
                                n_batches=2)
        with pytest.raises(AllDiverged):
            run_ensemble(self.BLOWUP, cfg)

    def test_trajectory_outcome_reports_divergence_time(self):
        cfg = IntegrationConfig(dt=1e-3, t_final=2.0, n_traj=1, master_seed=9,
                                sample_stride=100, divergence_threshold=30.0)
        times = [integrate_trajectory(self.BLOWUP, cfg, k).divergence_time
                 for k in range(64)]
        hit = [t for t in times if t is not None]
        assert hit
        assert all(0 < t <= 2.0 for t in hit)


class TestWindowPooling:
    def test_window_bounds_inclusive(self):
        r = run_ensemble(QUIET, SHORT)
        acc = r.window_accumulator(0.2, 0.4)
        assert acc.count == 3 * SHORT.n_traj

    def test_empty_window_rejected(self):
        r = run_ensemble(QUIET, SHORT)
        with pytest.raises(ConfigError):
            r.window_accumulator(0.21, 0.29)

    def test_default_window_matches_constant(self):
        p = SystemParams(chi=0.0, gamma=1.0, epsilon=10.0)
        cfg = IntegrationConfig(dt=1e-3, t_final=25.0, n_traj=4, master_seed=1,
                                sample_stride=1000, n_batches=2)
        r = run_ensemble(p, cfg)
        acc = r.window_accumulator()
        lo, hi = DEFAULT_STEADY_WINDOW
        n_times = sum(1 for t in r.times if lo - 1e-12 <= t <= hi + 1e-12)
        assert acc.count == n_times * cfg.n_traj

    def test_linear_window_population_matches_analytic(self):
        p = SystemParams(chi=0.0, gamma=1.0, epsilon=10.0)
        cfg = IntegrationConfig(dt=1e-3, t_final=25.0, n_traj=4, master_seed=1,
                                sample_stride=1000, n_batches=2)
        acc = run_ensemble(p, cfg).window_accumulator()
        for j in (1, 2, 3):
            est = population(acc, j)
            assert est.value == pytest.approx(25.0, abs=1e-2)
            assert est.stderr == pytest.approx(0.0, abs=1e-9)


@pytest.mark.slow
def test_step_halving_consistency():
    p = SystemParams(chi=1e-3, gamma=1.0, epsilon=10.0)
    base = dict(t_final=25.0, n_traj=1000, master_seed=31, n_batches=20)
    coarse = run_ensemble(p, IntegrationConfig(dt=1e-3, sample_stride=100, **base))
    fine = run_ensemble(p, IntegrationConfig(dt=5e-4, sample_stride=200, **base))
    acc_c = coarse.window_accumulator()
    acc_f = fine.window_accumulator()
    for j in (1, 2, 3):
        a = population(acc_c, j)
        b = population(acc_f, j)
        err = np.hypot(a.stderr, b.stderr)
        assert abs(a.value - b.value) < 3.0 * err + 1e-6

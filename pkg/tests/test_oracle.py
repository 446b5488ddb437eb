"""Master-equation oracle: assembly, invariants, exact small-system limits."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
import scipy.special

from pptrimer.errors import ConfigError, TruncationOverflow
from pptrimer.model import SystemParams
from pptrimer.moments import (
    duan_simon,
    fano_number_difference,
    g2,
    population,
    quadrature_variance,
    reid_epr,
)
from pptrimer.oracle import (
    DensityMatrix,
    FockConfig,
    FockSpace,
    evolve_master_equation,
    observables_from_rho,
)
from pptrimer.oracle import _liouvillian, _space


def fock_index(m1: int, m2: int, m3: int, n_cut: int) -> int:
    return (m1 * n_cut + m2) * n_cut + m3


def coherent_rho(betas, n_cut: int) -> DensityMatrix:
    """Truncated, renormalized product of coherent states."""
    vecs = []
    for b in betas:
        m = np.arange(n_cut)
        c = b ** m / np.sqrt(scipy.special.factorial(m))
        vecs.append(c * np.exp(-abs(b) ** 2 / 2.0))
    vec = np.kron(np.kron(vecs[0], vecs[1]), vecs[2]).astype(np.complex128)
    rho = np.outer(vec, vec.conj())
    rho /= np.trace(rho).real
    return DensityMatrix(rho, n_cut)


class TestFockConfig:
    @pytest.mark.parametrize("kw", [
        dict(n_cut=1),
        dict(n_cut=4, dt=0.0),
        dict(n_cut=4, t_final=-1.0),
    ])
    def test_invalid_configs_rejected(self, kw):
        with pytest.raises(ConfigError):
            FockConfig(**kw)


class TestFockSpace:
    def test_annihilation_operator_layout(self):
        """Mode ordering of the kron products: a_j lowers mode j only."""
        space = FockSpace(3)
        e = np.zeros(27)
        e[fock_index(1, 0, 0, 3)] = 1.0
        out = space.a[0] @ e
        assert out[fock_index(0, 0, 0, 3)] == pytest.approx(1.0)
        assert np.count_nonzero(out) == 1
        e = np.zeros(27)
        e[fock_index(0, 2, 0, 3)] = 1.0
        out = space.a[1] @ e
        assert out[fock_index(0, 1, 0, 3)] == pytest.approx(np.sqrt(2.0))
        assert np.count_nonzero(out) == 1

    def test_tail_mask_counts_top_level_states(self):
        space = FockSpace(4)
        # states with any mode at level 3: 4^3 - 3^3
        assert int(space.tail_mask.sum()) == 64 - 27


class TestDensityMatrix:
    def test_vacuum_invariants(self):
        dm = DensityMatrix.vacuum(4)
        assert dm.dim == 64
        assert dm.trace() == 1.0
        assert dm.hermiticity_defect() == 0.0
        assert dm.tail_population() == 0.0
        assert dm.min_eigenvalue() == pytest.approx(0.0, abs=1e-15)
        dm.check_invariants(spot_check_positivity=True)

    def test_tail_violation_reported(self):
        dm = DensityMatrix.vacuum(3)
        dm.rho[0, 0] = 0.0
        top = fock_index(2, 0, 0, 3)
        dm.rho[top, top] = 1.0
        with pytest.raises(TruncationOverflow):
            dm.check_invariants()


class TestLiouvillianAssembly:
    def test_slab_partition_matches_monolithic(self):
        params = SystemParams(chi=0.07, gamma=1.0, epsilon=1.1)
        space = _space(4)
        one = _liouvillian(params, space, row_block_target=10**9)
        many = _liouvillian(params, space, row_block_target=500)
        assert len(one.slabs) == 1
        assert len(many.slabs) > 4
        assert one.nnz == many.nnz
        diff = (one.tocsr() - many.tocsr()).tocoo()
        assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0
        rng = np.random.default_rng(0)
        v = rng.standard_normal(space.dim**2) + 1j * rng.standard_normal(space.dim**2)
        assert (one @ v).tobytes() == (many @ v).tobytes()

    def test_trace_annihilated_by_generator(self):
        """Tr(d rho/dt) = 0: the all-ones row of the vectorized trace is a
        left null vector of the generator."""
        params = SystemParams(chi=0.1, gamma=0.7, epsilon=1.3)
        space = _space(3)
        lv = _liouvillian(params, space).tocsr()
        dim = space.dim
        tr = np.zeros(dim * dim)
        tr[:: dim + 1] = 1.0
        assert np.max(np.abs(tr @ lv)) < 1e-13


class TestEvolution:
    def test_unpumped_vacuum_is_exactly_stationary(self):
        params = SystemParams(chi=0.1, gamma=1.0, epsilon=0.0)
        out = evolve_master_equation(params, FockConfig(n_cut=4, dt=0.02, t_final=1.0))
        assert [t for t, _ in out] == [0.5, 1.0]
        expect = DensityMatrix.vacuum(4).rho
        for _, dm in out:
            assert np.array_equal(dm.rho, expect)

    def test_sample_times_snap_to_step_grid(self):
        params = SystemParams(chi=0.0, gamma=1.0, epsilon=0.3)
        out = evolve_master_equation(
            params, FockConfig(n_cut=6, dt=0.1, t_final=1.0),
            sample_times=[0.0, 0.33, 1.0])
        assert [t for t, _ in out] == pytest.approx([0.0, 0.3, 1.0])

    def test_sample_times_outside_range_rejected(self):
        params = SystemParams(chi=0.0, gamma=1.0, epsilon=0.3)
        cfg = FockConfig(n_cut=3, dt=0.1, t_final=1.0)
        with pytest.raises(ConfigError):
            evolve_master_equation(params, cfg, sample_times=[2.0])

    def test_truncation_watchdog_fires_even_unchecked(self):
        """The per-step tail watch is an invariant of the integrator, not an
        optional output check."""
        params = SystemParams(chi=0.1, gamma=1.0, epsilon=1.5)
        cfg = FockConfig(n_cut=6, dt=0.01, t_final=2.0)
        with pytest.raises(TruncationOverflow, match="tail"):
            evolve_master_equation(params, cfg, check=False)

    def test_invariants_along_a_nonlinear_run(self):
        params = SystemParams(chi=0.05, gamma=1.0, epsilon=0.6)
        out = evolve_master_equation(
            params, FockConfig(n_cut=8, dt=0.02, t_final=2.0))
        for _, dm in out:
            dm.check_invariants(spot_check_positivity=True)
            assert abs(dm.trace() - 1.0) < 1e-12

    def test_callback_mode_matches_retained_mode(self):
        params = SystemParams(chi=0.05, gamma=1.0, epsilon=0.5)
        cfg = FockConfig(n_cut=7, dt=0.02, t_final=1.0)
        retained = evolve_master_equation(params, cfg)
        seen: list[tuple[float, bytes]] = []
        empty = evolve_master_equation(
            params, cfg,
            on_sample=lambda t, dm: seen.append((t, dm.rho.tobytes())))
        assert empty == []
        assert [t for t, _ in seen] == [t for t, _ in retained]
        for (_, raw), (_, dm) in zip(seen, retained):
            assert raw == dm.rho.tobytes()

    def test_step_halving_converged(self):
        params = SystemParams(chi=0.05, gamma=1.0, epsilon=0.5)
        coarse = evolve_master_equation(
            params, FockConfig(n_cut=7, dt=0.02, t_final=1.0))
        fine = evolve_master_equation(
            params, FockConfig(n_cut=7, dt=0.01, t_final=1.0))
        for (_, a), (_, b) in zip(coarse, fine):
            m_a = observables_from_rho(a).mean_vector()
            m_b = observables_from_rho(b).mean_vector()
            np.testing.assert_allclose(m_a, m_b, rtol=0, atol=1e-7)


class TestLinearLimit:
    """chi=0 makes the master equation exactly solvable: means follow the
    classical ODE and the state stays a coherent product."""

    @staticmethod
    def classical_means(params: SystemParams, t: float) -> np.ndarray:
        g, j, eps = params.gamma, params.j_tunnel, params.epsilon
        m = np.array([[-g, 1j * j, 0.0],
                      [1j * j, 0.0, 1j * j],
                      [0.0, 1j * j, -g]], dtype=complex)
        b = np.array([0.0, eps, 0.0], dtype=complex)
        a_inf = np.linalg.solve(m, -b)
        return scipy.linalg.expm(m * t) @ (-a_inf) + a_inf

    def test_means_track_classical_ode(self):
        params = SystemParams(chi=0.0, gamma=1.0, epsilon=0.7)
        out = evolve_master_equation(
            params, FockConfig(n_cut=8, dt=0.01, t_final=4.0),
            sample_times=[1.0, 2.0, 4.0])
        for t, dm in out:
            mv = observables_from_rho(dm).mean_vector()
            means = mv[[0, 6, 12]]
            np.testing.assert_allclose(means, self.classical_means(params, t),
                                       rtol=0, atol=1e-5)

    @pytest.mark.slow
    def test_steady_state_amplitudes(self):
        params = SystemParams(chi=0.0, gamma=1.0, epsilon=1.0)
        (_, dm), = evolve_master_equation(
            params, FockConfig(n_cut=9, dt=0.02, t_final=16.0),
            sample_times=[16.0])
        mv = observables_from_rho(dm)
        means = mv.mean_vector()[[0, 6, 12]]
        np.testing.assert_allclose(means, [0.5j, 0.5, 0.5j], atol=1e-3)
        # a driven-damped linear system stays a coherent product
        assert g2(mv, 2, 2).value == pytest.approx(1.0, abs=1e-4)
        assert quadrature_variance(mv, 2, 0.3).value == pytest.approx(1.0, abs=1e-4)


class TestObservables:
    def test_number_state_monomials(self):
        dm = DensityMatrix.vacuum(3)
        dm.rho[0, 0] = 0.0
        k = fock_index(1, 0, 1, 3)
        dm.rho[k, k] = 1.0
        mv = observables_from_rho(dm)
        assert population(mv, 1).value == pytest.approx(1.0)
        assert population(mv, 2).value == pytest.approx(0.0, abs=1e-15)
        assert population(mv, 3).value == pytest.approx(1.0)
        assert g2(mv, 1, 1).value == pytest.approx(0.0, abs=1e-15)
        assert g2(mv, 1, 3).value == pytest.approx(1.0)
        assert fano_number_difference(mv).value == pytest.approx(0.0, abs=1e-14)
        assert quadrature_variance(mv, 1, 0.0).value == pytest.approx(3.0)

    def test_coherent_product_identities(self):
        mv = observables_from_rho(coherent_rho([0.3, 0.5j, -0.2], 10))
        for pair in ((1, 1), (2, 2), (3, 3), (1, 3)):
            assert g2(mv, *pair).value == pytest.approx(1.0, abs=1e-9)
        assert fano_number_difference(mv).value == pytest.approx(1.0, abs=1e-9)
        for theta in (0.0, 0.9):
            for j in (1, 2, 3):
                assert quadrature_variance(mv, j, theta).value == pytest.approx(
                    1.0, abs=1e-9)
        assert duan_simon(mv, 0.4).value == pytest.approx(4.0, abs=1e-8)
        assert reid_epr(mv, 0.4).value == pytest.approx(1.0, abs=1e-8)

    def test_vacuum_observables(self):
        mv = observables_from_rho(DensityMatrix.vacuum(4))
        for j in (1, 2, 3):
            assert population(mv, j).value == 0.0
            for theta in (0.0, 1.0):
                assert quadrature_variance(mv, j, theta).value == pytest.approx(1.0)

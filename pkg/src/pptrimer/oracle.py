"""Truncated-Fock master-equation integrator.

An independent brute-force check of the stochastic machinery at small
pump strength: the three-mode density matrix is evolved directly under
the Lindblad equation

    drho/dt = -i[H, rho] + gamma * sum_{j in {1,3}} (2 a_j rho a_j+
                                                     - n_j rho - rho n_j)

with H = chi * sum_j a_j+^2 a_j^2 - J (a_2+(a_1+a_3) + h.c.)
        + i eps a_2+ - i eps* a_2,

in a Fock basis truncated at n_cut quanta per mode.  The equation is
applied as one sparse matrix on the vectorized density matrix and stepped
with classical fixed-step RK4.  Observables come out as the same
33-monomial mean vector the stochastic estimators consume, so every
downstream formula is shared between the two methods.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, TruncationOverflow
from .model import SystemParams
from .moments import N_MONOMIALS, MomentVector

__all__ = [
    "FockConfig",
    "DensityMatrix",
    "FockSpace",
    "evolve_master_equation",
    "observables_from_rho",
]

TAIL_TOL = 1e-6
TRACE_TOL = 1e-8
HERM_TOL = 1e-10
# truncation-induced negativity scales with the admitted tail weight, so the
# positivity spot check uses the same scale as TAIL_TOL
POSITIVITY_TOL = 1e-6


@dataclass(frozen=True)
class FockConfig:
    """Truncation and stepping controls for the master-equation oracle."""

    n_cut: int
    dt: float = 0.005
    t_final: float = 4.0

    def __post_init__(self) -> None:
        if self.n_cut < 2:
            raise ConfigError(f"n_cut must be >= 2, got {self.n_cut}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.t_final > 0:
            raise ConfigError(f"t_final must be > 0, got {self.t_final}")


class FockSpace:
    """Sparse operators of the three-mode truncated Fock space, built once
    per truncation.  Basis index is C-ordered (m1, m2, m3)."""

    def __init__(self, n_cut: int):
        self.n_cut = n_cut
        self.dim = n_cut**3
        n = n_cut
        a = sp.diags_array(np.sqrt(np.arange(1.0, n)), offsets=1, format="csr")
        eye = sp.eye_array(n, format="csr")
        self.a = (
            sp.kron(sp.kron(a, eye), eye, format="csr"),
            sp.kron(sp.kron(eye, a), eye, format="csr"),
            sp.kron(sp.kron(eye, eye), a, format="csr"),
        )
        levels = np.arange(n, dtype=float)
        grid = np.meshgrid(levels, levels, levels, indexing="ij")
        self.occupation = tuple(g.reshape(-1) for g in grid)
        # basis states with any mode at the top retained level
        self.tail_mask = np.any(np.stack([g == n - 1 for g in self.occupation]), axis=0)
        self._monomial_ops: list | None = None

    def monomial_operators(self) -> list:
        """The 33 normally ordered operators matching the monomial registry."""
        if self._monomial_ops is not None:
            return self._monomial_ops
        ops: list = []
        for j in range(3):
            aj = self.a[j]
            adj = aj.conj().T.tocsr()
            nd = self.occupation[j]
            ops.append(aj)
            ops.append(adj)
            ops.append((aj @ aj).tocsr())
            ops.append((adj @ adj).tocsr())
            ops.append(sp.diags_array(nd, format="csr"))
            ops.append(sp.diags_array(nd * (nd - 1.0), format="csr"))
        for i, j in ((0, 1), (0, 2), (1, 2)):
            ai, aj = self.a[i], self.a[j]
            adi = ai.conj().T.tocsr()
            adj = aj.conj().T.tocsr()
            ops.append((ai @ aj).tocsr())
            ops.append((adi @ adj).tocsr())
            ops.append((adi @ aj).tocsr())
            ops.append((adj @ ai).tocsr())
            ops.append(sp.diags_array(self.occupation[i] * self.occupation[j], format="csr"))
        self._monomial_ops = ops
        return ops


@lru_cache(maxsize=4)
def _space(n_cut: int) -> FockSpace:
    return FockSpace(n_cut)


@dataclass
class DensityMatrix:
    """Three-mode density matrix over the truncated Fock basis."""

    rho: np.ndarray
    n_cut: int

    @classmethod
    def vacuum(cls, n_cut: int) -> "DensityMatrix":
        dim = n_cut**3
        rho = np.zeros((dim, dim), dtype=np.complex128)
        rho[0, 0] = 1.0
        return cls(rho, n_cut)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def tail_population(self) -> float:
        mask = _space(self.n_cut).tail_mask
        return float(np.real(np.sum(np.diag(self.rho)[mask])))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def check_invariants(self, spot_check_positivity: bool = False) -> None:
        tr = self.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise TruncationOverflow(f"trace drifted to {tr}")
        defect = self.hermiticity_defect()
        if defect > HERM_TOL:
            raise TruncationOverflow(f"hermiticity defect {defect:.3e}")
        tail = self.tail_population()
        if tail > TAIL_TOL:
            raise TruncationOverflow(
                f"tail population {tail:.3e} exceeds {TAIL_TOL:g}; increase n_cut"
            )
        if spot_check_positivity and self.min_eigenvalue() < -POSITIVITY_TOL:
            raise TruncationOverflow(f"negative eigenvalue {self.min_eigenvalue():.3e}")


def _hamiltonian(params: SystemParams, space: FockSpace) -> sp.csr_array:
    a1, a2, a3 = space.a
    n1, n2, n3 = space.occupation
    diag = params.chi * sum(nd * (nd - 1.0) for nd in (n1, n2, n3))
    h = sp.diags_array(diag, format="csr").astype(np.complex128)
    hop = (a2.conj().T @ (a1 + a3)).tocsr()
    h = h - params.j_tunnel * (hop + hop.conj().T)
    pump = (1j * params.epsilon) * a2.conj().T
    h = h + (pump + pump.conj().T)
    return h.tocsr()


class _RowSlabOperator:
    """A tall sparse matrix stored as a vertical stack of CSR slabs.
    Applying slab by slab keeps peak memory near the stored size, which
    matters once the superoperator reaches a few gigabytes."""

    __slots__ = ("slabs", "offsets", "shape")

    def __init__(self, slabs: list, offsets: list[int]):
        self.slabs = slabs
        self.offsets = offsets
        self.shape = (offsets[-1], slabs[0].shape[1])

    @property
    def nnz(self) -> int:
        return sum(s.nnz for s in self.slabs)

    def apply(self, v: np.ndarray, out: np.ndarray) -> np.ndarray:
        for s, r0, r1 in zip(self.slabs, self.offsets, self.offsets[1:]):
            out[r0:r1] = s @ v
        return out

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v, np.empty(self.shape[0], dtype=np.complex128))

    def tocsr(self) -> sp.csr_array:
        return sp.vstack(self.slabs, format="csr")


def _liouvillian(params: SystemParams, space: FockSpace,
                 row_block_target: int = 1_000_000) -> _RowSlabOperator:
    """Sparse action on the row-major vectorized density matrix, using
    vec(A X B) = kron(A, B.T) vec(X).  Rows are assembled in slabs of
    roughly row_block_target at a time; building the generator in one
    piece needs several transient copies and exhausts memory near the
    upper end of usable truncations."""
    h = _hamiltonian(params, space)
    dim = space.dim
    eye = sp.eye_array(dim, format="csr")
    ht = h.T.tocsr()
    jumps = []
    for j in (0, 2):
        aj = space.a[j]
        jumps.append((aj, aj.conj().tocsr(),
                      sp.diags_array(space.occupation[j], format="csr")))

    n_slabs = max(1, -(-dim * dim // row_block_target))
    bounds = np.linspace(0, dim, n_slabs + 1).astype(int)
    slabs = []
    offsets = [0]
    for i0, i1 in zip(bounds[:-1], bounds[1:]):
        if i0 == i1:
            continue
        ei = eye[i0:i1, :]
        blk = -1j * (sp.kron(h[i0:i1, :], eye) - sp.kron(ei, ht))
        for aj, ajc, nop in jumps:
            blk = blk + params.gamma * (
                2.0 * sp.kron(aj[i0:i1, :], ajc)
                - sp.kron(nop[i0:i1, :], eye)
                - sp.kron(ei, nop)
            )
        slabs.append(blk.tocsr())
        offsets.append(int(i1) * dim)
    return _RowSlabOperator(slabs, offsets)


def evolve_master_equation(
    params: SystemParams,
    cfg: FockConfig,
    sample_times: Sequence[float] | None = None,
    check: bool = True,
    on_sample: Callable[[float, DensityMatrix], None] | None = None,
) -> list[tuple[float, DensityMatrix]]:
    """Evolve the vacuum under the master equation with fixed-step RK4,
    returning the density matrix at each requested sample time (nearest
    step).  The truncation tail is watched at every step.

    With on_sample set, each sampled state is handed to the callback
    instead of being retained and the return value is empty; the callback
    must not keep a reference past its own call.  Use this at large n_cut,
    where every retained matrix costs dim^2 complex entries."""
    if sample_times is None:
        sample_times = np.arange(0.5, cfg.t_final + 1e-9, 0.5)
    sample_steps = sorted({int(round(t / cfg.dt)) for t in sample_times})
    n_steps = int(round(cfg.t_final / cfg.dt))
    if sample_steps and (sample_steps[0] < 0 or sample_steps[-1] > n_steps):
        raise ConfigError("sample times must lie within [0, t_final]")

    space = _space(cfg.n_cut)
    lv = _liouvillian(params, space)
    tail_mask = space.tail_mask
    dim = space.dim
    dt = cfg.dt

    v = DensityMatrix.vacuum(cfg.n_cut).rho.reshape(-1)
    out: list[tuple[float, DensityMatrix]] = []
    wanted = set(sample_steps)

    def emit(step: int) -> None:
        if on_sample is not None:
            # view of the live state buffer: valid only during the callback
            dm = DensityMatrix(v.reshape(dim, dim), cfg.n_cut)
            if check:
                dm.check_invariants()
            on_sample(step * dt, dm)
            return
        dm = DensityMatrix(v.reshape(dim, dim).copy(), cfg.n_cut)
        if check:
            dm.check_invariants()
        out.append((step * dt, dm))

    # fixed workspace: the state vector costs dim^2 complex entries, so the
    # step loop reuses four scratch buffers instead of allocating ~15 of
    # them per step
    arg = np.empty_like(v)
    acc = np.empty_like(v)
    kbuf = np.empty_like(v)
    tmp = np.empty_like(v)

    if 0 in wanted:
        emit(0)
    for step in range(1, n_steps + 1):
        lv.apply(v, kbuf)                            # k1
        np.multiply(kbuf, dt / 6.0, out=acc)
        acc += v
        np.multiply(kbuf, 0.5 * dt, out=arg)
        arg += v
        lv.apply(arg, kbuf)                          # k2
        np.multiply(kbuf, dt / 3.0, out=tmp)
        acc += tmp
        np.multiply(kbuf, 0.5 * dt, out=arg)
        arg += v
        lv.apply(arg, kbuf)                          # k3
        np.multiply(kbuf, dt / 3.0, out=tmp)
        acc += tmp
        np.multiply(kbuf, dt, out=arg)
        arg += v
        lv.apply(arg, kbuf)                          # k4
        np.multiply(kbuf, dt / 6.0, out=tmp)
        acc += tmp
        v, acc = acc, v
        tail = np.real(np.sum(v.reshape(dim, dim).diagonal()[tail_mask]))
        if tail > TAIL_TOL:
            raise TruncationOverflow(
                f"tail population {tail:.3e} exceeds {TAIL_TOL:g} at t={step * dt:g}; "
                f"n_cut={cfg.n_cut} too small for these parameters"
            )
        if step in wanted:
            emit(step)
    return out


def observables_from_rho(dm: DensityMatrix) -> MomentVector:
    """Exact monomial means Tr[rho O] for the full registry, as consumed
    by the stochastic estimators."""
    space = _space(dm.n_cut)
    means = np.empty(N_MONOMIALS, dtype=np.complex128)
    for k, op in enumerate(space.monomial_operators()):
        coo = op.tocoo()
        means[k] = np.sum(coo.data * dm.rho[coo.col, coo.row])
    return MomentVector(means)

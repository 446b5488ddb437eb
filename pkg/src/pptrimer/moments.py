"""Streaming phase-space moments and the intra-well observables built on them.

The doubled phase-space average of a normally ordered operator product is
the ensemble mean of the matching monomial in (alpha, alpha_plus).  Every
observable this package reports is a function of 33 monomials:

    per well j:    a_j, ap_j, a_j^2, ap_j^2, ap_j a_j, ap_j^2 a_j^2
    per pair i<j:  a_i a_j, ap_i ap_j, ap_i a_j, ap_j a_i, (ap_i a_i)(ap_j a_j)

Sums of these monomials are accumulated per contiguous trajectory block.
Keeping the block structure all the way to the estimators serves two
purposes: merging partial results from parallel workers is exact dict
union (associative, commutative, no arithmetic), and the spread of
per-block estimates gives standard errors without storing anything per
trajectory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateInference,
    EmptyAccumulator,
    SamplingDiagnosticWarning,
    ZeroPopulation,
)

__all__ = [
    "MONOMIAL_LABELS",
    "N_MONOMIALS",
    "FIRST_MOMENT_INDICES",
    "evaluate_monomials",
    "MomentAccumulator",
    "MomentVector",
    "pool_samples",
    "Estimate",
    "population",
    "g2",
    "fano_number_difference",
    "quadrature_variance",
    "quadrature_covariance",
    "duan_simon",
    "reid_epr",
    "scan_angles",
    "ScanResult",
    "CorrelationReport",
    "build_correlation_report",
]

N_MONOMIALS = 33

_PAIR_BASE = {(1, 2): 18, (1, 3): 23, (2, 3): 28}

# Ratio of |imaginary residue| to |real part| above which a nominally real
# estimator is flagged as poorly converged.
IMAG_WARN_RATIO = 1e-2


def _ia(j: int) -> int:
    return 6 * (j - 1)


def _iap(j: int) -> int:
    return 6 * (j - 1) + 1


def _ia2(j: int) -> int:
    return 6 * (j - 1) + 2


def _iap2(j: int) -> int:
    return 6 * (j - 1) + 3


def _in(j: int) -> int:
    return 6 * (j - 1) + 4


def _iw(j: int) -> int:
    return 6 * (j - 1) + 5


def _pair(i: int, j: int) -> int:
    return _PAIR_BASE[(min(i, j), max(i, j))]


# (a1, ap1, a2, ap2, a3, ap3) positions within a monomial vector.
FIRST_MOMENT_INDICES: tuple[int, ...] = tuple(
    k for j in (1, 2, 3) for k in (_ia(j), _iap(j))
)


MONOMIAL_LABELS: tuple[str, ...] = tuple(
    lab
    for j in (1, 2, 3)
    for lab in (
        f"a{j}",
        f"ap{j}",
        f"a{j}^2",
        f"ap{j}^2",
        f"ap{j}*a{j}",
        f"ap{j}^2*a{j}^2",
    )
) + tuple(
    lab
    for (i, j) in ((1, 2), (1, 3), (2, 3))
    for lab in (
        f"a{i}*a{j}",
        f"ap{i}*ap{j}",
        f"ap{i}*a{j}",
        f"ap{j}*a{i}",
        f"n{i}*n{j}",
    )
)


def evaluate_monomials(states: np.ndarray) -> np.ndarray:
    """Map raw phase-space samples to monomial values.

    states has shape (n_samples, 6, n_lanes) with the variable axis in the
    order (a1, ap1, a2, ap2, a3, ap3); the return value has shape
    (n_samples, 33, n_lanes).  A lane recorded as all zeros (the convention
    for a diverged trajectory) contributes zeros to every monomial.
    """
    z = np.asarray(states, dtype=np.complex128)
    if z.ndim != 3 or z.shape[1] != 6:
        raise ValueError(f"states must have shape (n_samples, 6, n_lanes), got {z.shape}")
    a1, p1, a2, p2, a3, p3 = (z[:, k, :] for k in range(6))
    n1 = p1 * a1
    n2 = p2 * a2
    n3 = p3 * a3
    out = np.empty((z.shape[0], N_MONOMIALS, z.shape[2]), dtype=np.complex128)
    for j, (a, p, n) in enumerate(((a1, p1, n1), (a2, p2, n2), (a3, p3, n3))):
        base = 6 * j
        out[:, base + 0] = a
        out[:, base + 1] = p
        out[:, base + 2] = a * a
        out[:, base + 3] = p * p
        out[:, base + 4] = n
        out[:, base + 5] = n * n
    for base, (a, p, n), (b, q, m) in (
        (18, (a1, p1, n1), (a2, p2, n2)),
        (23, (a1, p1, n1), (a3, p3, n3)),
        (28, (a2, p2, n2), (a3, p3, n3)),
    ):
        out[:, base + 0] = a * b
        out[:, base + 1] = p * q
        out[:, base + 2] = p * b
        out[:, base + 3] = q * a
        out[:, base + 4] = n * m
    return out


@dataclass
class MomentAccumulator:
    """Monomial sums at one sample time, kept per trajectory block.

    blocks maps a block id to (count, sums) where count is the number of
    contributing trajectories and sums is the length-33 vector of monomial
    sums over them.  Two accumulators may be merged only if their block id
    sets are disjoint; the merged result is then independent of how the
    original work was partitioned.
    """

    blocks: dict[int, tuple[int, np.ndarray]] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "MomentAccumulator":
        return cls({})

    def add_block(self, block_id: int, count: int, sums: np.ndarray) -> None:
        if block_id in self.blocks:
            raise ValueError(f"duplicate block id {block_id}")
        sums = np.asarray(sums, dtype=np.complex128)
        if sums.shape != (N_MONOMIALS,):
            raise ValueError(f"sums must have shape ({N_MONOMIALS},), got {sums.shape}")
        if count < 0:
            raise ValueError("count must be >= 0")
        self.blocks[block_id] = (int(count), sums)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        overlap = self.blocks.keys() & other.blocks.keys()
        if overlap:
            raise ValueError(f"cannot merge accumulators sharing block ids {sorted(overlap)}")
        merged = dict(self.blocks)
        merged.update(other.blocks)
        return MomentAccumulator(merged)

    @property
    def count(self) -> int:
        return sum(c for c, _ in self.blocks.values())

    def _nonempty_items(self) -> list[tuple[int, tuple[int, np.ndarray]]]:
        return [(bid, cs) for bid, cs in sorted(self.blocks.items()) if cs[0] > 0]

    def mean_vector(self) -> np.ndarray:
        """Pooled monomial means over all blocks, summed in block id order."""
        items = self._nonempty_items()
        if not items:
            raise EmptyAccumulator("no samples accumulated")
        total = np.sum(np.stack([cs[1] for _, cs in items]), axis=0)
        count = sum(cs[0] for _, cs in items)
        return total / count

    def block_mean_matrix(self) -> np.ndarray:
        """Per-block monomial means, shape (n_nonempty_blocks, 33)."""
        items = self._nonempty_items()
        if not items:
            return np.empty((0, N_MONOMIALS), dtype=np.complex128)
        return np.stack([cs[1] / cs[0] for _, cs in items])


@dataclass
class MomentVector:
    """Exact monomial means from a non-stochastic source (a density-matrix
    evolution, or a hand-built test case).  Presents the same read API as
    MomentAccumulator; estimators computed from it carry zero stderr."""

    means: np.ndarray

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=np.complex128)
        if self.means.shape != (N_MONOMIALS,):
            raise ValueError(f"means must have shape ({N_MONOMIALS},), got {self.means.shape}")

    @property
    def count(self) -> int:
        return 1

    def mean_vector(self) -> np.ndarray:
        return self.means

    def block_mean_matrix(self) -> np.ndarray:
        return np.empty((0, N_MONOMIALS), dtype=np.complex128)


def pool_samples(accumulators: Sequence[MomentAccumulator]) -> MomentAccumulator:
    """Pool several sample-time accumulators into one, treating each
    (trajectory, time) pair as an observation.  All inputs must carry the
    same block ids; per-block counts and sums are added in time order, so
    the result does not depend on how blocks were produced."""
    accs = list(accumulators)
    if not accs:
        raise EmptyAccumulator("cannot pool zero sample times")
    ids = sorted(accs[0].blocks.keys())
    for acc in accs[1:]:
        if sorted(acc.blocks.keys()) != ids:
            raise ValueError("pooled accumulators must share the same block ids")
    pooled = MomentAccumulator()
    for bid in ids:
        count = sum(acc.blocks[bid][0] for acc in accs)
        sums = np.sum(np.stack([acc.blocks[bid][1] for acc in accs]), axis=0)
        pooled.add_block(bid, count, sums)
    return pooled


# ---------------------------------------------------------------------------
# estimator cores: pure functions of a pooled mean vector


def _pop_c(m: np.ndarray, j: int) -> complex:
    return m[_in(j)]


def _g2_c(m: np.ndarray, i: int, j: int) -> complex:
    ni = m[_in(i)].real
    nj = m[_in(j)].real
    if i == j:
        return m[_iw(i)] / (ni * nj)
    return m[_pair(i, j) + 4] / (ni * nj)


def _number_variance(m: np.ndarray, j: int) -> float:
    n = m[_in(j)].real
    return m[_iw(j)].real + n - n * n


def _number_covariance_13(m: np.ndarray) -> float:
    return m[_pair(1, 3) + 4].real - m[_in(1)].real * m[_in(3)].real


def _fano_c(m: np.ndarray) -> float:
    v = _number_variance(m, 1) + _number_variance(m, 3) - 2.0 * _number_covariance_13(m)
    return v / (m[_in(1)].real + m[_in(3)].real)


def _vx_c(m: np.ndarray, j: int, theta: float) -> complex:
    da2 = m[_ia2(j)] - m[_ia(j)] * m[_ia(j)]
    dp2 = m[_iap2(j)] - m[_iap(j)] * m[_iap(j)]
    dn = m[_in(j)] - m[_iap(j)] * m[_ia(j)]
    ph = np.exp(-2j * theta)
    return 1.0 + ph * da2 + np.conj(ph) * dp2 + 2.0 * dn


def _cx_c(m: np.ndarray, i: int, j: int, theta: float) -> complex:
    base = _pair(i, j)
    daa = m[base + 0] - m[_ia(i)] * m[_ia(j)]
    dpp = m[base + 1] - m[_iap(i)] * m[_iap(j)]
    dpa = m[base + 2] - m[_iap(i)] * m[_ia(j)]
    dap = m[base + 3] - m[_iap(j)] * m[_ia(i)]
    ph = np.exp(-2j * theta)
    return ph * daa + np.conj(ph) * dpp + dpa + dap


_HALF_PI = np.pi / 2.0


def _ds_c(m: np.ndarray, theta: float) -> float:
    vx1 = _vx_c(m, 1, theta).real
    vx3 = _vx_c(m, 3, theta).real
    cx = _cx_c(m, 1, 3, theta).real
    vy1 = _vx_c(m, 1, theta + _HALF_PI).real
    vy3 = _vx_c(m, 3, theta + _HALF_PI).real
    cy = _cx_c(m, 1, 3, theta + _HALF_PI).real
    return (vx1 + vx3 + 2.0 * cx) + (vy1 + vy3 - 2.0 * cy)


def _epr_c(m: np.ndarray, theta: float, target: int, conditioner: int) -> float:
    vxt = _vx_c(m, target, theta).real
    vxc = _vx_c(m, conditioner, theta).real
    cx = _cx_c(m, target, conditioner, theta).real
    vyt = _vx_c(m, target, theta + _HALF_PI).real
    vyc = _vx_c(m, conditioner, theta + _HALF_PI).real
    cy = _cx_c(m, target, conditioner, theta + _HALF_PI).real
    vinf_x = vxt - cx * cx / vxc
    vinf_y = vyt - cy * cy / vyc
    return vinf_x * vinf_y


# ---------------------------------------------------------------------------
# public estimators with standard errors


@dataclass(frozen=True)
class Estimate:
    """A real estimator value with its standard error and, where the
    estimator is only real in the ensemble limit, the imaginary residue."""

    value: float
    stderr: float
    imag: float = 0.0


def _stderr(block_values: np.ndarray) -> float:
    b = len(block_values)
    if b == 0:
        return 0.0
    if b == 1:
        return float("nan")
    return float(np.std(block_values, ddof=1) / np.sqrt(b))


def _check_imag(value: complex, what: str) -> None:
    scale = max(abs(value.real), 1e-30)
    if abs(value.imag) / scale > IMAG_WARN_RATIO:
        warnings.warn(
            f"{what}: imaginary residue {value.imag:.3e} exceeds "
            f"{IMAG_WARN_RATIO:g} of the real part {value.real:.3e}; "
            "ensemble likely under-converged",
            SamplingDiagnosticWarning,
            stacklevel=3,
        )


def _estimate_complex(source, fn: Callable[[np.ndarray], complex], what: str) -> Estimate:
    if source.count == 0:
        raise EmptyAccumulator("no samples accumulated")
    value = complex(fn(source.mean_vector()))
    blocks = source.block_mean_matrix()
    vals = np.array([complex(fn(mb)).real for mb in blocks])
    _check_imag(value, what)
    return Estimate(value.real, _stderr(vals), value.imag)


def population(source, j: int) -> Estimate:
    """Mean occupation of well j."""
    return _estimate_complex(source, lambda m: _pop_c(m, j), f"N{j}")


def _require_population(source, j: int) -> float:
    est = population(source, j)
    floor = 3.0 * est.stderr if np.isfinite(est.stderr) else 0.0
    if not est.value > floor:
        raise ZeroPopulation(f"population of well {j} ({est.value:.3e}) is consistent with 0")
    return est.value


def g2(source, i: int, j: int) -> Estimate:
    """Normalized second-order number correlation between wells i and j
    (same-well for i == j)."""
    _require_population(source, i)
    if j != i:
        _require_population(source, j)
    return _estimate_complex(source, lambda m: _g2_c(m, i, j), f"g2({i},{j})")


def fano_number_difference(source) -> Estimate:
    """Fano factor of the end-well number difference,
    V(N1 - N3) / (N1 + N3).  1 for independent coherent states, 0 for two
    equal Fock states."""
    _require_population(source, 1)
    _require_population(source, 3)
    return _estimate_complex(source, _fano_c, "F(N1-N3)")


def quadrature_variance(source, j: int, theta: float) -> Estimate:
    """Variance of the quadrature X_j(theta) = a_j e^{-i theta} + h.c.
    theta in radians; the theta + pi/2 value is the conjugate quadrature
    Y_j(theta)."""
    return _estimate_complex(source, lambda m: _vx_c(m, j, theta), f"V(X{j})")


def quadrature_covariance(source, i: int, j: int, theta: float) -> Estimate:
    """Covariance V(X_i(theta), X_j(theta)), theta in radians."""
    return _estimate_complex(source, lambda m: _cx_c(m, i, j, theta), f"V(X{i},X{j})")


def duan_simon(source, theta: float) -> Estimate:
    """Combined quadrature variance V(X1+X3) + V(Y1-Y3) at angle theta
    (radians).  Values below 4 certify inseparability of wells 1 and 3."""
    return _estimate_complex(source, lambda m: _ds_c(m, theta), "DS13")


def reid_epr(source, theta: float, target: int = 1, conditioner: int = 3) -> Estimate:
    """Product of inferred quadrature variances of the target well given
    quadrature measurements on the conditioner, at angle theta (radians).
    Values below 1 certify EPR steering."""
    if source.count == 0:
        raise EmptyAccumulator("no samples accumulated")
    m = source.mean_vector()
    vxc = _vx_c(m, conditioner, theta).real
    vyc = _vx_c(m, conditioner, theta + _HALF_PI).real
    floor = _degenerate_floor(source, conditioner, theta)
    if vxc <= floor or vyc <= floor:
        raise DegenerateInference(
            f"conditioning variance of well {conditioner} is consistent with 0 "
            f"(V(X)={vxc:.3e}, V(Y)={vyc:.3e})"
        )
    return _estimate_complex(
        source, lambda mm: _epr_c(mm, theta, target, conditioner), f"EPR{target}{conditioner}"
    )


def _degenerate_floor(source, conditioner: int, theta: float) -> float:
    se = quadrature_variance(source, conditioner, theta).stderr
    if np.isfinite(se) and se > 0.0:
        return 3.0 * se
    return 1e-10


# ---------------------------------------------------------------------------
# angle scan


@dataclass
class ScanResult:
    """Angle-resolved quadrature observables on a degree grid, with the
    minimum and its location for each.  flat marks observables whose total
    variation over the grid is within noise, in which case the argmin is
    reported but carries no information."""

    theta_deg: np.ndarray
    vx: np.ndarray            # (3, G) variances of X_1, X_2, X_3
    vx_err: np.ndarray
    ds: np.ndarray            # (G,)
    ds_err: np.ndarray
    epr: np.ndarray           # (G,)
    epr_err: np.ndarray
    minima: dict[str, tuple[float, Estimate]]
    flat: dict[str, bool]


_SCAN_KEYS = ("vx1", "vx2", "vx3", "ds", "epr")


def scan_angles(source, grid_deg: np.ndarray | None = None) -> ScanResult:
    """Evaluate V(X_j), DS13 and EPR13 on an angle grid (degrees, default
    one-degree steps over [0, 180)) and locate each minimum.

    Angles where the EPR conditioning variance is consistent with zero are
    recorded as NaN and skipped by the minimum; DegenerateInference
    propagates only if that happens at every angle of the grid."""
    if grid_deg is None:
        grid_deg = np.arange(0.0, 180.0, 1.0)
    grid_deg = np.asarray(grid_deg, dtype=float)
    if grid_deg.size == 0:
        raise ValueError("angle grid must be nonempty")
    if source.count == 0:
        raise EmptyAccumulator("no samples accumulated")

    g = grid_deg.size
    vx = np.empty((3, g))
    vx_err = np.empty((3, g))
    ds = np.empty(g)
    ds_err = np.empty(g)
    epr = np.empty(g)
    epr_err = np.empty(g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingDiagnosticWarning)
        for k, deg in enumerate(grid_deg):
            th = np.deg2rad(deg)
            for j in (1, 2, 3):
                est = quadrature_variance(source, j, th)
                vx[j - 1, k] = est.value
                vx_err[j - 1, k] = est.stderr
            est = duan_simon(source, th)
            ds[k], ds_err[k] = est.value, est.stderr
            try:
                est = reid_epr(source, th)
            except DegenerateInference:
                epr[k], epr_err[k] = np.nan, np.nan
            else:
                epr[k], epr_err[k] = est.value, est.stderr

    curves = {
        "vx1": (vx[0], vx_err[0]),
        "vx2": (vx[1], vx_err[1]),
        "vx3": (vx[2], vx_err[2]),
        "ds": (ds, ds_err),
        "epr": (epr, epr_err),
    }
    minima: dict[str, tuple[float, Estimate]] = {}
    flat: dict[str, bool] = {}
    for key, (vals, errs) in curves.items():
        if not np.isfinite(vals).any():
            raise DegenerateInference(
                f"{key} inference is degenerate at every scanned angle")
        k_min = int(np.nanargmin(vals))
        k_max = int(np.nanargmax(vals))
        minima[key] = (float(grid_deg[k_min]), Estimate(float(vals[k_min]), float(errs[k_min])))
        spread = vals[k_max] - vals[k_min]
        noise = np.hypot(errs[k_min], errs[k_max])
        flat[key] = bool(spread <= (3.0 * noise if np.isfinite(noise) and noise > 0 else 1e-12))
    return ScanResult(grid_deg, vx, vx_err, ds, ds_err, epr, epr_err, minima, flat)


@dataclass
class CorrelationReport:
    """Every intra-well observable at one sample time (or pooled window):
    populations, number correlations, the end-well Fano factor, and the
    angle-resolved quadrature observables."""

    populations: dict[int, Estimate]
    g2: dict[tuple[int, int], Estimate]
    fano: Estimate
    scan: ScanResult
    epr_reverse_check: Estimate

    @property
    def optimal_angles(self) -> dict[str, float]:
        return {key: theta for key, (theta, _) in self.scan.minima.items()}


def build_correlation_report(source, grid_deg: np.ndarray | None = None) -> CorrelationReport:
    pops = {j: population(source, j) for j in (1, 2, 3)}
    pairs = {}
    for i, j in ((1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3)):
        pairs[(i, j)] = g2(source, i, j)
    fano = fano_number_difference(source)
    scan = scan_angles(source, grid_deg)
    theta_opt = np.deg2rad(scan.minima["epr"][0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingDiagnosticWarning)
        reverse = reid_epr(source, theta_opt, target=3, conditioner=1)
    return CorrelationReport(pops, pairs, fano, scan, reverse)

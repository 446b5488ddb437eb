"""Ensemble integration engine.

Trajectories are integrated in contiguous blocks; a block is both the
unit of parallel work and the resampling unit for standard errors.  Each
trajectory owns a Philox stream keyed by (master_seed, trajectory index),
so the ensemble is a pure function of the configuration: any partition of
blocks over workers produces bit-identical reports.
"""

from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import backend as _backend
from .errors import AllDiverged, ConfigError
from .model import SystemParams
from .moments import MomentAccumulator, evaluate_monomials, pool_samples

__all__ = [
    "IntegrationConfig",
    "EnsembleRunReport",
    "TrajectoryOutcome",
    "integrate_trajectory",
    "run_ensemble",
    "DEFAULT_STEADY_WINDOW",
]

# Time-averaging window for observables labeled "steady state": past the
# transient, before the documented divergence onset of the strongly
# nonlinear runs.
DEFAULT_STEADY_WINDOW = (15.0, 25.0)

_VACUUM = (0j, 0j, 0j, 0j, 0j, 0j)


@dataclass(frozen=True)
class IntegrationConfig:
    """Run controls for one stochastic ensemble.

    dt is the fixed Ito step; states are recorded every sample_stride
    steps (plus the initial state).  n_batches contiguous trajectory
    blocks partition the ensemble for parallelism and error estimation;
    the partition is a pure function of (n_traj, n_batches), never of the
    worker count.
    """

    dt: float = 1e-3
    t_final: float = 25.0
    n_traj: int = 1000
    master_seed: int = 0
    sample_stride: int = 100
    divergence_threshold: float = 1e6
    n_batches: int = 100
    initial_state: tuple = _VACUUM

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.t_final > 0:
            raise ConfigError(f"t_final must be > 0, got {self.t_final}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be >= 1, got {self.n_traj}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must fit in 64 bits")
        if self.sample_stride < 1:
            raise ConfigError(f"sample_stride must be >= 1, got {self.sample_stride}")
        if not self.divergence_threshold > 0:
            raise ConfigError("divergence_threshold must be > 0")
        if self.n_batches < 1:
            raise ConfigError(f"n_batches must be >= 1, got {self.n_batches}")
        state = tuple(complex(z) for z in self.initial_state)
        if len(state) != 6 or not all(np.isfinite(z) for z in state):
            raise ConfigError("initial_state must be 6 finite complex values")
        object.__setattr__(self, "initial_state", state)
        if self.steps < self.sample_stride:
            raise ConfigError(
                f"t_final={self.t_final} spans {self.steps} steps, fewer than one "
                f"sample_stride={self.sample_stride}"
            )

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def n_samples(self) -> int:
        return self.steps // self.sample_stride + 1

    @property
    def sample_times(self) -> np.ndarray:
        return np.arange(self.n_samples) * (self.sample_stride * self.dt)


@dataclass(frozen=True)
class TrajectoryOutcome:
    diverged: bool
    divergence_time: Optional[float] = None

    @property
    def completed(self) -> bool:
        return not self.diverged


@dataclass
class EnsembleRunReport:
    """Result of an ensemble run: divergence bookkeeping plus one moment
    accumulator per sample time, each built only from the trajectories
    alive at that time."""

    n_completed: int
    n_diverged: int
    first_divergence_time: Optional[float]
    times: np.ndarray
    samples: list[MomentAccumulator]
    backend: str
    params: SystemParams
    cfg: IntegrationConfig

    @property
    def n_traj(self) -> int:
        return self.n_completed + self.n_diverged

    def alive_at(self, k: int) -> int:
        return self.samples[k].count

    def window_accumulator(self, t_start: float | None = None,
                           t_end: float | None = None) -> MomentAccumulator:
        """Pool the sample accumulators with t_start <= t <= t_end."""
        if t_start is None:
            t_start = DEFAULT_STEADY_WINDOW[0]
        if t_end is None:
            t_end = DEFAULT_STEADY_WINDOW[1]
        sel = [acc for t, acc in zip(self.times, self.samples)
               if t_start - 1e-12 <= t <= t_end + 1e-12]
        if not sel:
            raise ConfigError(f"no samples in window [{t_start}, {t_end}]")
        return pool_samples(sel)


def _block_ranges(n_traj: int, n_batches: int) -> list[tuple[int, int]]:
    n_blocks = min(n_batches, n_traj)
    base, rem = divmod(n_traj, n_blocks)
    ranges = []
    start = 0
    for b in range(n_blocks):
        size = base + (1 if b < rem else 0)
        ranges.append((start, size))
        start += size
    return ranges


def _run_block(params: SystemParams, cfg: IntegrationConfig, kernel,
               block_id: int, start: int, count: int):
    consts = _backend.kernel_constants(
        params.chi, params.gamma, params.epsilon, params.j_tunnel,
        cfg.dt, cfg.divergence_threshold,
    )
    states, div_step = kernel.simulate_block(
        master_seed=int(cfg.master_seed),
        traj_start=start,
        n_lanes=count,
        steps=cfg.steps,
        stride=cfg.sample_stride,
        z0=np.asarray(cfg.initial_state, dtype=np.complex128),
        **consts,
    )
    mono = evaluate_monomials(states)
    sums = mono.sum(axis=2)
    ksteps = np.arange(states.shape[0], dtype=np.int64) * cfg.sample_stride
    alive = (div_step[None, :] < 0) | (div_step[None, :] >= ksteps[:, None])
    counts = alive.sum(axis=1).astype(np.int64)
    div_mask = div_step >= 0
    n_div = int(np.count_nonzero(div_mask))
    first_step = int(div_step[div_mask].min()) if n_div else -1
    return block_id, counts, sums, n_div, first_step


def _block_task(task):
    params, cfg, backend_name, block_id, start, count = task
    kernel = _backend.get_kernel(backend_name)
    return _run_block(params, cfg, kernel, block_id, start, count)


def run_ensemble(params: SystemParams, cfg: IntegrationConfig,
                 n_workers: int | None = None,
                 backend: str = "auto") -> EnsembleRunReport:
    """Integrate cfg.n_traj trajectories and accumulate moments at every
    sample time.  The report is bit-identical for a fixed configuration
    regardless of n_workers."""
    backend_name = _backend.default_backend() if backend == "auto" else backend
    _backend.get_kernel(backend_name)  # validate early

    ranges = _block_ranges(cfg.n_traj, cfg.n_batches)
    tasks = [(params, cfg, backend_name, bid, start, count)
             for bid, (start, count) in enumerate(ranges)]

    if n_workers is not None and n_workers > 1:
        # Platform default start method; block seeding makes the result
        # independent of how (or whether) the work is distributed.
        ctx = mp.get_context()
        with ctx.Pool(processes=n_workers) as pool:
            results = pool.map(_block_task, tasks, chunksize=1)
    else:
        results = [_block_task(t) for t in tasks]

    n_samples = cfg.n_samples
    accs = [MomentAccumulator() for _ in range(n_samples)]
    n_div_total = 0
    first_step = -1
    for block_id, counts, sums, n_div, block_first in results:
        for k in range(n_samples):
            accs[k].add_block(block_id, int(counts[k]), sums[k])
        n_div_total += n_div
        if block_first >= 0 and (first_step < 0 or block_first < first_step):
            first_step = block_first

    if n_samples > 1 and accs[1].count == 0:
        raise AllDiverged(
            f"all {cfg.n_traj} trajectories diverged before the first sample "
            f"time t={cfg.sample_stride * cfg.dt:g}"
        )

    return EnsembleRunReport(
        n_completed=cfg.n_traj - n_div_total,
        n_diverged=n_div_total,
        first_divergence_time=((first_step + 1) * cfg.dt) if first_step >= 0 else None,
        times=cfg.sample_times,
        samples=accs,
        backend=backend_name,
        params=params,
        cfg=cfg,
    )


def integrate_trajectory(params: SystemParams, cfg: IntegrationConfig,
                         traj_index: int,
                         sink: Callable[[int, float, np.ndarray], None] | None = None,
                         backend: str = "auto") -> TrajectoryOutcome:
    """Integrate the single trajectory traj_index, emitting each recorded
    sample (index, time, six-component state) to the sink while the
    trajectory is alive.  Bit-identical to the same trajectory's part in
    run_ensemble."""
    kernel = _backend.get_kernel(backend)
    consts = _backend.kernel_constants(
        params.chi, params.gamma, params.epsilon, params.j_tunnel,
        cfg.dt, cfg.divergence_threshold,
    )
    states, div_step = kernel.simulate_block(
        master_seed=int(cfg.master_seed),
        traj_start=traj_index,
        n_lanes=1,
        steps=cfg.steps,
        stride=cfg.sample_stride,
        z0=np.asarray(cfg.initial_state, dtype=np.complex128),
        **consts,
    )
    div = int(div_step[0])
    if sink is not None:
        times = cfg.sample_times
        for k in range(states.shape[0]):
            if div >= 0 and k * cfg.sample_stride > div:
                break
            sink(k, float(times[k]), states[k, :, 0].copy())
    if div >= 0:
        return TrajectoryOutcome(True, (div + 1) * cfg.dt)
    return TrajectoryOutcome(False, None)

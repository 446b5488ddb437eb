"""Batch command-line front end.

Four subcommands drive the library from a single JSON config file:

    simulate   stochastic ensemble run -> population/correlation CSVs
    spectra    linearized output-beam spectra -> spectra.csv
    oracle     master-equation cross-validation -> oracle_report.json
    steady     noiseless fixed point and drift stability -> steady_state.json

All artifacts are written with fixed column orders, repr-style float
formatting and newline '\\n', so identical configs produce byte-identical
files regardless of worker count or platform locale.

Exit codes: 0 success; 2 config error (including the nonlinearity guard);
3 numerical failure; 4 oracle validation mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from .engine import DEFAULT_STEADY_WINDOW, IntegrationConfig, run_ensemble
from .errors import (
    AllDiverged,
    ConfigError,
    DegenerateInference,
    EmptyAccumulator,
    NonConvergence,
    PptrimerError,
    SchemaError,
    TruncationOverflow,
    UnstableDriftMatrix,
    ZeroPopulation,
)
from .model import SystemParams, semiclassical_steady_state
from .moments import (
    fano_number_difference,
    g2,
    population,
    quadrature_variance,
    reid_epr,
    scan_angles,
)
from .oracle import FockConfig, evolve_master_equation, observables_from_rho
from .spectra import (
    build_spectral_model,
    means_from_accumulator,
    means_from_fixed_point,
    output_entanglement_spectra,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

_NUMERICAL_ERRORS = (AllDiverged, UnstableDriftMatrix, NonConvergence,
                     TruncationOverflow, DegenerateInference)

# Angles (degrees) at which the oracle comparison probes quadrature
# variances; coarse on purpose, the full scan lives in simulate.
_ORACLE_THETA_DEG = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0)


# ---------------------------------------------------------------------------
# config parsing


def _complex_from_json(value: Any, what: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        re, im = value
        if isinstance(re, (int, float)) and isinstance(im, (int, float)):
            return complex(re, im)
    raise ConfigError(f"{what} must be a number or an [re, im] pair, got {value!r}")


def _section(raw: dict, key: str) -> dict:
    sec = raw.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {key!r} must be an object")
    return sec


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return raw


def params_from_config(raw: dict) -> SystemParams:
    sec = _section(raw, "params")
    try:
        return SystemParams(
            chi=float(sec.get("chi", 0.0)),
            gamma=float(sec.get("gamma", 1.0)),
            epsilon=_complex_from_json(sec.get("epsilon", 0.0), "params.epsilon"),
            j_tunnel=float(sec.get("j_tunnel", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad params section: {exc}") from exc


def integration_from_config(raw: dict, args: argparse.Namespace) -> IntegrationConfig:
    sec = dict(_section(raw, "integration"))
    if getattr(args, "seed", None) is not None:
        sec["master_seed"] = args.seed
    if getattr(args, "n_traj", None) is not None:
        sec["n_traj"] = args.n_traj
    known = {"dt", "t_final", "n_traj", "master_seed", "sample_stride",
             "divergence_threshold", "n_batches", "initial_state"}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown integration keys: {sorted(unknown)}")
    if "initial_state" in sec:
        sec["initial_state"] = tuple(
            _complex_from_json(z, "integration.initial_state") for z in sec["initial_state"]
        )
    try:
        return IntegrationConfig(**sec)
    except TypeError as exc:
        raise ConfigError(f"bad integration section: {exc}") from exc


def theta_grid_from_config(raw: dict) -> np.ndarray:
    sec = _section(raw, "theta_grid")
    start = float(sec.get("start_deg", 0.0))
    stop = float(sec.get("stop_deg", 180.0))
    step = float(sec.get("step_deg", 1.0))
    if not step > 0 or not stop > start:
        raise ConfigError(f"bad theta_grid: start={start}, stop={stop}, step={step}")
    return np.arange(start, stop, step)


def steady_window_from_config(raw: dict, cfg: IntegrationConfig) -> tuple[float, float]:
    win = raw.get("steady_window", list(DEFAULT_STEADY_WINDOW))
    try:
        t0, t1 = (float(v) for v in win)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"steady_window must be [t_start, t_end], got {win!r}") from exc
    if not (0.0 <= t0 < t1 <= cfg.t_final + 1e-12):
        raise ConfigError(
            f"steady_window [{t0}, {t1}] must lie inside [0, t_final={cfg.t_final}]"
        )
    return t0, t1


def omega_grid_from_config(raw: dict) -> np.ndarray:
    sec = _section(raw, "omega_grid")
    lo = float(sec.get("min", -6.0))
    hi = float(sec.get("max", 6.0))
    n = int(sec.get("n", 512))
    if not (hi > lo and n >= 2):
        raise ConfigError(f"bad omega_grid: min={lo}, max={hi}, n={n}")
    return np.linspace(lo, hi, n)


def _resolve_out_dir(raw: dict, args: argparse.Namespace) -> str:
    out = args.out or raw.get("outputs_dir") or "."
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _resolve_workers(args: argparse.Namespace) -> int:
    spec = getattr(args, "threads", None)
    if spec is None or spec == "auto":
        return os.cpu_count() or 1
    try:
        n = int(spec)
    except ValueError as exc:
        raise ConfigError(f"--threads must be an integer or 'auto', got {spec!r}") from exc
    if n < 1:
        raise ConfigError(f"--threads must be >= 1, got {n}")
    return n


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(value: Any) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _est_json(est) -> dict:
    return {"value": est.value, "stderr": est.stderr}


# ---------------------------------------------------------------------------
# simulate


def _population_rows(report) -> list[list[Any]]:
    rows = []
    nan = float("nan")
    for k, t in enumerate(report.times):
        acc = report.samples[k]
        row: list[Any] = [float(t)]
        if acc.count == 0:
            row += [nan] * 6 + [0]
        else:
            for j in (1, 2, 3):
                est = population(acc, j)
                row += [est.value, est.stderr]
            row.append(acc.count)
        rows.append(row)
    return rows


def _number_stat_rows(report) -> list[list[Any]]:
    rows = []
    nan = float("nan")
    for k, t in enumerate(report.times):
        acc = report.samples[k]
        f_val = f_err = g_val = g_err = nan
        try:
            est = fano_number_difference(acc)
            f_val, f_err = est.value, est.stderr
        except (ZeroPopulation, EmptyAccumulator):
            pass
        try:
            est = g2(acc, 1, 3)
            g_val, g_err = est.value, est.stderr
        except (ZeroPopulation, EmptyAccumulator):
            pass
        rows.append([float(t), f_val, f_err, g_val, g_err])
    return rows


def _minimum_json(scan, key: str) -> dict:
    theta, est = scan.minima[key]
    return {"theta_deg": theta, "value": est.value, "stderr": est.stderr,
            "flat": scan.flat[key]}


def cmd_simulate(raw: dict, args: argparse.Namespace) -> int:
    params = params_from_config(raw)
    cfg = integration_from_config(raw, args)
    out = _resolve_out_dir(raw, args)
    window = steady_window_from_config(raw, cfg)
    grid_deg = theta_grid_from_config(raw)

    report = run_ensemble(params, cfg, n_workers=_resolve_workers(args))

    write_csv(
        os.path.join(out, "populations.csv"),
        ["t", "N1", "N1_err", "N2", "N2_err", "N3", "N3_err", "n_alive"],
        _population_rows(report),
    )
    write_csv(
        os.path.join(out, "number_stats.csv"),
        ["t", "F13", "F13_err", "g2_13", "g2_13_err"],
        _number_stat_rows(report),
    )

    window_acc = report.window_accumulator(*window)
    scan = scan_angles(window_acc, grid_deg)
    scan_rows = [
        [scan.theta_deg[k],
         scan.vx[0, k], scan.vx_err[0, k],
         scan.vx[1, k], scan.vx_err[1, k],
         scan.ds[k], scan.ds_err[k],
         scan.epr[k], scan.epr_err[k]]
        for k in range(scan.theta_deg.size)
    ]
    write_csv(
        os.path.join(out, "angle_scan.csv"),
        ["theta_deg", "VX1", "VX1_err", "VX2", "VX2_err",
         "DS13", "DS13_err", "EPR13", "EPR13_err"],
        scan_rows,
    )

    pops = {f"N{j}": _est_json(population(window_acc, j)) for j in (1, 2, 3)}
    g2_json = {}
    for i, j in ((1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3)):
        try:
            g2_json[f"g2_{i}{j}"] = _est_json(g2(window_acc, i, j))
        except ZeroPopulation as exc:
            g2_json[f"g2_{i}{j}"] = {"value": None, "stderr": None, "reason": str(exc)}
    try:
        fano = _est_json(fano_number_difference(window_acc))
    except ZeroPopulation as exc:
        fano = {"value": None, "stderr": None, "reason": str(exc)}
    theta_opt = np.deg2rad(scan.minima["epr"][0])
    try:
        epr_rev = _est_json(reid_epr(window_acc, theta_opt, target=3, conditioner=1))
    except (ZeroPopulation, DegenerateInference) as exc:
        epr_rev = {"value": None, "stderr": None, "reason": str(exc)}
    steady_means = means_from_accumulator(window_acc)

    write_json(
        os.path.join(out, "steady_report.json"),
        {
            "run_label": raw.get("run_label", ""),
            "steady_window": [window[0], window[1]],
            "n_window_samples": int(
                np.count_nonzero((report.times >= window[0] - 1e-12)
                                 & (report.times <= window[1] + 1e-12))
            ),
            "populations": pops,
            "g2": g2_json,
            "fano_13": fano,
            "minima": {key: _minimum_json(scan, key)
                       for key in ("vx1", "vx2", "vx3", "ds", "epr")},
            "epr_31_check": epr_rev,
            "steady_means": [_pair(z) for z in steady_means],
        },
    )
    write_json(
        os.path.join(out, "run_meta.json"),
        {
            "code_version": __version__,
            "backend": report.backend,
            "seed": cfg.master_seed,
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "n_traj": cfg.n_traj,
            "sample_stride": cfg.sample_stride,
            "n_batches": cfg.n_batches,
            "divergence_threshold": cfg.divergence_threshold,
            "diverged_count": report.n_diverged,
            "first_divergence_time": report.first_divergence_time,
            "config_echo": raw,
        },
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# spectra


def _spectra_means(raw: dict, params: SystemParams, out: str) -> np.ndarray:
    sec = _section(raw, "spectra")
    source = sec.get("means", "fixed_point")
    if isinstance(source, list):
        if len(source) != 6:
            raise ConfigError("spectra.means must list 6 [re, im] pairs")
        return np.array([_complex_from_json(z, "spectra.means") for z in source])
    if source == "fixed_point":
        return means_from_fixed_point(params)
    if source == "report":
        path = sec.get("report_path", os.path.join(out, "steady_report.json"))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                rep = json.load(fh)
            pairs = rep["steady_means"]
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(
                f"spectra.means='report' needs a steady_report.json with "
                f"steady_means (looked at {path}): {exc}"
            ) from exc
        return np.array([complex(re, im) for re, im in pairs])
    raise ConfigError(
        f"spectra.means must be 'fixed_point', 'report' or explicit pairs, got {source!r}"
    )


def cmd_spectra(raw: dict, args: argparse.Namespace) -> int:
    params = params_from_config(raw)
    out = _resolve_out_dir(raw, args)
    sec = _section(raw, "spectra")
    theta = np.deg2rad(float(sec.get("theta_deg", 0.0)))
    means = _spectra_means(raw, params, out)
    model = build_spectral_model(
        params, means, allow_strong_nonlinearity=args.override_gaussian_guard
    )
    ent = output_entanglement_spectra(model, theta, omega_grid_from_config(raw))
    rows = [
        [ent.omega[k], ent.ds[k], ent.epr[k],
         ent.x11[k], ent.x13[k], ent.y11[k], ent.y13[k]]
        for k in range(ent.omega.size)
    ]
    write_csv(
        os.path.join(out, "spectra.csv"),
        ["omega", "DS_out", "EPR_out",
         "S_out_X1X1", "S_out_X1X3", "S_out_Y1Y1", "S_out_Y1Y3"],
        rows,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def _oracle_observables(source) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for j in (1, 2, 3):
        values[f"N{j}"] = population(source, j)
    for i, j in ((1, 1), (2, 2), (3, 3), (1, 3)):
        try:
            values[f"g2_{i}{j}"] = g2(source, i, j)
        except ZeroPopulation:
            values[f"g2_{i}{j}"] = None
    try:
        values["F13"] = fano_number_difference(source)
    except ZeroPopulation:
        values["F13"] = None
    for deg in _ORACLE_THETA_DEG:
        th = np.deg2rad(deg)
        for j in (1, 2, 3):
            values[f"VX{j}_{deg:g}"] = quadrature_variance(source, j, th)
    return values


def cmd_oracle(raw: dict, args: argparse.Namespace) -> int:
    params = params_from_config(raw)
    out = _resolve_out_dir(raw, args)
    sec = _section(raw, "oracle")
    fock = FockConfig(
        n_cut=int(sec.get("n_cut", 12)),
        dt=float(sec.get("dt", 0.02)),
        t_final=float(sec.get("t_final", 4.0)),
    )
    sample_times = np.asarray(
        sec.get("sample_times", np.arange(0.5, fock.t_final + 1e-9, 0.5).tolist()),
        dtype=float,
    )

    cfg = integration_from_config(raw, args)
    report = run_ensemble(params, cfg, n_workers=_resolve_workers(args))
    grid_dt = cfg.sample_stride * cfg.dt

    def pp_index(t: float) -> int:
        k = int(round(t / grid_dt))
        if not (0 <= k < len(report.times)) or abs(report.times[k] - t) > 1e-9:
            raise ConfigError(
                f"oracle sample time {t:g} is not on the ensemble sample grid "
                f"(spacing {grid_dt:g})"
            )
        return k

    for t in sample_times:
        pp_index(float(t))  # validate before the expensive evolution

    table = []
    n_disagree = 0
    for t, dm in evolve_master_equation(params, fock, sample_times=sample_times):
        exact = observables_from_rho(dm)
        pp_acc = report.samples[pp_index(float(t))]
        pp_vals = _oracle_observables(pp_acc)
        ex_vals = _oracle_observables(exact)
        rows = {}
        for key, pp_est in pp_vals.items():
            ex_est = ex_vals[key]
            if pp_est is None or ex_est is None:
                rows[key] = {"agree": None}
                continue
            sigma = pp_est.stderr
            delta = abs(pp_est.value - ex_est.value)
            agree = bool(delta <= 3.0 * sigma) if np.isfinite(sigma) else False
            if not agree:
                n_disagree += 1
            rows[key] = {
                "positive_p": pp_est.value,
                "stderr": sigma,
                "oracle": ex_est.value,
                "z": delta / sigma if sigma > 0 else float("inf"),
                "agree": agree,
            }
        table.append({"t": float(t), "observables": rows})

    write_json(
        os.path.join(out, "oracle_report.json"),
        {
            "code_version": __version__,
            "params": {"chi": params.chi, "gamma": params.gamma,
                       "epsilon": _pair(params.epsilon), "j_tunnel": params.j_tunnel},
            "fock": {"n_cut": fock.n_cut, "dt": fock.dt, "t_final": fock.t_final},
            "n_traj": cfg.n_traj,
            "comparison": table,
            "n_disagreements": n_disagree,
            "pass": n_disagree == 0,
        },
    )
    if n_disagree:
        print(f"oracle validation failed: {n_disagree} observable(s) beyond 3 sigma",
              file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# steady


def cmd_steady(raw: dict, args: argparse.Namespace) -> int:
    params = params_from_config(raw)
    out = _resolve_out_dir(raw, args)
    alpha = semiclassical_steady_state(params)
    payload: dict[str, Any] = {
        "means": [_pair(z) for z in alpha],
        "populations": [float(abs(z) ** 2) for z in alpha],
    }
    try:
        model = build_spectral_model(
            params, means_from_fixed_point(params),
            allow_strong_nonlinearity=args.override_gaussian_guard,
        )
        # model.A keeps the relaxation convention (stable when Re > 0);
        # report the decaying drift modes themselves
        eigs = np.linalg.eigvals(-model.A)
        payload["drift_eigenvalues"] = [_pair(z) for z in eigs]
        payload["drift_stable"] = True
    except UnstableDriftMatrix as exc:
        payload["drift_stable"] = False
        payload["drift_detail"] = str(exc)
    except ConfigError as exc:
        payload["drift_stable"] = None
        payload["drift_detail"] = str(exc)
    write_json(os.path.join(out, "steady_state.json"), payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pptrimer",
        description="Pumped, damped Bose-Hubbard trimer: stochastic phase-space "
                    "simulation, master-equation validation and output spectra.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--n-traj", type=int, default=None, help="override ensemble size")
        p.add_argument("--threads", default="1",
                       help="worker processes: an integer or 'auto'")
        p.add_argument("--override-gaussian-guard", action="store_true",
                       help="evaluate linearized spectra beyond the trusted "
                            "nonlinearity range")

    for name, fn in (("simulate", cmd_simulate), ("spectra", cmd_spectra),
                     ("oracle", cmd_oracle), ("steady", cmd_steady)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        return args.func(raw, args)
    except (ConfigError, SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PptrimerError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

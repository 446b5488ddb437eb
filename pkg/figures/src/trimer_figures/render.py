"""Figure regeneration from simulation CSV artifacts.

Each figure kind reads one documented CSV schema and draws curves that
trace one-to-one to named columns:

    populations    populations.csv    N1, N2, N3 vs t
    fano           number_stats.csv   F13 vs t
    ds             angle_scan.csv     DS13 vs theta_deg
    epr            angle_scan.csv     EPR13 vs theta_deg
    spectrum_ds    spectra.csv        DS_out vs omega
    spectrum_epr   spectra.csv        EPR_out vs omega

Population plots can overlay the classical steady-state values as dotted
horizontal lines; the correlation plots carry their classical bound (4
for the Duan-Simon sum, 1 for the EPR product and the Fano factor) as a
dashed line.

Rendering is deterministic: fixed figure geometry, the bundled fonts,
and no timestamps in the output files.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = ["SchemaError", "FigureSpec", "KINDS", "load_table", "build_figure",
           "render"]

FIGSIZE = (6.4, 4.0)


class SchemaError(Exception):
    """An input CSV does not match its documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to regenerate.

    classical lists steady-state populations to overlay as dotted lines
    on population plots; it is ignored by the other kinds.
    """

    in_dir: str
    kind: str
    out_path: str
    classical: tuple = ()
    dpi: int = 100


def load_table(path: str, columns: tuple) -> dict:
    """Read the named columns from a CSV file into float arrays.

    Any deviation from the documented schema raises SchemaError naming
    the offending column and line.
    """
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        for col in columns:
            if col not in header:
                raise SchemaError(
                    f"{path} lacks required column {col!r} "
                    f"(found: {', '.join(header)})"
                )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path} has a header but no data rows")
    table = {}
    for col in columns:
        k = header.index(col)
        values = np.empty(len(rows))
        for r, row in enumerate(rows):
            if k >= len(row):
                raise SchemaError(f"{path} line {r + 2}: missing column {col!r}")
            try:
                values[r] = float(row[k])
            except ValueError:
                raise SchemaError(
                    f"{path} line {r + 2}, column {col!r}: "
                    f"not a number: {row[k]!r}"
                ) from None
        table[col] = values
    return table


def _curve(ax, x, y, yerr, label: str) -> None:
    ax.errorbar(x, y, yerr=yerr, label=label, linewidth=1.2, elinewidth=0.6,
                errorevery=max(1, len(x) // 50))


def _bound(ax, value: float) -> None:
    ax.axhline(value, color="0.3", linestyle="--", linewidth=0.9)


def _populations(table, spec, ax) -> None:
    for col in ("N1", "N2", "N3"):
        _curve(ax, table["t"], table[col], table[col + "_err"], col)
    for value in spec.classical:
        ax.axhline(value, color="k", linestyle=":", linewidth=1.0)
    ax.set_xlabel("Jt")
    ax.set_ylabel("mean well population")
    ax.legend()


def _fano(table, spec, ax) -> None:
    _curve(ax, table["t"], table["F13"], table["F13_err"], "F13")
    _bound(ax, 1.0)
    ax.set_xlabel("Jt")
    ax.set_ylabel("Fano factor of N1 - N3")
    ax.legend()


def _ds_scan(table, spec, ax) -> None:
    _curve(ax, table["theta_deg"], table["DS13"], table["DS13_err"], "DS13")
    _bound(ax, 4.0)
    ax.set_xlabel("theta (degrees)")
    ax.set_ylabel("Duan-Simon sum, wells 1 and 3")
    ax.legend()


def _epr_scan(table, spec, ax) -> None:
    _curve(ax, table["theta_deg"], table["EPR13"], table["EPR13_err"], "EPR13")
    _bound(ax, 1.0)
    ax.set_xlabel("theta (degrees)")
    ax.set_ylabel("EPR product, wells 1 and 3")
    ax.legend()


def _spectrum_ds(table, spec, ax) -> None:
    ax.plot(table["omega"], table["DS_out"], label="DS_out", linewidth=1.2)
    _bound(ax, 4.0)
    ax.set_xlabel("omega")
    ax.set_ylabel("output Duan-Simon spectrum")
    ax.legend()


def _spectrum_epr(table, spec, ax) -> None:
    ax.plot(table["omega"], table["EPR_out"], label="EPR_out", linewidth=1.2)
    _bound(ax, 1.0)
    ax.set_xlabel("omega")
    ax.set_ylabel("output EPR spectrum")
    ax.legend()


# kind -> (csv file, required columns, axes builder)
KINDS = {
    "populations": ("populations.csv",
                    ("t", "N1", "N1_err", "N2", "N2_err", "N3", "N3_err"),
                    _populations),
    "fano": ("number_stats.csv", ("t", "F13", "F13_err"), _fano),
    "ds": ("angle_scan.csv", ("theta_deg", "DS13", "DS13_err"), _ds_scan),
    "epr": ("angle_scan.csv", ("theta_deg", "EPR13", "EPR13_err"), _epr_scan),
    "spectrum_ds": ("spectra.csv", ("omega", "DS_out"), _spectrum_ds),
    "spectrum_epr": ("spectra.csv", ("omega", "EPR_out"), _spectrum_epr),
}


def build_figure(spec: FigureSpec):
    """Load the input table for spec and return the assembled Figure.

    Raises SchemaError before anything is drawn if the input does not
    match the documented schema.
    """
    if spec.kind not in KINDS:
        raise SchemaError(
            f"unknown figure kind {spec.kind!r}; expected one of "
            f"{', '.join(sorted(KINDS))}"
        )
    csv_name, columns, builder = KINDS[spec.kind]
    table = load_table(os.path.join(spec.in_dir, csv_name), columns)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    builder(table, spec, ax)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Render spec to its output path and return that path.

    The input is validated and the figure fully assembled before the
    output file is opened, so a schema error never leaves an image
    behind."""
    fig = build_figure(spec)
    try:
        fig.savefig(spec.out_path, dpi=spec.dpi)
    finally:
        plt.close(fig)
    return spec.out_path

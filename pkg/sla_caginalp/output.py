"""Field snapshots, energy series, error tables and plot data written to disk."""

from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from pathlib import Path

import meshio
import numpy as np
from pydantic import BaseModel

from .config import ConfigVar
from .mesh import Mesh
from .mms import NORMS, VARIABLES, ErrorReport
from .sav import EnergyRecord, State
from .types import FieldFormat, Vector

_LOGGER = logging.getLogger(__name__)

FIELD_COLUMNS = ("x", "y", "phi", "theta", "ux", "uy")
ENERGY_COLUMNS = ("t", "energy", "dissipation", "identity_residual")
ERROR_COLUMNS = ("h", "tau", "variable", "norm", "error")
FLOAT_FORMAT = "%.17g"

output_directory_config: ConfigVar[Path] = ConfigVar.from_env(
    "output_directory",
    "SLA_CAGINALP_OUTPUT_DIR",
    default=Path("output"),
    parse=Path,
)


class SnapshotSummary(BaseModel):
    t: float
    step_index: int
    gel_fraction: float
    theta_max: float
    theta_argmax: tuple[float, float]
    track_coverage: float | None = None
    files: list[str]


class RunSummary(BaseModel):
    n_per_side: int
    tau: float
    T_final: float
    final_energy: float
    max_identity_residual: float
    snapshots: list[SnapshotSummary]


def _fmt(value: float) -> str:
    return FLOAT_FORMAT % value


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_fields(state: State, mesh: Mesh, path: Path, fmt: FieldFormat = FieldFormat.csv) -> Path:
    if state.phi.shape != (mesh.n_nodes,):
        raise ValueError(f"State has {state.phi.shape[0]} nodes, mesh has {mesh.n_nodes}")

    path = _prepare(path)
    u = np.asarray(state.u, dtype=np.float64).reshape(mesh.n_nodes, 2)

    if fmt is FieldFormat.csv:
        data = np.column_stack((mesh.coordinates, state.phi, state.theta, u))
        np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(FIELD_COLUMNS), comments="")
    else:
        points = np.column_stack((mesh.coordinates, np.zeros(mesh.n_nodes)))
        grid = meshio.Mesh(
            points,
            [("triangle", mesh.elements)],
            point_data={
                "phi": state.phi,
                "theta": state.theta,
                "displacement": np.column_stack((u, np.zeros(mesh.n_nodes))),
            },
        )
        meshio.write(path, grid, file_format="vtk", binary=False)

    _LOGGER.debug("Wrote %s fields at t=%.6g to %s", fmt.value, state.t, path)
    return path


def read_fields_csv(path: Path) -> dict[str, Vector]:
    with Path(path).open(encoding="utf-8") as f:
        header = f.readline().strip().split(",")
    if tuple(header) != FIELD_COLUMNS:
        raise ValueError(f"Unexpected field header {header!r}")

    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i].copy() for i, name in enumerate(FIELD_COLUMNS)}


def write_energy_series(records: Sequence[EnergyRecord], path: Path) -> Path:
    path = _prepare(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ENERGY_COLUMNS)
        writer.writerows(
            (_fmt(r.t), _fmt(r.energy), _fmt(r.dissipation), _fmt(r.identity_residual)) for r in records
        )
    return path


def write_error_report(report: ErrorReport, directory: Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    table = directory / "errors.csv"
    with table.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ERROR_COLUMNS)
        writer.writerows((_fmt(e.h), _fmt(e.tau), e.variable, e.norm, _fmt(e.error)) for e in report.entries)

    text = directory / "errors.txt"
    text.write_text(report.table() + "\n", encoding="utf-8")
    return [table, text]


def write_summary(summary: RunSummary, path: Path) -> Path:
    path = _prepare(path)
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


_RATE_SCRIPT = '''\
"""Log-log error plots with reference slopes 1 and 2 anchored at the coarsest point."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
DATASETS = {datasets!r}
XLABEL = {xlabel!r}

for name in DATASETS:
    data = np.loadtxt(HERE / (name + ".dat"), ndmin=2)
    x, err = data[:, 0], data[:, 1]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(x, err, "o-", label=name)
    for slope, style in ((1, "k--"), (2, "k:")):
        ax.loglog(x, err[0] * (x / x[0]) ** slope, style, label=f"slope {{slope}}")
    ax.set_xlabel(XLABEL)
    ax.set_ylabel("error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(HERE / (name + ".png"), dpi=150)
    plt.close(fig)
'''

_ENERGY_SCRIPT = '''\
"""Discrete energy and energy-identity residual against time."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
data = np.loadtxt(HERE / "energy.dat", ndmin=2)

fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
top.plot(data[:, 0], data[:, 1])
top.set_ylabel("energy")
bottom.semilogy(data[:, 0], np.abs(data[:, 2]) + 1e-300)
bottom.set_ylabel("|identity residual|")
bottom.set_xlabel("t")
fig.tight_layout()
fig.savefig(HERE / "energy.png", dpi=150)
plt.close(fig)
'''


def _write_columns(path: Path, columns: Sequence[Sequence[float]]) -> Path:
    rows = zip(*columns)
    path.write_text("".join(" ".join(_fmt(v) for v in row) + "\n" for row in rows), encoding="utf-8")
    return path


def emit_plots(report_or_series: ErrorReport | Sequence[EnergyRecord], directory: Path) -> list[Path]:
    """Plain two-column data files plus a standalone matplotlib script that renders them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if isinstance(report_or_series, ErrorReport):
        report = report_or_series
        fixed_name = "tau" if report.direction == "space" else "h"
        names: list[str] = []
        for fixed in report.fixed_values():
            for variable in VARIABLES:
                for norm in NORMS:
                    params, errors = report.errors(variable, norm, fixed)
                    if not params:
                        continue
                    name = f"{report.direction}_{variable}_{norm}_{fixed_name}{fixed:.6g}"
                    written.append(_write_columns(directory / f"{name}.dat", (params, errors)))
                    names.append(name)

        script = _RATE_SCRIPT.format(datasets=names, xlabel="h" if report.direction == "space" else "tau")
        script_path = directory / f"plot_{report.direction}_rates.py"
    else:
        records = list(report_or_series)
        columns = (
            [r.t for r in records],
            [r.energy for r in records],
            [r.identity_residual for r in records],
        )
        written.append(_write_columns(directory / "energy.dat", columns))
        script = _ENERGY_SCRIPT
        script_path = directory / "plot_energy.py"

    script_path.write_text(script, encoding="utf-8")
    written.append(script_path)
    _LOGGER.info("Wrote %d plot files to %s", len(written), directory)
    return written


__all__ = [
    "ENERGY_COLUMNS",
    "ERROR_COLUMNS",
    "FIELD_COLUMNS",
    "RunSummary",
    "SnapshotSummary",
    "emit_plots",
    "output_directory_config",
    "read_fields_csv",
    "write_energy_series",
    "write_error_report",
    "write_fields",
    "write_summary",
]

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from enum import IntEnum
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .fem import create_space
from .linalg import ConvergenceError, solver_config
from .mesh import build_uniform
from .mms import ErrorReport, build_case, spatial_sweep, temporal_sweep
from .model import laws_for
from .output import (
    RunSummary,
    SnapshotSummary,
    emit_plots,
    output_directory_config,
    write_energy_series,
    write_error_report,
    write_fields,
    write_summary,
)
from .sav import (
    ENERGY_IDENTITY_TOLERANCE,
    EnergyRecord,
    RunResult,
    State,
    StepError,
    gel_fraction,
    initialize,
    run,
    track_coverage,
)
from .schemas import PRESETS, ConfigError, RunConfig, load_config
from .source import SourceSpec
from .types import FieldFormat, RunMode, SourceKind

_LOGGER = logging.getLogger(__name__)

MONOTONICITY_SLACK = 1e-12
TRACK_RADIUS_WIDTHS = 2.0

_SUFFIXES = {FieldFormat.csv: "csv", FieldFormat.vtk_legacy: "vtk"}


class ExitCode(IntEnum):
    ok = 0
    config = 2
    solver = 3
    io = 4
    check_failed = 5


def _package_version(name: str) -> str:
    try:
        return version(name)
    except PackageNotFoundError:
        return "unknown"


def _output_dir(args: argparse.Namespace, config: RunConfig) -> Path:
    if args.output is not None:
        return Path(args.output)
    explicit = output_directory_config.explicit()
    if explicit is not None:
        return explicit
    if config.output.directory is not None:
        return config.output.directory
    return output_directory_config.default


def _load(args: argparse.Namespace, expected: RunMode) -> RunConfig:
    config = load_config(args.config)
    if args.full_scale:
        config = config.full_scale()
    if config.mode is not expected:
        _LOGGER.warning("Config declares mode %r, running %r", config.mode.value, expected.value)
    return config


def _simulate_config(
    config: RunConfig,
    source: SourceSpec,
    directory: Path,
) -> tuple[RunResult, list[SnapshotSummary]]:
    mesh = build_uniform(config.mesh.n_per_side)
    space = create_space(mesh)
    laws = laws_for(config.params)

    phi0, phi0_grad = config.init.initial_field("phi", config.params)
    theta0, theta0_grad = config.init.initial_field("theta", config.params)
    initial = initialize(
        space,
        config.params,
        laws,
        phi0,
        theta0,
        config.init.mode,
        config.solver,
        phi0_grad=phi0_grad,
        theta0_grad=theta0_grad,
    )

    summaries: list[SnapshotSummary] = []

    def snapshot(state: State, _record: EnergyRecord | None) -> None:
        files: list[str] = []
        if config.output.fields:
            for fmt in config.output.formats:
                path = directory / f"fields_{state.step_index:05d}.{_SUFFIXES[fmt]}"
                files.append(write_fields(state, mesh, path, fmt).name)

        hottest = int(np.argmax(state.theta))
        coverage = (
            None
            if source.kind is SourceKind.none
            else track_coverage(state, mesh.coordinates, source, TRACK_RADIUS_WIDTHS * source.w0)
        )
        summaries.append(
            SnapshotSummary(
                t=state.t,
                step_index=state.step_index,
                gel_fraction=gel_fraction(state),
                theta_max=float(state.theta[hottest]),
                theta_argmax=(float(mesh.coordinates[hottest, 0]), float(mesh.coordinates[hottest, 1])),
                track_coverage=coverage,
                files=files,
            ),
        )

    result = run(
        space,
        config.params,
        laws,
        initial,
        source,
        config.time.T_final,
        config.time.tau,
        hooks=[snapshot],
        config=config.solver,
        snapshot_stride=config.output.snapshot_stride,
        elasticity_stride=config.elasticity_stride,
        algorithm=config.algorithm,
    )
    write_energy_series(result.records, directory / "energy.csv")
    if config.output.plots:
        emit_plots(result.records, directory / "plots")

    write_summary(
        RunSummary(
            n_per_side=config.mesh.n_per_side,
            tau=config.time.tau,
            T_final=config.time.T_final,
            final_energy=result.records[-1].energy,
            max_identity_residual=max(abs(r.identity_residual) for r in result.records),
            snapshots=summaries,
        ),
        directory / "summary.json",
    )
    return result, summaries


def cmd_simulate(args: argparse.Namespace) -> ExitCode:
    config = _load(args, RunMode.simulate)
    directory = _output_dir(args, config)
    _, summaries = _simulate_config(config, config.source, directory)

    last = summaries[-1]
    print(f"t={last.t:.6g} gel fraction={last.gel_fraction:.4f}")
    print(f"theta max={last.theta_max:.6g} at {last.theta_argmax}")
    if last.track_coverage is not None:
        print(f"track coverage={last.track_coverage:.4f}")
    print(f"Output written to {directory}")
    return ExitCode.ok


def cmd_stability(args: argparse.Namespace) -> ExitCode:
    config = _load(args, RunMode.stability)
    if config.source.kind is not SourceKind.none:
        _LOGGER.warning("Stability check ignores the configured heat source")

    directory = _output_dir(args, config)
    result, _ = _simulate_config(config, SourceSpec(), directory)

    violations = []
    for r in result.records:
        scale = max(1.0, r.previous_energy)
        if abs(r.identity_residual) > ENERGY_IDENTITY_TOLERANCE * scale:
            violations.append(f"step {r.step_index}: identity residual {r.identity_residual:.3e}")
        if r.energy > r.previous_energy + MONOTONICITY_SLACK * scale:
            violations.append(f"step {r.step_index}: energy increased by {r.energy - r.previous_energy:.3e}")

    worst = max(abs(r.identity_residual) for r in result.records)
    print(f"{len(result.records)} steps, max |identity residual| = {worst:.3e}")
    if violations:
        for v in violations:
            print(f"  VIOLATION {v}")
        return ExitCode.check_failed

    print("Energy identity and monotone decay hold at every step")
    return ExitCode.ok


def _rate_failures(report: ErrorReport, config: RunConfig) -> list[str]:
    mms = config.mms
    if report.direction == "space":
        required = [
            ("phi", "l2", mms.min_space_order_l2),
            ("theta", "l2", mms.min_space_order_l2),
            ("phi", "h1", mms.min_space_order_h1),
            ("u", "l2", mms.min_displacement_order),
            ("u", "h1", mms.min_displacement_order),
        ]
    else:
        required = [
            ("phi", "l2", mms.min_time_order_l2),
            ("theta", "l2", mms.min_time_order_l2),
            ("u", "l2", mms.min_displacement_order),
        ]

    return [
        f"{o.direction} order of {o.variable}/{o.norm} at fixed {o.fixed:.6g} is {o.order:.3f} < {minimum}"
        for variable, norm, minimum in required
        for o in report.orders
        if o.variable == variable and o.norm == norm and not o.order >= minimum
    ]


def cmd_mms(args: argparse.Namespace) -> ExitCode:
    config = _load(args, RunMode.mms_converge)
    directory = _output_dir(args, config)
    case = build_case(config.params)
    mms = config.mms

    failures: list[str] = []
    for sweep in mms.sweeps:
        if sweep == "space":
            report = spatial_sweep(
                case, mms.space_taus, mms.space_hs, mms.T_final, config.solver, workers=mms.workers,
            )
        else:
            report = temporal_sweep(
                case, mms.time_hs, mms.time_taus, mms.T_final, config.solver, workers=mms.workers,
            )

        target = directory / sweep
        write_error_report(report, target)
        if config.output.plots:
            emit_plots(report, target / "plots")

        print(report.table())
        print()
        failures.extend(_rate_failures(report, config))
        failures.extend(report.failures)

    if failures:
        for f in failures:
            print(f"  BELOW THRESHOLD {f}")
        return ExitCode.check_failed

    print(f"All fitted orders meet their thresholds; tables in {directory}")
    return ExitCode.ok


def cmd_info(args: argparse.Namespace) -> ExitCode:
    print(f"sla-caginalp {_package_version('sla-caginalp')}")
    for dep in ("numpy", "scipy", "pydantic", "meshio"):
        print(f"  {dep} {_package_version(dep)}")
    print(f"Default output directory: {output_directory_config.get()}")
    print(f"Default solver: {solver_config.get()!r}")
    print("Presets: " + ", ".join(PRESETS))
    return ExitCode.ok


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sla-caginalp",
        description="Phase-field / thermoelastic simulations of stereolithography curing.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, handler, help_text in (
        ("simulate", cmd_simulate, "run a simulation and write fields, energy.csv and summary.json"),
        ("mms-converge", cmd_mms, "manufactured-solution convergence sweeps with fitted orders"),
        ("stability", cmd_stability, "check the discrete energy identity on an unforced run"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="config file path or preset name (" + ", ".join(PRESETS) + ")")
        cmd.add_argument("-o", "--output", default=None, help="output directory")
        cmd.add_argument("--full-scale", action="store_true", help="use the full-resolution grids")
        cmd.set_defaults(handler=handler)

    info = sub.add_parser("info", help="print versions and shipped presets")
    info.set_defaults(handler=cmd_info)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    if args.quiet:
        level = logging.ERROR
    else:
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)

    try:
        return int(args.handler(args))
    except (ConfigError, FileNotFoundError) as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return ExitCode.config
    except (StepError, ConvergenceError) as exc:
        print(f"Solver failure: {exc}", file=sys.stderr)
        return ExitCode.solver
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return ExitCode.io


__all__ = [
    "ExitCode",
    "build_parser",
    "main",
]


if __name__ == "__main__":
    sys.exit(main())

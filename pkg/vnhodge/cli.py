import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from vnhodge import __version__
from vnhodge.config import DEFAULT_TOLERANCES, Tolerances
from vnhodge.enums import Command, OutputFormat
from vnhodge.errors import ValidationFailure, VnHodgeError
from vnhodge.flatcw import (
    barycentric_subdivide,
    check_cocycle,
    compare_invariants,
    comparison_map,
)
from vnhodge.hcomplex import (
    betti,
    euler_characteristic,
    ns_exponent,
    spectral_density,
    spectrum,
    verify_chain_map,
)
from vnhodge.hmodule import dim_tau, finite_generation_sweep
from vnhodge.io.parsers import Problem
from vnhodge.mixins import PandasExportMixin
from vnhodge.read import read_problem, read_subdivision
from vnhodge.truncation import homotopy_certificate
from vnhodge.utils import check_increasing, json_safe, parse_grid
from vnhodge.witten import gap_scan

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = "1.0"
DEFAULT_LAMBDA_GRID = "1e-4:1:25:log"
DEFAULT_T_GRID = "1:10:10"
DEFAULT_WINDOW = "1e-4:1e-2"


@dataclass
class RunConfig:
    """
    Everything one CLI invocation needs.

    Attributes
    ----------
    command : Command
        Subcommand to run.
    inputs : list[Path]
        Input documents. ``compare`` takes one or two, ``farber`` none.
    tolerances : Tolerances
        Numerical tolerances threaded through every call.
    lambda_grid, t_grid : str
        Grid specifications ``lo:hi:steps[:log|lin]``.
    window : str
        Fit window ``lo:hi`` for near-zero slopes.
    """

    command: Command
    inputs: list[Path] = field(default_factory=list)
    tolerances: Tolerances = DEFAULT_TOLERANCES
    lambda_grid: str = DEFAULT_LAMBDA_GRID
    t_grid: str = DEFAULT_T_GRID
    window: str | None = None
    fibers: int | None = None
    out: Path | None = None
    format: OutputFormat = OutputFormat.JSON
    jobs: int | None = None
    lam: float = 1.0
    split: float = 1.0
    bound: float = float("inf")
    allow_ties: bool = False
    subdivision: Path | None = None
    K: list[int] = field(default_factory=list)

    def __post_init__(self):
        for name in ("eps_null", "eps_d2", "eps_hom", "gap_tol", "tie_band"):
            value = getattr(self.tolerances, name)
            if value is not None and not value > 0:
                raise ValidationFailure(
                    f"Tolerance {name} must be positive, got {value}", name=name
                )
        if self.fibers is not None and self.fibers < 1:
            raise ValidationFailure("Fiber count must be positive", fibers=self.fibers)
        if self.jobs is not None and self.jobs < 1:
            raise ValidationFailure("Parallelism degree must be positive", jobs=self.jobs)
        if self.format.is_binary and self.out is None:
            raise ValidationFailure(f"Format {self.format} needs --out", format=self.format)
        if self.format == OutputFormat.NETCDF and self.command != Command.WITTEN:
            raise ValidationFailure(
                "Format netcdf is only available for the witten command",
                command=self.command,
            )


def parse_window(spec: str) -> tuple[float, float]:
    """Parse a fit window ``lo:hi`` with 0 < lo < hi."""
    try:
        lo, hi = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ValidationFailure(f"Window must be 'lo:hi', got {spec!r}", window=spec)
    if not 0 < lo < hi:
        raise ValidationFailure(f"Window needs 0 < lo < hi, got {spec!r}", window=spec)
    return lo, hi


@dataclass
class ReportTable(PandasExportMixin):
    df: pd.DataFrame


def _grid(spec: str, name: str, positive: bool = False) -> np.ndarray:
    try:
        grid = parse_grid(spec, default_scale="log" if name == "lambda" else "lin")
        check_increasing(grid, name, positive=positive)
    except ValueError as e:
        raise ValidationFailure(str(e), grid=spec)
    return grid


class Runner:
    """Run one subcommand and collect its report and optional table."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.tol = config.tolerances
        self.table: pd.DataFrame | None = None
        self.result: PandasExportMixin | None = None

    def problem(self, index: int = 0) -> Problem:
        if len(self.config.inputs) <= index:
            raise ValidationFailure(f"Command {self.config.command} needs an input file")
        return read_problem(
            self.config.inputs[index], fibers=self.config.fibers, eps_d2=self.tol.eps_d2
        )

    def complex(self, index: int = 0):
        return self.problem(index).cochain_complex(self.tol.eps_d2)

    def exporter(self) -> PandasExportMixin | None:
        """The report object behind the table, or the bare table."""
        if self.result is not None:
            return self.result
        return ReportTable(self.table) if self.table is not None else None

    def run(self) -> dict:
        handler = getattr(self, f"run_{self.config.command.value}")
        report = handler()
        return {"schema_version": REPORT_SCHEMA_VERSION, **report}

    def run_validate(self) -> dict:
        problem = self.problem()
        checks = {"schema": True}
        if problem.complex is not None or (
            problem.cw is not None and problem.bundle is not None
        ):
            C = problem.cochain_complex(self.tol.eps_d2)
            checks["d_squared"] = True
            checks["cell_counts"] = [len(c) for c in getattr(C, "cells", ())]
        if problem.bundle is not None:
            checks["relation_residuals"] = dict(problem.bundle.relation_residuals)
            checks["conditions"] = dict(problem.bundle.conditions)
        if problem.cocycle is not None:
            checks["cocycle_residuals"] = check_cocycle(problem.cocycle)
        if problem.morse is not None:
            checks["critical_cells"] = [list(c) for c in problem.morse.critical_cells()]
        return {"command": "validate", "valid": True, "checks": checks}

    def run_dim(self) -> dict:
        problem = self.problem()
        rows = [
            {"module": name, "dim_tau": dim_tau(M), "total_size": M.total_size}
            for name, M in problem.modules.items()
        ]
        if problem.complex is not None or (
            problem.cw is not None and problem.bundle is not None
        ):
            C = problem.cochain_complex(self.tol.eps_d2)
            rows += [
                {"module": f"C^{p}", "dim_tau": dim_tau(M), "total_size": M.total_size}
                for p, M in enumerate(C.modules)
            ]
        self.table = pd.DataFrame(rows, columns=["module", "dim_tau", "total_size"])
        return {"command": "dim", "modules": rows}

    def run_betti(self) -> dict:
        C = self.complex()
        values = [betti(C, p, self.tol.eps_null) for p in C.degrees]
        chi = euler_characteristic(C, self.tol.eps_null)
        self.table = pd.DataFrame({"degree": list(C.degrees), "betti": values})
        return {
            "command": "betti",
            "betti": values,
            "euler_characteristic": chi._asdict(),
        }

    def run_density(self) -> dict:
        C = self.complex()
        grid = _grid(self.config.lambda_grid, "lambda", positive=True)
        window = parse_window(self.config.window) if self.config.window else None
        frames, degrees = [], []
        for p in C.degrees:
            spec = spectrum(C, p, self.tol.eps_psd, jobs=self.config.jobs)
            b = betti(C, p, self.tol.eps_null, spec=spec)
            density = spectral_density(C, p, grid, self.tol.tie_band, spec=spec)
            entry = {"degree": p, "betti": b, "ties": bool(np.any(density.ties))}
            if window is not None:
                fit = ns_exponent(density, b, window)
                entry.update(slope=fit.slope, r2=fit.r2, points=fit.points)
            degrees.append(entry)
            frames.append(density.df.assign(degree=p))
        self.table = pd.concat(frames, ignore_index=True)[["degree", "lambda", "F"]]
        return {
            "command": "density",
            "degrees": degrees,
            "rows": self.table.to_dict(orient="records"),
        }

    def run_truncate(self) -> dict:
        C = self.complex()
        certificate = homotopy_certificate(
            C,
            self.config.lam,
            gap_tol=self.tol.gap_tol,
            eps_hom=self.tol.eps_hom,
            tie_band=self.tol.tie_band,
            allow_ties=self.config.allow_ties,
            jobs=self.config.jobs,
        )
        self.table = pd.DataFrame(
            {
                "degree": list(C.degrees),
                "dim": list(certificate.dims),
                "residual": list(certificate.residuals),
            }
        )
        return {"command": "truncate", "certificate": certificate.to_dict()}

    def run_witten(self) -> dict:
        problem = self.problem()
        if problem.morse is None:
            raise ValidationFailure("The witten command needs a 'morse' section")
        C = problem.cochain_complex(self.tol.eps_d2)
        grid = _grid(self.config.t_grid, "t")
        report = gap_scan(C, problem.morse, grid, self.config.split, jobs=self.config.jobs)
        self.table = report.df
        self.result = report
        return report.to_dict()

    def run_compare(self) -> dict:
        window = parse_window(self.config.window or DEFAULT_WINDOW)
        problem = self.problem()
        C1 = problem.cochain_complex(self.tol.eps_d2)
        extra = {}
        if len(self.config.inputs) > 1:
            C2 = self.complex(1)
        else:
            if problem.cw is None or problem.bundle is None:
                raise ValidationFailure(
                    "Comparing with a subdivision needs a CW complex and a bundle"
                )
            if self.config.subdivision is not None:
                subdivision = read_subdivision(self.config.subdivision, problem.cw)
            else:
                subdivision = barycentric_subdivide(problem.cw)
            f = comparison_map(subdivision, problem.bundle, coarse=C1)
            C2 = f.target
            extra["chain_map_residual"] = verify_chain_map(f)
        report = compare_invariants(C1, C2, window, eps_null=self.tol.eps_null)
        self.table = report.df
        self.result = report
        return {**report.to_dict(), **extra}

    def run_farber(self) -> dict:
        if not self.config.K:
            raise ValidationFailure("The farber command needs at least one K")
        sweep = finite_generation_sweep(self.config.K, self.config.bound)
        self.table = sweep.df
        self.result = sweep
        return sweep.to_dict()


def _write(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def emit(runner: Runner, report: dict, config: RunConfig):
    """Write the report as JSON or its table in the requested format."""
    if config.format == OutputFormat.JSON:
        text = json.dumps(json_safe(report), indent=2, sort_keys=True) + "\n"
        _write(text, config.out)
        return
    exporter = runner.exporter()
    if exporter is None:
        raise ValidationFailure(
            f"Command {config.command} has no table to write as {config.format}"
        )
    match config.format:
        case OutputFormat.CSV:
            _write(exporter.to_csv(), config.out)
        case OutputFormat.PARQUET:
            exporter.to_parquet(config.out)
        case OutputFormat.NETCDF:
            exporter.to_netcdf(config.out)


def run(config: RunConfig) -> int:
    """
    Run a subcommand and write its report.

    Returns
    -------
    int
        Exit status: 0 on success, 2 on validation failures, 3 on numerical
        precondition failures and 1 on anything else. Errors are written to stderr
        as a JSON object.

    """
    try:
        runner = Runner(config)
        report = runner.run()
        emit(runner, report, config)
    except VnHodgeError as e:
        logger.debug("Command %s failed", config.command, exc_info=True)
        sys.stderr.write(json.dumps(json_safe(e.to_dict()), sort_keys=True) + "\n")
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure in command %s", config.command)
        error = {"error": "InternalError", "message": str(e), "details": {}}
        sys.stderr.write(json.dumps(error, sort_keys=True) + "\n")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps-null", type=float, default=None)
    common.add_argument("--eps-d2", type=float, default=None)
    common.add_argument("--eps-hom", type=float, default=None)
    common.add_argument("--gap-tol", type=float, default=1e-8)
    common.add_argument("--tie-band", type=float, default=1e-10)
    common.add_argument("--lambda-grid", default=DEFAULT_LAMBDA_GRID)
    common.add_argument("--t-grid", default=DEFAULT_T_GRID)
    common.add_argument("--window", default=None, help="fit window lo:hi")
    common.add_argument("--fibers", type=int, default=None)
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--out", type=Path, default=None)
    common.add_argument(
        "--format", type=OutputFormat, choices=list(OutputFormat), default="json"
    )
    common.add_argument("--lambda", dest="lam", type=float, default=1.0)
    common.add_argument("--split", type=float, default=1.0)
    common.add_argument("--bound", type=float, default=float("inf"))
    common.add_argument("--allow-ties", action="store_true")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="vnhodge",
        description="Von Neumann Hodge theory of flat Hilbert bundles at desk scale.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command in (
        Command.VALIDATE,
        Command.DIM,
        Command.BETTI,
        Command.DENSITY,
        Command.TRUNCATE,
        Command.WITTEN,
    ):
        p = sub.add_parser(command.value, parents=[common])
        p.add_argument("input", type=Path)
    p = sub.add_parser(Command.COMPARE.value, parents=[common])
    p.add_argument("inputs", type=Path, nargs="+")
    p.add_argument("--subdivision", type=Path, default=None)
    p = sub.add_parser(Command.FARBER.value, parents=[common])
    p.add_argument("K", type=int, nargs="+")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    command = Command(args.command)
    if command == Command.COMPARE:
        inputs = list(args.inputs)
    elif command == Command.FARBER:
        inputs = []
    else:
        inputs = [args.input]
    return RunConfig(
        command=command,
        inputs=inputs,
        tolerances=DEFAULT_TOLERANCES._replace(
            eps_null=args.eps_null,
            eps_d2=args.eps_d2,
            eps_hom=args.eps_hom,
            gap_tol=args.gap_tol,
            tie_band=args.tie_band,
        ),
        lambda_grid=args.lambda_grid,
        t_grid=args.t_grid,
        window=args.window,
        fibers=args.fibers,
        out=args.out,
        format=OutputFormat(args.format),
        jobs=args.jobs,
        lam=args.lam,
        split=args.split,
        bound=args.bound,
        allow_ties=args.allow_ties,
        subdivision=getattr(args, "subdivision", None),
        K=list(getattr(args, "K", [])),
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)
    try:
        config = config_from_args(args)
    except VnHodgeError as e:
        sys.stderr.write(json.dumps(json_safe(e.to_dict()), sort_keys=True) + "\n")
        return e.exit_code
    return run(config)


if __name__ == "__main__":
    sys.exit(main())

"""
Command line entry point: ``sdlab check``, ``sdlab simulate`` and ``sdlab signs``.
Exit codes are 0 on success, 1 on failed checks or runtime failures, 2 on usage and configuration errors
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

from sdlab import __version__
from sdlab.checks import format_report, run_checks
from sdlab.defaults import CHECK_SUITES, DEFAULT_JOBS, DEFAULT_SEED, TRACE_FILE
from sdlab.error.exceptions import ConfigError, SolverError
from sdlab.gauge_reduction import format_sign_table, sign_table
from sdlab.helpers import output_directory, read_config_text
from sdlab.systems import SystemSpec
from sdlab.timestep import INTEGRATORS, IntegratorConfig, run_simulation

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs, collected from the command line
    """

    command: str
    suite: str = "all"
    config: Optional[Path] = None
    sizes: Optional[Tuple[int, ...]] = None
    dt: Optional[float] = None
    steps: Optional[int] = None
    integrator: Optional[str] = None
    seed: Optional[int] = None
    out: Optional[Path] = None
    tol_scale: float = 1.0
    jobs: int = DEFAULT_JOBS
    nmax: int = 3
    json: bool = False

    def __post_init__(self):
        if self.command == "simulate" and self.config is None:
            raise ConfigError("simulate needs a --config file")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if not self.tol_scale > 0:
            raise ConfigError(f"tol-scale must be positive, got {self.tol_scale}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{name: value for name, value in vars(args).items() if name in fields})


def _sizes(text: str) -> Tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.replace("x", ",").split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid sizes must be integers like 64 or 8,8,8, got {text!r}")
    if not 1 <= len(sizes) <= 3:
        raise argparse.ArgumentTypeError(f"grid sizes need 1 to 3 axes, got {text!r}")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdlab", description="Stokes-Dirac reduction on periodic grids: checks, simulations and sign report."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="INFO with -v, DEBUG with -vv")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="Run the property suites and report residuals against tolerances")
    check.add_argument("--suite", default="all", choices=("all",) + CHECK_SUITES)
    check.add_argument("--seed", type=int, default=DEFAULT_SEED)
    check.add_argument("--tol-scale", type=float, default=1.0, help="Factor applied to every tolerance")
    check.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="Checks evaluated concurrently")

    simulate = commands.add_parser("simulate", help="Integrate a system described by a JSON config")
    simulate.add_argument("--config", type=Path, required=True)
    simulate.add_argument("--dt", type=float)
    simulate.add_argument("--steps", type=int)
    simulate.add_argument("--grid", dest="sizes", type=_sizes, help="Grid sizes override, e.g. 64 or 8,8,8")
    simulate.add_argument("--integrator", choices=tuple(INTEGRATORS))
    simulate.add_argument("--out", type=Path, help="Output directory (default: $SDLAB_OUT or ./sdlab-out)")
    simulate.add_argument("--seed", type=int, help="Seed of the random initial condition")

    signs = commands.add_parser("signs", help="Report the sign conventions of the reduced structure maps")
    signs.add_argument("--nmax", type=int, default=3, choices=(1, 2, 3))
    signs.add_argument("--json", action="store_true", help="Emit a JSON array instead of a text table")
    return parser


def _configure_logging(verbosity: int):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_check(run: RunConfig) -> int:
    items = run_checks(None if run.suite == "all" else run.suite, run.seed, run.tol_scale, run.jobs)
    print(format_report(items))
    return EXIT_OK if all(item.passed for item in items) else EXIT_FAILURE


def _integrator_config(text: str, run: RunConfig) -> IntegratorConfig:
    section = json.loads(text).get("integrator") or {}
    if not isinstance(section, dict):
        raise ConfigError("integrator must be an object")
    try:
        cfg = IntegratorConfig.from_dict(section)
    except TypeError as e:
        raise ConfigError(f"integrator: {e}") from e
    overrides = {"method": run.integrator, "dt": run.dt, "steps": run.steps}
    cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if "snapshot_every" not in section:
        cfg = dataclasses.replace(cfg, snapshot_every=cfg.steps)
    return cfg


def cmd_simulate(run: RunConfig) -> int:
    text = read_config_text(run.config)
    spec = SystemSpec.from_json(text).with_overrides(run.sizes, run.seed)
    cfg = _integrator_config(text, run)
    out_dir = output_directory(run.out)
    try:
        result = run_simulation(spec, cfg, out_dir)
    except OSError as e:
        raise ConfigError(f"Cannot write to the output directory {out_dir}: {e.strerror}") from e
    trace = result.trace
    print(
        f"{spec.name}: {len(trace)} rows in {out_dir / TRACE_FILE}, {len(result.snapshots)} snapshots, "
        f"final drift {trace.final_drift:.3e}, max drift {trace.max_drift:.3e}, "
        f"conserved drift {trace.conserved_drift:.3e}"
    )
    return EXIT_OK


def cmd_signs(run: RunConfig) -> int:
    rows = sign_table(run.nmax)
    if run.json:
        print(json.dumps([row.as_dict() for row in rows], indent=2))
    else:
        print(format_sign_table(rows))
    return EXIT_OK


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "signs": cmd_signs}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    _configure_logging(args.verbose)
    try:
        run = RunConfig.from_args(args)
        return COMMANDS[run.command](run)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        _logger.debug("Solver failure", exc_info=e)
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_FAILURE

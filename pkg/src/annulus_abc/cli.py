"""Command line entry point: ``annulus-abc run|converge|field|validate --config cfg.json``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .assembly import ConfigurationError
from .config import ConfigError, ExperimentConfig, load_config
from .curves import CurveError
from .kernels import SeparationError
from .mesh import MeshError
from .solve import NumericalFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CONFIG_ERRORS = (ConfigError, ConfigurationError, CurveError, SeparationError)
NUMERICAL_ERRORS = (NumericalFailure, MeshError, ArithmeticError)

log = logging.getLogger("annulus_abc")


def _setup_logging(output_dir: Path | None, quiet: bool) -> list[logging.Handler]:
    log.setLevel(logging.INFO)
    log.propagate = False
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(message)s", "%Y-%m-%d %H:%M:%S")
    handlers: list[logging.Handler] = []
    if output_dir is not None:
        fh = logging.FileHandler(output_dir / "run.log", mode="w")
        fh.setFormatter(fmt)
        handlers.append(fh)
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("%(message)s"))
    sh.setLevel(logging.WARNING if quiet else logging.INFO)
    handlers.append(sh)
    for h in handlers:
        log.addHandler(h)
    return handlers


def _cmd_run(cfg: ExperimentConfig) -> None:
    from .experiments import run_single
    from .report import write_errors_csv

    _, _, _, report = run_single(cfg)
    row = report.table()[0]
    if row["l2_error"] is not None:
        write_errors_csv([row], cfg.output_dir / "errors.csv")
        log.info(f"wrote {cfg.output_dir / 'errors.csv'}")


def _cmd_converge(cfg: ExperimentConfig) -> None:
    from .experiments import run_convergence
    from .report import plot_convergence, write_errors_csv

    report = run_convergence(cfg)
    rows = report.table()
    write_errors_csv(rows, cfg.output_dir / "errors.csv")
    plot_convergence(rows, cfg.output_dir / "convergence.png", title=f"{cfg.problem} / {cfg.preset}")
    log.info(f"wrote {cfg.output_dir / 'errors.csv'} and convergence.png")


def _cmd_field(cfg: ExperimentConfig) -> None:
    from .experiments import run_field
    from .report import field_arrays, plot_field, write_vtk

    res = run_field(cfg)
    write_vtk(res.mesh, field_arrays(res.values), cfg.output_dir / "field.vtk")
    plot_field(res.mesh, res.values, cfg.output_dir / "field.png", title=f"{cfg.problem} total field")
    written = "field.png"
    if cfg.gamma is not None:
        (cfg.output_dir / "residual.txt").write_text(f"weak_neumann_residual {res.neumann_residual!r}\n")
        written += " and residual.txt"
    log.info(f"wrote {cfg.output_dir / 'field.vtk'}, {written}")


def _cmd_validate(cfg: ExperimentConfig) -> None:
    from .experiments import log_parameters, validate

    log_parameters(cfg)
    validate(cfg)
    log.info("configuration valid")


COMMANDS = {"run": _cmd_run, "converge": _cmd_converge, "field": _cmd_field, "validate": _cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="annulus-abc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="JSON experiment configuration")
    p.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(None, args.quiet)
    try:
        cfg = load_config(args.config)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except CONFIG_ERRORS as exc:
        log.error(f"configuration error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        log.error(f"configuration error: cannot create output directory: {exc}")
        return EXIT_CONFIG

    handlers = _setup_logging(cfg.output_dir, args.quiet)
    log.info(f"annulus-abc {__version__} {args.command} --config {args.config}")
    if cfg.threads:
        log.info(f"threads = {cfg.threads} requested; BLAS threading follows the environment")
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](cfg)
    except CONFIG_ERRORS as exc:
        log.error(f"configuration error: {exc}")
        code = EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        log.error(f"numerical failure: {exc}")
        code = EXIT_NUMERICAL
    else:
        code = EXIT_OK
        log.info(f"done in {time.perf_counter() - t0:.2f}s")
    finally:
        for h in handlers:
            h.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())

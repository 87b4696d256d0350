"""Command-line entry point: ``phaselab <verb> ...``.

Verbs
  evolve                 run the generic evolution configured by --config
  experiment <name>      run a named scenario (double-slit, packet-spreading, ...)
  diagnose <file>        classify a stored phase-space field or density matrix
  finite-bit <Q>         run the finite-bit check suite for Q bits

The exit code is 0 exactly when every in-run check passes.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import experiments as ex
from .diagnostics import classify, heisenberg_check
from .grid import (
    BoundaryMassWarning,
    ClassicalWaveFunction,
    DensityMatrix,
    GridError,
    PositionWaveFunction,
    ValidationError,
    read_field,
    wigner_transform,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI file of key = value sections")
    p.add_argument("--out", type=Path, help="directory for data files, summary and manifest")
    p.add_argument(
        "--tol", action="append", default=[], metavar="NAME=VALUE", help="override a tolerance (repeatable)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phaselab", description="Phase-space classical and quantum particle laboratory.")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("evolve", help="evolve a configured initial state")
    _common(p)
    p = sub.add_parser("experiment", help="run a named scenario")
    p.add_argument("name", choices=ex.SCENARIOS)
    _common(p)
    p = sub.add_parser("diagnose", help="classify a stored field")
    p.add_argument("file", type=Path)
    _common(p)
    p = sub.add_parser("finite-bit", help="finite-bit check suite")
    p.add_argument("Q", type=int)
    _common(p)
    return parser


def _load(args, scenario: str, set_values=None) -> ex.ExperimentConfig:
    overrides = ex.parse_tolerance_overrides(args.tol)
    text = args.config.read_text() if args.config else ""
    return ex.ExperimentConfig.from_text(text, scenario, overrides, set_values)


def _finish(result: ex.RunResult, out: Path | None) -> int:
    sys.stdout.write(result.summary())
    if out is not None:
        manifest = ex.write_outputs(result, out)
        sys.stdout.write(f"manifest_hash = {manifest['manifest_hash']}\n")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def _diagnose(args) -> int:
    obj = read_field(args.file)
    if isinstance(obj, PositionWaveFunction):
        obj = obj.density_matrix()
    if isinstance(obj, DensityMatrix):
        obj = wigner_transform(obj)
    c = classify(obj)
    h = heisenberg_check(obj)
    text = c.report() + f"var_x = {h.var_x!r}\nvar_p = {h.var_p!r}\nuncertainty_product = {h.product!r}\nheisenberg_ok = {str(h.passed).lower()}\n"
    if isinstance(obj, ClassicalWaveFunction):
        text = "field = |psi|^2\n" + text
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "classification.txt").write_text(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "diagnose":
            return _diagnose(args)
        if args.verb == "evolve":
            cfg = _load(args, "evolve")
        elif args.verb == "experiment":
            cfg = _load(args, args.name)
        else:
            cfg = _load(args, "finite-bit", {"finite-bit": {"Q": args.Q}})
        return _finish(ex.run(cfg), args.out)
    except (ex.ConfigError, GridError, ValidationError, ValueError, OSError) as exc:
        sys.stderr.write(f"phaselab: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    warnings.simplefilter("default", BoundaryMassWarning)
    sys.exit(main())

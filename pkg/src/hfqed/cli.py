"""Command line entry point: ``hfqed {splitting,spectrum,scan,check}``.

Exit codes: 0 success, 1 numerical failure (or a failed check), 2 bad config.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config (defaults used when omitted)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP threads")
    common.add_argument("--seed", type=int, default=0, help="seed for eigensolver start vectors")
    common.add_argument("--dense", action="store_true", help="force the dense eigensolver")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hfqed", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("splitting", parents=[common], help="second-order splitting report (JSON)")
    sp = sub.add_parser("spectrum", parents=[common], help="low-lying spectrum at one cutoff")
    sp.add_argument("--triplets", type=Path, help="also export the operator as row col re im lines")
    sc = sub.add_parser("scan", parents=[common], help="infrared scan: CSV + JSON (+ SVG)")
    sc.add_argument("--svg", action="store_true", help="write the level diagram")
    sub.add_parser("check", parents=[common], help="run the invariant suite")
    return p


def _emit(doc: dict, out: Path | None, name: str) -> None:
    text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    sys.stdout.write(text)


def _finite(x: float):
    import math

    return x if math.isfinite(x) else None


def cmd_splitting(cfg, args) -> int:
    from .feshbach import delta_from_gammas, effective_matrix, gamma_integrals
    from .scan import build_space

    space = build_space(cfg, cfg.sigma_point)
    eff = effective_matrix(cfg.g, cfg.P3, space.masses, space.elements, space.grid)
    doc = eff.report.to_json()
    hires = gamma_integrals(cfg.P3, space.grid.window, space.masses)
    doc["gamma_formula_continuum"] = list(hires)
    doc["delta_formula_continuum"] = delta_from_gammas(hires)
    doc["modes"] = len(space.grid)
    _emit(doc, args.out, "splitting.json")
    return EXIT_OK


def cmd_spectrum(cfg, args) -> int:
    from .fock import assemble_K
    from .scan import solve_point
    from .spectrum import evaluate_gap, photon_number_expectation, vacuum_overlap

    space, spec, eff = solve_point(cfg, cfg.sigma_point, dense=args.dense, seed=args.seed)
    gap = evaluate_gap(spec, cfg.g, cfg.P3, cfg.sigma_point, cfg.resolved_eta())
    doc = spec.to_json()
    doc["gap"] = _finite(doc["gap"])
    doc.update(
        {
            "dim": space.dim,
            "gap_assertion": gap.to_json(),
            "n_ph": photon_number_expectation(space, spec.ground_vector),
            "overlap": vacuum_overlap(space, spec.ground_vector),
            "splitting": eff.report.to_json(),
        }
    )
    doc["gap_assertion"]["gap_value"] = _finite(doc["gap_assertion"]["gap_value"])
    if args.triplets is not None:
        assemble_K(space, cfg.g, cfg.P3).export_triplets(args.triplets)
    _emit(doc, args.out, "spectrum.json")
    return EXIT_OK


def cmd_scan(cfg, args) -> int:
    from .scan import ir_scan, write_csv, write_json, write_svg

    rows = ir_scan(cfg, dense=args.dense, seed=args.seed)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.output.stem
    write_csv(rows, out / f"{stem}.csv")
    write_json(rows, cfg, out / f"{stem}.json")
    if args.svg or cfg.output.svg:
        write_svg(rows, out / f"{stem}.svg")
    for r in rows:
        print(",".join(r.csv_row()))
    return EXIT_NUMERIC if any(r.error for r in rows) else EXIT_OK


def cmd_check(cfg, args) -> int:
    from .checks import run_all

    results = run_all(cfg, seed=args.seed)
    for r in results:
        print(r.line())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        doc = [{"name": r.name, "passed": r.passed, "seconds": r.seconds, "metrics": r.metrics} for r in results]
        (args.out / "check.json").write_text(json.dumps(doc, indent=2, default=str) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {"splitting": cmd_splitting, "spectrum": cmd_spectrum, "scan": cmd_scan, "check": cmd_check}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        # only effective when numerical libraries are not loaded yet
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    from .config import ConfigError, load_config

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except ArithmeticError as exc:  # solver failures, regime violations found numerically
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def run_cli(argv: list[str] | None = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())

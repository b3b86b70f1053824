"""Command-line entry point: ``finsler-pohozaev --config run.ini --out results/``.

Exit status: 0 when every assertion passes, 1 when an assertion fails,
2 for configuration errors, 3 when a computation raises.
"""

from __future__ import annotations

import argparse
import datetime
import logging
import os
import sys
import time
from dataclasses import replace

from . import _kernels, config, experiments, reporting
from .domain import deterministic_summation
from .errors import ConfigParseError, ExperimentFailure, FinslerLabError

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(prog="finsler-pohozaev", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--resolution", type=int, help="override the resolution list with a single n")
    ap.add_argument("--seed", type=int, help="override [run] seed")
    ap.add_argument("--deterministic", action="store_true", help="exactly rounded sums; no timestamps in the report")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _report(cfg, outcome, deterministic, started, error=None):
    rep = {
        "version": config.VERSION,
        "experiment": cfg.experiment if cfg else None,
        "config": cfg.as_dict() if cfg else None,
        "backend": _kernels.BACKEND,
        "deterministic": deterministic,
    }
    if outcome is not None:
        rep["results"] = outcome.results
        rep["assertions"] = outcome.assertions
        rep["passed"] = outcome.passed
    if error is not None:
        rep["error"] = {"type": type(error).__name__, "message": str(error)}
        rep["passed"] = False
    if not deterministic:
        rep["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        rep["runtime_seconds"] = time.perf_counter() - started
    return rep


def execute(cfg, out_dir, deterministic=False):
    """Run one experiment and write its files; returns (exit status, outcome)."""
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    outcome, error = None, None
    try:
        with deterministic_summation(deterministic):
            outcome = experiments.run(cfg)
    except ConfigParseError:
        raise
    except FinslerLabError as exc:
        error = exc
    report = _report(cfg, outcome, deterministic, started, error)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(reporting.dumps(report))
    if error is not None:
        raise error
    for name, text in outcome.tables.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    if outcome.field is not None and _wants_field(cfg):
        outcome.field.to_csv(os.path.join(out_dir, "field.csv"))
    if not outcome.passed:
        failed = [a for a in outcome.assertions if not a.passed]
        msg = "; ".join(f"{a.name} = {a.value!r} (need {a.relation} {a.threshold!r})" for a in failed)
        raise ExperimentFailure(msg)
    return EXIT_OK, outcome


def _wants_field(cfg):
    raw = cfg.sections.get("output", {}).get("field_csv", "false")
    return config._bool(raw, "field_csv")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config.load(args.config)
        if args.resolution is not None:
            if args.resolution < 8:
                raise ConfigParseError("--resolution must be >= 8")
            if cfg.experiment == "convergence-study":
                raise ConfigParseError("--resolution cannot override a convergence study")
            cfg = replace(cfg, resolutions=[args.resolution])
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        _, outcome = execute(cfg, args.out, args.deterministic)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentFailure as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except FinslerLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if outcome.stdout:
        print(outcome.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

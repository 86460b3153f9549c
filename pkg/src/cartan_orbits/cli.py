"""Command line entry point: ``run``, ``list`` and ``verify-stabilizer``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import CartanOrbitsError, ConfigError
from .scenarios import list_scenarios, run_scenario, stabilizer_from_descriptor

log = logging.getLogger("cartan_orbits")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    level = os.environ.get("CARTAN_ORBITS_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def cmd_run(args) -> int:
    config = _load_json(args.config)
    if not isinstance(config, dict):
        raise ConfigError("configuration must be a JSON object")
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    out = Path(args.out or config.get("output_dir") or ".")
    report = run_scenario(config)
    out.mkdir(parents=True, exist_ok=True)
    for stem, table in sorted(report.tables.items()):
        report.artifacts.extend(str(p) for p in table.write(out, stem))
    report_path = out / f"{report.scenario}.report.json"
    report.artifacts.append(str(report_path))
    text = json.dumps(report.to_json(), indent=2, sort_keys=True, default=str)
    report_path.write_text(text)
    for check in report.checks:
        log.info("%s %s: measured %s expected %s", "PASS" if check.passed else "FAIL",
                 check.name, check.measured, check.expected)
    print(text)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_list(args) -> int:
    for line in list_scenarios():
        print(line)
    return EXIT_PASS


def cmd_verify_stabilizer(args) -> int:
    desc = _load_json(args.descriptor)
    if not isinstance(desc, dict):
        raise ConfigError("descriptor must be a JSON object")
    basis = stabilizer_from_descriptor(desc)
    result = {"dimension": basis.dim, "closure_residual": basis.closure_residual}
    passed = basis.closure_residual < 1e-8
    if "expected_dim" in desc:
        result["expected_dim"] = desc["expected_dim"]
        passed &= basis.dim == desc["expected_dim"]
    result["passed"] = bool(passed)
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_PASS if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cartan-orbits",
                                     description="Curved orbit decompositions on charts and models.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario from a JSON config")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (default: config output_dir or .)")
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(func=cmd_run)
    lst = sub.add_parser("list", help="list builtin scenarios")
    lst.set_defaults(func=cmd_list)
    ver = sub.add_parser("verify-stabilizer", help="stabilizer dimension of a datum")
    ver.add_argument("descriptor")
    ver.set_defaults(func=cmd_verify_stabilizer)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CartanOrbitsError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

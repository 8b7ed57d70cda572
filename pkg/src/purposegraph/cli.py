"""Command-line front-end.

Exit codes: 0 ok/valid, 1 violations or uncovered services, 2 usage, I/O,
parse or schema errors. Machine output goes to stdout, messages to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

from .errors import PurposeGraphError, SourceError
from .extractor import Defaults, defaults_from_dict, extract, load_corpus
from .lpl import DEFAULT_REGISTRY, StrengthRegistry, dumps_canonical, loads_json, parse_policy
from .report import format_stats, policy_to_dot, summarize
from .servicenet import check_coverage, parse_service_model
from .validator import validate

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2

DEFAULTS_ENV = "PURPOSEGRAPH_DEFAULTS"


class _Fail(Exception):
    """Abort the current command with exit code 2 and a message."""


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _Fail(f"{path}: {exc.strerror or exc}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise _Fail(f"{path}: {exc.strerror or exc}") from None


def _load_defaults(path: str | None) -> Defaults:
    path = path or os.environ.get(DEFAULTS_ENV)
    if not path:
        return Defaults()
    try:
        return defaults_from_dict(loads_json(_read(path)))
    except PurposeGraphError as exc:
        raise _Fail(f"{path}: {exc}") from None


def _load_registry(path: str | None) -> StrengthRegistry:
    if not path:
        return DEFAULT_REGISTRY
    doc = loads_json(_read(path))
    if not isinstance(doc, dict) or not all(isinstance(v, dict) for v in doc.values()):
        raise _Fail(f"{path}: expected {{model: {{attribute: 'higher'|'lower'}}}}")
    try:
        return DEFAULT_REGISTRY.extended(doc)
    except ValueError as exc:
        raise _Fail(f"{path}: {exc}") from None


def cmd_extract(args: argparse.Namespace) -> int:
    src = Path(args.src_dir)
    if not src.is_dir():
        raise _Fail(f"{src}: not a directory")
    defaults = _load_defaults(args.defaults)
    name = args.name or src.resolve().name
    try:
        units = load_corpus(src)
    except SourceError as exc:
        raise _Fail(str(exc)) from None
    result = extract(units, name, defaults)
    _write(args.out, dumps_canonical(result.to_dict()))
    if args.dot:
        _write(args.dot, policy_to_dot(result.policy()))
    warnings_path = args.warnings or str(Path(args.out).with_suffix(".warnings.txt"))
    warnings = sorted(result.warnings, key=lambda w: (w.path, w.line, w.col, w.message))
    _write(warnings_path, "".join(f"{w}\n" for w in warnings))
    _err(
        f"extracted {result.stats.n_endpoints} endpoint purposes from "
        f"{result.stats.n_controllers} controllers ({len(warnings)} warnings)"
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    registry = _load_registry(args.registry)
    policy = parse_policy(_read(args.policy), lenient=args.lenient)
    report = validate(policy, registry, strict_inheritance=args.strict_inheritance)
    sys.stdout.write(dumps_canonical(report.to_dict()))
    if not report.is_valid:
        _err(f"{args.policy}: {len(report.violations)} violation(s)")
    return EXIT_OK if report.is_valid else EXIT_FINDINGS


def cmd_coverage(args: argparse.Namespace) -> int:
    policy = parse_policy(_read(args.policy), lenient=args.lenient)
    model = parse_service_model(_read(args.services), lenient=args.lenient)
    report = check_coverage(policy, model.top_level, model.gov)
    sys.stdout.write(dumps_canonical(report.to_dict()))
    if not report.ok:
        _err(f"ungoverned: {len(report.ungoverned)}, uncovered: {len(report.uncovered)}")
    return EXIT_OK if report.ok else EXIT_FINDINGS


def cmd_stats(args: argparse.Namespace) -> int:
    summary = summarize(loads_json(_read(args.result)))
    if args.json:
        sys.stdout.write(dumps_canonical(summary))
    else:
        sys.stdout.write(format_stats(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="purposegraph",
        description="Extract, validate and inspect composed privacy-policy purposes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="generate purposes from a directory of .msvc files")
    p.add_argument("src_dir")
    p.add_argument("--out", required=True, help="extraction result JSON")
    p.add_argument("--dot", help="write the composed-purpose graph as DOT")
    p.add_argument("--defaults", help=f"defaults config JSON (else ${DEFAULTS_ENV})")
    p.add_argument("--name", help="corpus name (default: directory name)")
    p.add_argument("--warnings", help="warnings file (default: OUT with .warnings.txt suffix)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("validate", help="check a policy against the composition rules")
    p.add_argument("policy")
    p.add_argument("--strict-inheritance", action="store_true", help="also order-check inheritance edges")
    p.add_argument("--lenient", action="store_true", help="ignore unknown keys")
    p.add_argument("--registry", help="extra privacy-model strength directions (JSON)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("coverage", help="check that every service is governed and covered")
    p.add_argument("policy")
    p.add_argument("services")
    p.add_argument("--lenient", action="store_true", help="ignore unknown keys")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("stats", help="summarize an extraction result")
    p.add_argument("result")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except _Fail as exc:
        _err(str(exc))
    except PurposeGraphError as exc:
        _err(str(exc))
    return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

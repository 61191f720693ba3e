"""Command-line interface over the run and audit workflows.

Every command prints one JSON document to stdout. Errors go to stderr as
a single JSON line, with the exit code signalling the failure class:
0 success, 2 bad configuration, 3 I/O failure, 4 internal failure while
executing an audit.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from pydantic import ValidationError as SchemaValidationError

from . import workflows
from .config import RunConfig
from .core import EprbError, ValidationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_AUDIT = 4


class AuditRunError(Exception):
    """An audit crashed mid-run (as opposed to reporting a failed check)."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON config file, or '-' to read it from stdin")
    common.add_argument("--model", help="mermin | grandma | quantum")
    common.add_argument("--policy",
                        help="labels | labels-independent | fixed:T,P | scan:d1,d2,...")
    common.add_argument("--n", type=int, help="number of trials")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--bind", metavar="BINDING",
                        help="label binding, e.g. a=0,b=120,c=240")
    common.add_argument("--out", metavar="PREFIX", help="output path prefix")
    common.add_argument("--grandma-mode", dest="grandma_mode",
                        choices=["labeled", "continuous"],
                        help="table mode for the grandma model")
    common.add_argument("--weights", metavar="W0,...,W7",
                        help="comma-separated plan weights for the mermin model")

    parser = argparse.ArgumentParser(
        prog="eprb",
        description="Simulate and audit the two-particle spin-correlation experiment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common],
                   help="run trials and write records plus a summary")
    sub.add_parser("certify", parents=[common],
                   help="exact certificates: opposite-spin floor, correlation bounds")
    sub.add_parser("audit", parents=[common],
                   help="no-signaling, independence and agreement audits")
    sub.add_parser("scan", parents=[common],
                   help="sweep the setting difference (--n is trials per point)")
    serve = sub.add_parser("serve", parents=[common], help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def load_config_dict(source: Optional[str]) -> dict:
    """Config JSON from a path, stdin ('-'), or nothing (empty dict)."""
    if source is None:
        return {}
    if source == "-":
        raw = sys.stdin.read()
    else:
        with open(source, "r", encoding="utf-8") as handle:
            raw = handle.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config JSON must be an object")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge config file and flags; flags win where both are given."""
    data = load_config_dict(args.config)
    for key in ("model", "policy", "n", "seed", "bind", "out", "grandma_mode"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "weights", None) is not None:
        try:
            data["weights"] = [float(w) for w in args.weights.split(",")]
        except ValueError:
            raise ValidationError(f"bad weights {args.weights!r}") from None
    try:
        return RunConfig(**data)
    except SchemaValidationError as exc:
        raise ValidationError(str(exc)) from exc


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


def _fail(code: int, kind: str, message: str) -> int:
    line = {"error": {"kind": kind, "exit_code": code, "message": message}}
    print(json.dumps(line), file=sys.stderr)
    return code


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "serve":
        return _cmd_serve(args)
    config = resolve_config(args)
    if args.command == "simulate":
        _emit(workflows.simulate_run(config))
    elif args.command == "certify":
        _emit(workflows.certify_report(config))
    elif args.command == "scan":
        _emit(workflows.scan_curve(config))
    elif args.command == "audit":
        try:
            result = workflows.audit_battery(config)
        except (EprbError, OSError):
            raise
        except Exception as exc:
            raise AuditRunError(f"{type(exc).__name__}: {exc}") from exc
        _emit(result)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except AuditRunError as exc:
        return _fail(EXIT_AUDIT, "audit", str(exc))
    except EprbError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    sys.exit(main())

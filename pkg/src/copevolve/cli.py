"""Command-line entry point.

Six subcommands mirror the experiment modes: solve, evolve-single,
evolve-multi, cross-eval, features, report.  All configuration comes from
one JSON config file plus repeatable ``--set key=value`` overrides; the
``--seed`` flag is mandatory for every mode except report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from .experiments import MODES, DataError, UsageError, build_spec, run_mode


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise UsageError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply_override(config: dict, path: list[str], value) -> None:
    node = config
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise UsageError(f"cannot set {'.'.join(path)}: {part} is not an object")
    node[path[-1]] = value


def load_config(path: str | None, overrides: list[str]) -> dict:
    config: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                config = json.load(fh)
        except FileNotFoundError:
            raise DataError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(config, dict):
            raise DataError("config file must hold a JSON object")
    for text in overrides:
        key_path, value = _parse_override(text)
        _apply_override(config, key_path, value)
    return config


def _build_parser() -> _Parser:
    parser = _Parser(prog="copevolve",
                     description="Evolve and analyse solver-discriminating "
                                 "constrained problem instances.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} mode")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry (dotted keys)")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (required except for report)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(args.config, args.overrides)
        spec = build_spec(args.mode, config, args.seed)
        result = run_mode(spec)
        if args.mode in ("solve", "cross-eval"):
            json.dump(result, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
        elif args.mode == "report":
            json.dump(result, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
        else:
            entries = result.get("entries", []) if isinstance(result, dict) else result
            failed = [e for e in entries if isinstance(e, dict) and e.get("status") == "failed"]
            print(f"{args.mode}: {len(entries)} entries, {len(failed)} failed")
            for e in failed:
                print(f"  failed {e.get('cell', '?')}: {e.get('error')}")
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())

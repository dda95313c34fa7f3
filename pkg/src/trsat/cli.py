"""Command-line front end.

Subcommands: compile | eval | sat | oracle | reduce. Machine-readable
JSON goes to stdout, human summaries to stderr. Exit codes: 0 for a
positive verdict (accept / witness / valid), 1 for a negative one,
2 for usage or format errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .arith import (
    ArithmeticContext,
    EvaluationError,
    FixedWidthFormat,
    Rat,
    rat_from_str,
    rat_to_str,
)
from .compiler import (
    VARIANT_BOUNDED,
    VARIANT_UNBOUNDED,
    compile_bounded,
    compile_unbounded,
)
from .encoder import TransformerEncoder, accepts, evaluate
from .engine import reduce_witness, sat_bounded, sat_unbounded_search
from .tiling import TilingSystem, is_valid_encoded_tiling, solve_bounded_tiling

EXIT_POSITIVE = 0
EXIT_NEGATIVE = 1
EXIT_ERROR = 2


class UsageError(Exception):
    pass


def _worker_cap() -> int:
    """Worker cap from TRSAT_THREADS; the current engine is sequential,
    which trivially respects any cap >= 1."""
    raw = os.environ.get("TRSAT_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise UsageError(f"TRSAT_THREADS must be an integer, got {raw!r}")
    if cap < 1:
        raise UsageError("TRSAT_THREADS must be at least 1")
    return cap


def _add_arith_flags(sub):
    sub.add_argument("--exact", action="store_true",
                     help="exact rational arithmetic (default)")
    sub.add_argument("--bits", type=int, help="fixed-width total bits")
    sub.add_argument("--frac", type=int, help="fixed-width fractional bits")
    sub.add_argument("--overflow", choices=["saturate", "wrap"],
                     default="saturate")
    sub.add_argument("--rounding", choices=["down", "up"], default="down")


def _resolve_ctx(args) -> ArithmeticContext:
    fixed = args.bits is not None or args.frac is not None
    if args.exact and fixed:
        raise UsageError("--exact conflicts with --bits/--frac")
    if not fixed:
        return ArithmeticContext()
    if args.bits is None or args.frac is None:
        raise UsageError("fixed-width mode needs both --bits and --frac")
    try:
        fmt = FixedWidthFormat(args.bits, args.frac, args.overflow,
                               args.rounding)
    except ValueError as e:
        raise UsageError(str(e))
    return ArithmeticContext(fmt)


def _parse_word(raw: str) -> list:
    word = [s for s in raw.split(",") if s != ""]
    if not word:
        raise UsageError("empty word")
    return word


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise UsageError(f"{path}: {e.strerror or e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}:{e.lineno}: invalid JSON: {e.msg}")


def _load_tiling(path: str) -> TilingSystem:
    try:
        return TilingSystem.from_json(_load_json(path))
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"{path}: invalid tiling system: {e}")


def _load_te(path: str) -> TransformerEncoder:
    obj = _load_json(path)
    if "te" in obj:  # compiled bundle with sidecar fields
        obj = obj["te"]
    try:
        return TransformerEncoder.from_json(obj)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"{path}: invalid encoder: {e}")


def _emit(obj: dict):
    json.dump(obj, sys.stdout)
    sys.stdout.write("\n")


def cmd_compile(args) -> int:
    system = _load_tiling(args.tiling)
    if args.bounded is not None:
        if args.bounded < 0:
            raise UsageError("--bounded takes a non-negative octant parameter")
        compiled = compile_bounded(system, args.bounded)
    else:
        compiled = compile_unbounded(system)
    bundle = {"te": compiled.te.to_json(), **compiled.sidecar_json()}
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(bundle, fh, indent=2)
            fh.write("\n")
    _emit(bundle)
    comp = compiled.te.complexity()
    print(f"compiled {compiled.variant} encoder: {comp.to_json()}",
          file=sys.stderr)
    return EXIT_POSITIVE


def cmd_eval(args) -> int:
    te = _load_te(args.te)
    ctx = _resolve_ctx(args)
    word = _parse_word(args.word)
    try:
        output, trace = evaluate(te, word, ctx)
    except ValueError as e:
        raise UsageError(str(e))
    if args.threshold is not None:
        accepted = output >= rat_from_str(args.threshold)
    else:
        accepted = output == 1
    result = {"output": rat_to_str(output), "accepts": accepted}
    if args.trace:
        result["trace"] = {
            "sequences": [[[rat_to_str(x) for x in vec] for vec in seq]
                          for seq in trace.sequences],
            "scores": [[[[rat_to_str(s) for s in row] for row in head]
                        for head in layer] for layer in trace.scores],
            "weights": [[[[rat_to_str(s) for s in row] for row in head]
                         for head in layer] for layer in trace.weights],
        }
    _emit(result)
    verdict = "ACCEPT" if accepted else "REJECT"
    print(f"{rat_to_str(output)} {verdict}", file=sys.stderr)
    return EXIT_POSITIVE if accepted else EXIT_NEGATIVE


def cmd_sat(args) -> int:
    te = _load_te(args.te)
    ctx = _resolve_ctx(args)
    _worker_cap()
    if args.unbounded:
        if ctx.is_exact:
            raise UsageError(
                "--unbounded requires a fixed-width arithmetic mode"
            )
        if args.budget is None:
            raise UsageError("--unbounded needs --budget")
        try:
            result = sat_unbounded_search(te, ctx, args.budget)
        except ValueError as e:
            raise UsageError(str(e))
    else:
        if args.max_len is None:
            raise UsageError("need --max-len (or --unbounded --budget)")
        if args.max_len < 1:
            raise UsageError("--max-len must be positive")
        result = sat_bounded(te, args.max_len, ctx)
    _emit(result.to_json())
    print(f"{result.outcome} after {result.words_checked} words",
          file=sys.stderr)
    return EXIT_POSITIVE if result.found else EXIT_NEGATIVE


def cmd_oracle(args) -> int:
    system = _load_tiling(args.tiling)
    if args.solve:
        if args.max_len is None or args.max_len < 1:
            raise UsageError("--solve needs a positive --max-len")
        witness = solve_bounded_tiling(system, args.max_len)
        _emit({"witness": witness})
        print("NONE" if witness is None else ",".join(witness),
              file=sys.stderr)
        return EXIT_NEGATIVE if witness is None else EXIT_POSITIVE
    if args.word is None:
        raise UsageError("need a word or --solve")
    word = _parse_word(args.word)
    valid = is_valid_encoded_tiling(system, word)
    _emit({"valid": valid})
    print("VALID" if valid else "INVALID", file=sys.stderr)
    return EXIT_POSITIVE if valid else EXIT_NEGATIVE


def cmd_reduce(args) -> int:
    te = _load_te(args.te)
    ctx = _resolve_ctx(args)
    word = _parse_word(args.word)
    try:
        shorter = reduce_witness(te, word, ctx, budget=args.budget)
    except ValueError as e:
        raise UsageError(str(e))
    _emit({"witness": shorter, "length": len(shorter)})
    print(f"{','.join(shorter)} (length {len(shorter)})", file=sys.stderr)
    return EXIT_POSITIVE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trsat",
        description="Transformer-encoder satisfiability workbench",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("compile", help="compile a tiling system to an encoder")
    p.add_argument("tiling", help="tiling system JSON file")
    p.add_argument("--bounded", type=int, default=None, metavar="N",
                   help="bounded variant pinning the final octant row to N")
    p.add_argument("-o", "--output", default=None, help="write the bundle here")
    p.set_defaults(func=cmd_compile)

    p = subs.add_parser("eval", help="evaluate an encoder on a word")
    p.add_argument("te", help="encoder JSON file")
    p.add_argument("word", help="comma-separated symbols")
    p.add_argument("--trace", action="store_true", help="include the trace")
    p.add_argument("--threshold", default=None, metavar="C",
                   help='accept when output >= C ("p/q") instead of = 1')
    _add_arith_flags(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("sat", help="search for an accepted word")
    p.add_argument("te", help="encoder JSON file")
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--unbounded", action="store_true")
    p.add_argument("--budget", type=int, default=None,
                   help="length budget for --unbounded")
    _add_arith_flags(p)
    p.set_defaults(func=cmd_sat)

    p = subs.add_parser("oracle", help="tiling validity / brute-force solving")
    p.add_argument("tiling", help="tiling system JSON file")
    p.add_argument("word", nargs="?", default=None,
                   help="comma-separated tiles to validate")
    p.add_argument("--solve", action="store_true")
    p.add_argument("--max-len", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    p = subs.add_parser("reduce", help="shorten an accepted witness")
    p.add_argument("te", help="encoder JSON file")
    p.add_argument("word", help="comma-separated symbols (must be accepted)")
    p.add_argument("--budget", type=int, default=100)
    _add_arith_flags(p)
    p.set_defaults(func=cmd_reduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except EvaluationError as e:
        print(f"evaluation error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

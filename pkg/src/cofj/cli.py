"""Command-line front end.

    cofj run FILE [-e EXPR] [--engine op|fj|intermediate] [--fuel N] [--trace]
                  [--check-soundness] [--budget N]
    cofj check FILE [-e EXPR] [--fuel N] [--budget N]

Exit codes: 0 success, 1 parse or validation error, 2 runtime error,
3 fuel exhaustion; for soundness checking additionally 4 refuted and
5 inconclusive.  The environment variable COFJ_FUEL overrides the default
fuel.  Evaluation runs on a large-stack thread so deep recursion surfaces
as fuel exhaustion rather than a crash.
"""

from __future__ import annotations

import argparse
import os
import sys
import threading

from .capsules import render_capsule
from .classtable import ClassTable, validate_main
from .corpus import corpus_dir
from .errors import (
    CofjRuntimeError,
    FuelExhausted,
    InconclusiveSearch,
    ParseError,
    ValidationError,
)
from .fj import eval_fj
from .intsem import OracleBudget, check_sound, derive_int
from .opsem import DEFAULT_FUEL, MUTATION_DROP_COREC_ENV, MUTATION_SKIP_CHECK, OpEvaluator
from .parser import parse_expr, parse_program
from .syntax import render_value

_FAULTS = {
    "corec-env": MUTATION_DROP_COREC_ENV,
    "skip-check": MUTATION_SKIP_CHECK,
}


def _default_fuel() -> int:
    value = os.environ.get("COFJ_FUEL")
    return int(value) if value else DEFAULT_FUEL


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cofj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="program file (.cofj); 'corpus/NAME' resolves to the bundled corpus")
        p.add_argument("-e", "--expr", help="expression to evaluate instead of the file's main")
        p.add_argument("--fuel", type=int, default=None, help="rule-application bound")
        p.add_argument("--budget", type=int, default=100_000, help="oracle node budget")
        p.add_argument(
            "--inject-fault",
            choices=sorted(_FAULTS),
            default=None,
            help=argparse.SUPPRESS,
        )

    run_p = sub.add_parser("run", help="evaluate and print the result")
    common(run_p)
    run_p.add_argument("--engine", choices=("op", "fj", "intermediate"), default="op")
    run_p.add_argument("--trace", action="store_true", help="log rule firings to stderr")
    run_p.add_argument(
        "--check-soundness",
        action="store_true",
        help="confirm the result against the bounded derivation oracle",
    )

    check_p = sub.add_parser("check", help="run, then confirm against the oracle")
    common(check_p)
    return parser


def _load(args):
    path = args.file
    if path.startswith("corpus/"):
        text = (corpus_dir() / path[len("corpus/"):]).read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    program = parse_program(text)
    table = ClassTable.build(program.classes)
    if args.expr is not None:
        expr = parse_expr(args.expr)
    elif program.main is not None:
        expr = program.main
    else:
        raise ValidationError("no main expression in file and no -e given")
    validate_main(table, expr)
    return table, expr


def _mutations(args):
    return (_FAULTS[args.inject_fault],) if args.inject_fault else ()


def _cmd_run(args) -> int:
    try:
        table, expr = _load(args)
    except (OSError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    fuel = args.fuel if args.fuel is not None else _default_fuel()
    if args.engine == "fj":
        try:
            print(render_value(eval_fj(table, expr, fuel=fuel)))
        except FuelExhausted as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        except CofjRuntimeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    if args.engine == "intermediate":
        result = derive_int(table, expr, budget=OracleBudget(nodes=args.budget))
        for value, calls in sorted(
            result.pairs, key=lambda p: render_capsule(p[0])
        ):
            suffix = "" if not calls else f"  (undischarged calls: {len(calls)})"
            print(render_capsule(value) + suffix)
        if result.pairs:
            return 0
        print("no derivable result", file=sys.stderr)
        return 2 if result.complete else 3
    evaluator = OpEvaluator(
        table,
        fuel=fuel,
        trace=args.trace,
        mutations=_mutations(args),
        record_calls=args.check_soundness,
    )
    try:
        capsule = evaluator.eval_main(expr)
    except FuelExhausted as exc:
        _dump_trace(evaluator)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CofjRuntimeError as exc:
        _dump_trace(evaluator)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _dump_trace(evaluator)
    print(render_capsule(capsule))
    if args.check_soundness:
        return _confirm(table, expr, capsule, evaluator, args.budget)
    return 0


def _dump_trace(evaluator):
    if evaluator.trace_log:
        for line in evaluator.trace_log:
            print(line, file=sys.stderr)


def _confirm(table, expr, capsule, evaluator, budget_nodes) -> int:
    candidates = [cap for _, cap in evaluator.call_log or ()]
    try:
        confirmed = check_sound(
            table, expr, capsule, budget=OracleBudget(nodes=budget_nodes), candidates=candidates
        )
    except InconclusiveSearch as exc:
        print(f"soundness: inconclusive ({exc})", file=sys.stderr)
        return 5
    if confirmed:
        print("soundness: confirmed", file=sys.stderr)
        return 0
    print("soundness: refuted (result not derivable by the oracle)", file=sys.stderr)
    return 4


def _cmd_check(args) -> int:
    try:
        table, expr = _load(args)
    except (OSError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    fuel = args.fuel if args.fuel is not None else _default_fuel()
    evaluator = OpEvaluator(table, fuel=fuel, mutations=_mutations(args), record_calls=True)
    try:
        capsule = evaluator.eval_main(expr)
    except (FuelExhausted, CofjRuntimeError) as exc:
        print(f"evaluation failed ({exc}); nothing to confirm", file=sys.stderr)
        return 0
    print(render_capsule(capsule))
    return _confirm(table, expr, capsule, evaluator, args.budget)


def _dispatch(argv) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_check(args)


def main(argv=None) -> int:
    """Entry point; evaluation happens on a thread with a large stack."""
    outcome = {}

    def runner():
        sys.setrecursionlimit(max(sys.getrecursionlimit(), 1_000_000))
        try:
            outcome["code"] = _dispatch(argv)
        except SystemExit as exc:  # argparse errors
            outcome["code"] = exc.code if isinstance(exc.code, int) else 1

    threading.stack_size(512 * 1024 * 1024)
    thread = threading.Thread(target=runner)
    thread.start()
    thread.join()
    return outcome.get("code", 1)


if __name__ == "__main__":
    raise SystemExit(main())

"""Fixture programs with expected outcomes, used as golden tests.

The manifest is a plain-text index of blocks separated by blank lines:

    file: lists.cofj
    name: two-one
    expr: new ListFactory().two_one()
    expect: capsule x0 where x0 = new NonEmptyList(2, new NonEmptyList(1, x0))

Keys: `file`, `name`, `expr`, optional `engine` (op, the default, or fj),
optional `fuel`, and `expect`, whose first word is the outcome kind:

    capsule <canonical capsule text>     operational result
    value <ground value text>            baseline-engine result
    error <error class name>             runtime error of that kind
    fuel                                 fuel exhaustion
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .classtable import ClassTable, validate_main
from .errors import CofjError, CofjRuntimeError, FuelExhausted
from .capsules import render_capsule
from .fj import eval_fj
from .opsem import DEFAULT_FUEL, OpEvaluator
from .parser import parse_capsule, parse_expr, parse_program
from .syntax import render_value


@dataclass(frozen=True)
class Fixture:
    file: str
    name: str
    expr_text: str
    engine: str
    expect_kind: str
    expect: Optional[str]
    fuel: Optional[int]


def corpus_dir():
    return resources.files("cofj") / "corpus"


def corpus_file_names():
    return sorted(
        entry.name for entry in corpus_dir().iterdir() if entry.name.endswith(".cofj")
    )


def load_program(filename: str):
    """Parse and validate one corpus file; returns (table, main expression)."""
    text = (corpus_dir() / filename).read_text(encoding="utf-8")
    program = parse_program(text)
    table = ClassTable.build(program.classes)
    if program.main is not None:
        validate_main(table, program.main)
    return table, program.main


def _parse_manifest(text: str):
    blocks, cur = [], {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            if cur:
                blocks.append(cur)
                cur = {}
            continue
        if line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise CofjError(f"malformed manifest line: {raw!r}")
        cur[key.strip()] = value.strip()
    if cur:
        blocks.append(cur)
    return blocks


def load_corpus():
    """All fixtures, fully validated: the sources parse and build, the entry
    expressions parse, and every expected capsule reparses as a capsule."""
    manifest = (corpus_dir() / "manifest.txt").read_text(encoding="utf-8")
    tables = {}
    fixtures = []
    for block in _parse_manifest(manifest):
        kind, _, payload = block["expect"].partition(" ")
        fixture = Fixture(
            file=block["file"],
            name=block["name"],
            expr_text=block["expr"],
            engine=block.get("engine", "op"),
            expect_kind=kind,
            expect=payload.strip() or None,
            fuel=int(block["fuel"]) if "fuel" in block else None,
        )
        if fixture.file not in tables:
            tables[fixture.file] = load_program(fixture.file)
        table, _ = tables[fixture.file]
        expr = parse_expr(fixture.expr_text)
        validate_main(table, expr)
        if fixture.expect_kind == "capsule":
            parse_capsule(fixture.expect)
        elif fixture.expect_kind == "value":
            parse_expr(fixture.expect)
        elif fixture.expect_kind not in ("error", "fuel"):
            raise CofjError(f"unknown expectation {fixture.expect_kind!r} in {fixture.name}")
        fixtures.append(fixture)
    return fixtures


def evaluate_fixture(table: ClassTable, fixture: Fixture):
    """Run a fixture on its engine; returns (kind, payload) mirroring the
    manifest's expectation format."""
    expr = parse_expr(fixture.expr_text)
    fuel = fixture.fuel or DEFAULT_FUEL
    try:
        if fixture.engine == "fj":
            return "value", render_value(eval_fj(table, expr, fuel=fuel))
        capsule = OpEvaluator(table, fuel=fuel).eval_main(expr)
        return "capsule", render_capsule(capsule)
    except FuelExhausted:
        return "fuel", None
    except CofjRuntimeError as exc:
        return "error", type(exc).__name__

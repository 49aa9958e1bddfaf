"""Baseline inductive evaluator: finite objects, ordinary recursion.

Used as the reference side of conservativity testing.  Codefinitions are
ignored entirely; divergence surfaces as FuelExhausted.
"""

from __future__ import annotations

import sys

from .classtable import ClassTable
from .errors import (
    CofjRuntimeError,
    DivisionByZero,
    FieldNotFound,
    FuelExhausted,
    PrimitiveMisuse,
)
from .syntax import (
    Any,
    BinOp,
    BoolVal,
    Call,
    FieldAccess,
    FjValue,
    If,
    IntVal,
    New,
    Obj,
    Var,
    free_vars,
    substitute,
)

DEFAULT_FUEL = 1_000_000


def _java_div(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero("integer division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _java_mod(a: int, b: int) -> int:
    return a - _java_div(a, b) * b


def apply_binop(op: str, a, b):
    """Primitive operator semantics shared by all evaluators.

    Arithmetic and comparisons are integer-only; `/` and `%` truncate toward
    zero and reject zero divisors.
    """
    if not isinstance(a, IntVal) or not isinstance(b, IntVal):
        raise PrimitiveMisuse(f"operator {op} needs integer operands")
    x, y = a.value, b.value
    if op == "+":
        return IntVal(x + y)
    if op == "-":
        return IntVal(x - y)
    if op == "*":
        return IntVal(x * y)
    if op == "/":
        return IntVal(_java_div(x, y))
    if op == "%":
        return IntVal(_java_mod(x, y))
    if op == "min":
        return IntVal(min(x, y))
    if op == "==":
        return BoolVal(x == y)
    if op == "!=":
        return BoolVal(x != y)
    if op == "<":
        return BoolVal(x < y)
    if op == "<=":
        return BoolVal(x <= y)
    if op == ">":
        return BoolVal(x > y)
    if op == ">=":
        return BoolVal(x >= y)
    raise PrimitiveMisuse(f"unknown operator {op}")


class _FjRun:
    def __init__(self, table: ClassTable, fuel: int, monitor: bool):
        self.table = table
        self.fuel = fuel
        self.initial_fuel = fuel
        self.monitor = monitor
        self.stack = {}
        self.repeat_seen = False

    def eval(self, e) -> FjValue:
        if self.fuel <= 0:
            raise FuelExhausted(self.initial_fuel)
        self.fuel -= 1
        if isinstance(e, (IntVal, BoolVal)):
            return e
        if isinstance(e, Var):
            raise CofjRuntimeError(f"unbound variable {e.name}")
        if isinstance(e, Any):
            raise CofjRuntimeError("`any` reached outside a codefinition")
        if isinstance(e, New):
            return Obj(e.cls, tuple(self.eval(a) for a in e.args))
        if isinstance(e, FieldAccess):
            v = self.eval(e.target)
            return project_field(self.table, v, e.field)
        if isinstance(e, BinOp):
            return apply_binop(e.op, self.eval(e.lhs), self.eval(e.rhs))
        if isinstance(e, If):
            cond = self.eval(e.cond)
            if not isinstance(cond, BoolVal):
                raise PrimitiveMisuse("condition is not a boolean")
            return self.eval(e.then if cond.value else e.orelse)
        if isinstance(e, Call):
            receiver = self.eval(e.target)
            if not isinstance(receiver, Obj):
                raise PrimitiveMisuse(f"method {e.method} called on a primitive")
            args = tuple(self.eval(a) for a in e.args)
            info = self.table.mbody(receiver.cls, e.method)
            if len(info.params) != len(args):
                raise CofjRuntimeError(
                    f"{receiver.cls}.{e.method} expects {len(info.params)} arguments"
                )
            bindings = {"this": receiver}
            bindings.update(zip(info.params, args))
            body = substitute(info.body, bindings)
            if self.monitor:
                count = self.stack.get(body, 0)
                if count:
                    self.repeat_seen = True
                self.stack[body] = count + 1
                try:
                    return self.eval(body)
                finally:
                    self.stack[body] -= 1
            return self.eval(body)
        raise TypeError(f"not an expression: {e!r}")


def eval_fj(table: ClassTable, e, fuel: int = DEFAULT_FUEL, monitor: bool = False) -> FjValue:
    """The unique value with a finite derivation, or an error.

    With `monitor` set, the run tracks the call stack and asserts on success
    that no substituted body re-occurred among its own ancestors (a repeat
    implies divergence, so a successful run must be repeat-free).
    """
    assert not free_vars(e), "top-level expression must be closed"
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 60_000))
    run = _FjRun(table, fuel, monitor)
    value = run.eval(e)
    if monitor:
        assert not run.repeat_seen, "successful run re-evaluated an expression on its own stack"
    return value


def project_field(table: ClassTable, v, field: str):
    if isinstance(v, Var):
        raise CofjRuntimeError(f"field {field} on unbound variable {v.name}")
    if not isinstance(v, Obj):
        raise PrimitiveMisuse(f"field {field} on a primitive")
    names = table.fields(v.cls)
    if field not in names:
        raise FieldNotFound(f"{v.cls} has no field {field}")
    i = names.index(field)
    if i >= len(v.fields):
        raise FieldNotFound(f"{v.cls} instance built with too few arguments for {field}")
    return v.fields[i]

"""Syntactic and semantic domain types shared by every evaluator.

Expressions and open values overlap: a variable or a primitive literal is
both, and an object ``Obj`` is the value form of a ``New`` whose arguments
are themselves values.  ``as_open``/``as_expr`` convert between the two
views.  Everything here is immutable and hashable, so terms can be shared
freely and used as memoisation keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union


# ---------------------------------------------------------------------------
# Terms: leaves shared between expressions and open values


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class IntVal:
    value: int


@dataclass(frozen=True)
class BoolVal:
    value: bool


@dataclass(frozen=True)
class Obj:
    """An object whose fields are open values; cyclicity lives in the environment."""

    cls: str
    fields: tuple


OpenValue = Union[Var, IntVal, BoolVal, Obj]

# A fully ground open value (no variables); what the baseline evaluator produces.
FjValue = OpenValue


@dataclass(frozen=True)
class FieldAccess:
    target: "Expr"
    field: str


@dataclass(frozen=True)
class New:
    cls: str
    args: tuple


@dataclass(frozen=True)
class Call:
    target: "Expr"
    method: str
    args: tuple


# Comparison and arithmetic operators, plus `min` for Math.min.
BINOPS = ("+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "min")


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class Any:
    """Placeholder usable only inside codefinitions."""


ANY = Any()

Expr = Union[Var, IntVal, BoolVal, New, FieldAccess, Call, BinOp, If, Any]


def as_expr(u: OpenValue) -> Expr:
    """View an open value as the expression denoting it."""
    if isinstance(u, Obj):
        return New(u.cls, tuple(as_expr(f) for f in u.fields))
    return u


def as_open(e: Expr) -> Optional[OpenValue]:
    """The open value an expression already is, or None."""
    if isinstance(e, (Var, IntVal, BoolVal)):
        return e
    if isinstance(e, New):
        fields = []
        for a in e.args:
            u = as_open(a)
            if u is None:
                return None
            fields.append(u)
        return Obj(e.cls, tuple(fields))
    return None


def subterms(e) -> Iterator:
    """All subterms of an expression or open value, preorder, including itself."""
    yield e
    if isinstance(e, Obj):
        for f in e.fields:
            yield from subterms(f)
    elif isinstance(e, New):
        for a in e.args:
            yield from subterms(a)
    elif isinstance(e, FieldAccess):
        yield from subterms(e.target)
    elif isinstance(e, Call):
        yield from subterms(e.target)
        for a in e.args:
            yield from subterms(a)
    elif isinstance(e, BinOp):
        yield from subterms(e.lhs)
        yield from subterms(e.rhs)
    elif isinstance(e, If):
        yield from subterms(e.cond)
        yield from subterms(e.then)
        yield from subterms(e.orelse)


def free_vars(e) -> frozenset:
    """Free variables of an expression or open value; `this` counts, `any` does not."""
    return frozenset(t.name for t in subterms(e) if isinstance(t, Var))


def substitute(e: Expr, bindings: Mapping[str, OpenValue]) -> Expr:
    """Capture-free simultaneous substitution; unbound variables are left alone.

    The placeholder `any` is replaced when the map carries an "any" key.
    Capture cannot arise: expressions have no binders.
    """
    if not bindings:
        return e
    if isinstance(e, Var):
        u = bindings.get(e.name)
        return e if u is None else as_expr(u)
    if isinstance(e, Any):
        u = bindings.get("any")
        return e if u is None else as_expr(u)
    if isinstance(e, (IntVal, BoolVal)):
        return e
    if isinstance(e, New):
        return New(e.cls, tuple(substitute(a, bindings) for a in e.args))
    if isinstance(e, FieldAccess):
        return FieldAccess(substitute(e.target, bindings), e.field)
    if isinstance(e, Call):
        return Call(
            substitute(e.target, bindings),
            e.method,
            tuple(substitute(a, bindings) for a in e.args),
        )
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.lhs, bindings), substitute(e.rhs, bindings))
    if isinstance(e, If):
        return If(
            substitute(e.cond, bindings),
            substitute(e.then, bindings),
            substitute(e.orelse, bindings),
        )
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Environments and capsules


class Environment:
    """Finite ordered map from variable names to open values.

    Closure invariant: every variable free in a bound value is itself bound.
    Instances are never mutated; `bind` and unions build new maps.
    `_undet` caches the undetermined-variable partition computed on demand.
    """

    __slots__ = ("_map", "_undet")

    def __init__(self, bindings=()):
        self._map = dict(bindings)
        self._undet = None

    def lookup(self, name: str) -> Optional[OpenValue]:
        return self._map.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def bind(self, name: str, value: OpenValue) -> "Environment":
        out = Environment()
        out._map = dict(self._map)
        out._map[name] = value
        return out

    def domain(self):
        return self._map.keys()

    def items(self):
        return self._map.items()

    def restrict(self, names) -> "Environment":
        out = Environment()
        out._map = {x: u for x, u in self._map.items() if x in names}
        return out

    def is_closed(self) -> bool:
        return all(free_vars(u) <= self._map.keys() for u in self._map.values())

    def __len__(self):
        return len(self._map)

    def __eq__(self, other):
        return isinstance(other, Environment) and self._map == other._map

    def __hash__(self):
        return hash(frozenset(self._map.items()))

    def __repr__(self):
        inner = ", ".join(f"{x}: {u}" for x, u in self._map.items())
        return "{" + inner + "}"


EMPTY_ENV = Environment()


def env_from(mapping) -> Environment:
    return Environment(mapping.items() if isinstance(mapping, dict) else mapping)


@dataclass(frozen=True)
class Capsule:
    """An open value paired with an environment binding all its free variables."""

    open: OpenValue
    env: Environment

    def __post_init__(self):
        assert free_vars(self.open) <= set(self.env.domain()), (
            f"capsule not closed: {free_vars(self.open)} vs {set(self.env.domain())}"
        )
        assert self.env.is_closed(), "environment violates its closure invariant"


def capsule_unchecked(open_value: OpenValue, env: Environment) -> Capsule:
    """Build a Capsule without the closure assertions.

    Only fault-injection paths use this: a mutated evaluator may legitimately
    produce a broken capsule, and the soundness oracle must still see it.
    """
    c = object.__new__(Capsule)
    object.__setattr__(c, "open", open_value)
    object.__setattr__(c, "env", env)
    return c


# ---------------------------------------------------------------------------
# Calls and call traces


@dataclass(frozen=True)
class TracedCall:
    """A pending method call `receiver.m(args)` over open values."""

    receiver: OpenValue
    method: str
    args: tuple

    def wrapper(self) -> Obj:
        # Synthetic object used to compare whole calls by capsule equivalence;
        # the class name carries the method so names must match too.
        return Obj("$call:" + self.method, (self.receiver,) + self.args)


@dataclass(frozen=True)
class TraceEntry:
    call: TracedCall
    var: str
    checking: bool = False


class CallTrace:
    """Injective map from encountered calls to variables, most recent last."""

    __slots__ = ("entries",)

    def __init__(self, entries=()):
        self.entries = tuple(entries)

    def extend(self, call: TracedCall, var: str, checking: bool = False) -> "CallTrace":
        assert all(e.var != var for e in self.entries), f"duplicate trace variable {var}"
        return CallTrace(self.entries + (TraceEntry(call, var, checking),))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


EMPTY_TRACE = CallTrace()


# ---------------------------------------------------------------------------
# Rendering

_PREC = {
    "==": 1, "!=": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
    "+": 2, "-": 2,
    "*": 3, "/": 3, "%": 3,
}


def render_expr(e: Expr, rename: Optional[Mapping[str, str]] = None, ctx: int = 0) -> str:
    """Concrete syntax for an expression; reparsing yields the same tree.

    `rename` optionally remaps variable names (used by capsule printing).
    `ctx` is the minimum precedence the surrounding context requires.
    """

    def wrap(text, prec):
        return f"({text})" if prec < ctx else text

    if isinstance(e, Var):
        return rename[e.name] if rename and e.name in rename else e.name
    if isinstance(e, IntVal):
        return str(e.value) if e.value >= 0 else wrap(str(e.value), 2)
    if isinstance(e, BoolVal):
        return "true" if e.value else "false"
    if isinstance(e, Any):
        return "any"
    if isinstance(e, New):
        args = ", ".join(render_expr(a, rename, 0) for a in e.args)
        return f"new {e.cls}({args})"
    if isinstance(e, FieldAccess):
        return f"{render_expr(e.target, rename, 4)}.{e.field}"
    if isinstance(e, Call):
        args = ", ".join(render_expr(a, rename, 0) for a in e.args)
        return f"{render_expr(e.target, rename, 4)}.{e.method}({args})"
    if isinstance(e, BinOp):
        if e.op == "min":
            return f"Math.min({render_expr(e.lhs, rename, 0)}, {render_expr(e.rhs, rename, 0)})"
        p = _PREC[e.op]
        text = f"{render_expr(e.lhs, rename, p)} {e.op} {render_expr(e.rhs, rename, p + 1)}"
        return wrap(text, p)
    if isinstance(e, If):
        text = (
            f"if ({render_expr(e.cond, rename, 0)}) "
            f"{render_expr(e.then, rename, 1)} else {render_expr(e.orelse, rename, 0)}"
        )
        return wrap(text, 0 if ctx == 0 else -1) if ctx == 0 else f"({text})"
    raise TypeError(f"not an expression: {e!r}")


def render_value(u: OpenValue, rename: Optional[Mapping[str, str]] = None) -> str:
    return render_expr(as_expr(u), rename)

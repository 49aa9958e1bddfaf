"""Class tables: declaration validation plus the lookup helpers the
evaluators use (field lists, method bodies, codefinition bodies)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import MethodNotFound, NoCodefinition, UnknownClass, ValidationError
from .syntax import Any, Call, Expr, free_vars, subterms

OBJECT = "Object"


@dataclass(frozen=True)
class FieldDecl:
    type: str
    name: str


@dataclass(frozen=True)
class MethodDecl:
    ret_type: str
    name: str
    params: tuple  # of (type, name)
    body: Expr
    cobody: Optional[Expr] = None


@dataclass(frozen=True)
class ClassDecl:
    name: str
    superclass: str
    fields: tuple
    methods: tuple


@dataclass(frozen=True)
class MethodInfo:
    """Resolved method: parameter names plus body and optional codefinition."""

    params: tuple
    body: Expr
    cobody: Optional[Expr]


def _called_methods(e: Expr) -> set:
    return {t.method for t in subterms(e) if isinstance(t, Call)}


class ClassTable:
    """Validated class declarations.  Immutable after `build`."""

    def __init__(self, by_name):
        self._by_name = by_name

    @staticmethod
    def build(classes) -> "ClassTable":
        by_name = {}
        for c in classes:
            if c.name == OBJECT:
                raise ValidationError("class Object cannot be redeclared")
            if c.name in by_name:
                raise ValidationError(f"duplicate class {c.name}")
            by_name[c.name] = c
        table = ClassTable(by_name)
        for c in classes:
            if c.superclass != OBJECT and c.superclass not in by_name:
                raise ValidationError(f"{c.name} extends unknown class {c.superclass}")
        table._check_acyclic()
        for c in classes:
            table._check_fields(c)
            table._check_methods(c)
        table._check_codef_recursion()
        return table

    # -- validation --------------------------------------------------------

    def _ancestors(self, name):
        seen = []
        while name != OBJECT:
            seen.append(name)
            name = self._by_name[name].superclass
        return seen

    def _check_acyclic(self):
        for start in self._by_name:
            seen = set()
            cur = start
            while cur != OBJECT:
                if cur in seen:
                    raise ValidationError(f"cyclic inheritance through {cur}")
                seen.add(cur)
                cur = self._by_name[cur].superclass

    def _check_fields(self, c):
        own = [f.name for f in c.fields]
        if len(own) != len(set(own)):
            raise ValidationError(f"duplicate field in {c.name}")
        inherited = set()
        cur = c.superclass
        while cur != OBJECT:
            inherited.update(f.name for f in self._by_name[cur].fields)
            cur = self._by_name[cur].superclass
        hidden = inherited & set(own)
        if hidden:
            raise ValidationError(f"{c.name} hides inherited field {sorted(hidden)[0]}")

    def _check_methods(self, c):
        names = [m.name for m in c.methods]
        if len(names) != len(set(names)):
            raise ValidationError(f"method overloading in {c.name}")
        for m in c.methods:
            pnames = [p for _, p in m.params]
            if len(pnames) != len(set(pnames)):
                raise ValidationError(f"duplicate parameter in {c.name}.{m.name}")
            if "this" in pnames or "any" in pnames:
                raise ValidationError(f"reserved parameter name in {c.name}.{m.name}")
            allowed = set(pnames) | {"this"}
            if not free_vars(m.body) <= allowed:
                stray = sorted(free_vars(m.body) - allowed)[0]
                raise ValidationError(f"unknown variable {stray} in body of {c.name}.{m.name}")
            if any(isinstance(t, Any) for t in subterms(m.body)):
                raise ValidationError(
                    f"`any` outside a codefinition, in body of {c.name}.{m.name}"
                )
            if m.cobody is not None and not free_vars(m.cobody) <= allowed:
                stray = sorted(free_vars(m.cobody) - allowed)[0]
                raise ValidationError(
                    f"unknown variable {stray} in codefinition of {c.name}.{m.name}"
                )
            # Overrides keep the arity; method names have a single signature.
            cur = c.superclass
            while cur != OBJECT:
                for other in self._by_name[cur].methods:
                    if other.name == m.name and len(other.params) != len(m.params):
                        raise ValidationError(
                            f"{c.name}.{m.name} overrides with a different arity"
                        )
                cur = self._by_name[cur].superclass

    def _check_codef_recursion(self):
        # Static over-approximation by method name: a codefinition must not
        # reach its own method through any declared body or codefinition.
        succ = {}
        for c in self._by_name.values():
            for m in c.methods:
                callees = _called_methods(m.body)
                if m.cobody is not None:
                    callees |= _called_methods(m.cobody)
                succ.setdefault(m.name, set()).update(callees)
        for c in self._by_name.values():
            for m in c.methods:
                if m.cobody is None:
                    continue
                reachable = set()
                work = sorted(_called_methods(m.cobody))
                while work:
                    name = work.pop()
                    if name in reachable:
                        continue
                    reachable.add(name)
                    work.extend(sorted(succ.get(name, ())))
                if m.name in reachable:
                    raise ValidationError(
                        f"codefinition of {c.name}.{m.name} can call {m.name} back"
                    )

    # -- lookups -----------------------------------------------------------

    def has_class(self, name: str) -> bool:
        return name == OBJECT or name in self._by_name

    def class_names(self):
        return tuple(self._by_name)

    def fields(self, name: str) -> tuple:
        """Field names of `name`, declaration order, inherited first."""
        if name == OBJECT:
            return ()
        if name not in self._by_name:
            raise UnknownClass(f"unknown class {name}")
        c = self._by_name[name]
        return self.fields(c.superclass) + tuple(f.name for f in c.fields)

    def _resolve(self, cls: str, method: str):
        cur = cls
        while cur != OBJECT:
            if cur not in self._by_name:
                raise UnknownClass(f"unknown class {cur}")
            for m in self._by_name[cur].methods:
                if m.name == method:
                    return m
            cur = self._by_name[cur].superclass
        raise MethodNotFound(f"no method {method} on {cls}")

    def mbody(self, cls: str, method: str) -> MethodInfo:
        m = self._resolve(cls, method)
        return MethodInfo(tuple(p for _, p in m.params), m.body, m.cobody)

    def combody(self, cls: str, method: str) -> MethodInfo:
        """Codefinition of the nearest declaration; NoCodefinition when the
        method exists but no codefinition was specified."""
        m = self._resolve(cls, method)
        if m.cobody is None:
            raise NoCodefinition(f"{cls}.{method} has no codefinition")
        return MethodInfo(tuple(p for _, p in m.params), m.body, m.cobody)


def validate_main(table: ClassTable, expr: Expr) -> None:
    """A top-level expression must be closed and must not mention `any`."""
    if free_vars(expr):
        stray = sorted(free_vars(expr))[0]
        raise ValidationError(f"unbound variable {stray} in top-level expression")
    if any(isinstance(t, Any) for t in subterms(expr)):
        raise ValidationError("`any` outside a codefinition, in top-level expression")

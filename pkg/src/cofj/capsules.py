"""Algebra of capsules: unfolding, environment union, undetermined variables,
equivalence up to strict renamings, trace lookup, tree expansion, reachability
garbage collection, and canonical printing.

Capsule equivalence is rational-tree bisimulation.  Two capsules are
equivalent when a simultaneous traversal, following environment indirections,
matches constructors and primitives exactly, and pairs undetermined variables
in a way that lifts to a *strict* partial bijection between the quotients of
the two undetermined sets.  Strictness pins variables the environments share:
a shared undetermined variable may only be matched with itself (up to
same-cycle companions), which keeps independently instantiable variables
apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import UnionConflict
from .syntax import (
    BoolVal,
    Capsule,
    CallTrace,
    Environment,
    IntVal,
    New,
    Obj,
    OpenValue,
    TracedCall,
    Var,
    as_expr,
    as_open,
    capsule_unchecked,
    free_vars,
    render_expr,
    subterms,
)


def unfold(u: OpenValue, env: Environment) -> Optional[OpenValue]:
    """First non-variable reached by following the environment.

    Returns None (undefined) when following variables cycles, or when a
    variable is unbound; terminates via the visited set.
    """
    seen = set()
    while isinstance(u, Var):
        if u.name in seen:
            return None
        seen.add(u.name)
        nxt = env.lookup(u.name)
        if nxt is None:
            return None
        u = nxt
    return u


def env_union(a: Environment, b: Environment) -> Environment:
    """Union of environments agreeing on the shared domain (syntactically)."""
    for x, u in b.items():
        old = a.lookup(x)
        if old is not None and old != u:
            raise UnionConflict(f"environments disagree on {x}: {old} vs {u}")
    merged = dict(a.items())
    merged.update(b.items())
    out = Environment()
    out._map = merged
    return out


class UndeterminedSet:
    """Variables with undefined unfolding, partitioned into indirection classes."""

    def __init__(self, env: Environment):
        und = [x for x in env.domain() if unfold(Var(x), env) is None]
        self.vars = frozenset(und)
        # Least equivalence with x ~ y whenever env(x) = y; union-find.
        parent = {x: x for x in und}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for x in und:
            u = env.lookup(x)
            if isinstance(u, Var) and u.name in parent:
                parent[find(x)] = find(u.name)
        groups = {}
        for x in und:
            groups.setdefault(find(x), []).append(x)
        self.classes = tuple(frozenset(g) for _, g in sorted(groups.items()))
        self._class_of = {x: cls for cls in self.classes for x in cls}

    def class_of(self, x: str) -> frozenset:
        # Unbound variables (possible only on fault-injected runs) act as
        # their own singleton class.
        return self._class_of.get(x, frozenset((x,)))

    def same_class(self, x: str, y: str) -> bool:
        return self.class_of(x) == self.class_of(y)


def undetermined(env: Environment) -> UndeterminedSet:
    if env._undet is None:
        env._undet = UndeterminedSet(env)
    return env._undet


@dataclass(frozen=True)
class Renaming:
    """Witness of capsule equivalence: a strict partial bijection between
    undetermined-variable classes, plus the variable pairs the traversal hit."""

    var_pairs: frozenset
    class_pairs: frozenset
    left: UndeterminedSet
    right: UndeterminedSet

    def relates(self, x: str, y: str) -> bool:
        return (self.left.class_of(x), self.right.class_of(y)) in self.class_pairs


def _bisim_var_pairs(o1, env1, o2, env2):
    """Product traversal; returns the set of variable pairs met at
    undetermined leaves, or None if the structures differ."""
    seen = set()
    stack = [(o1, o2)]
    pairs = set()
    while stack:
        a, b = stack.pop()
        if (a, b) in seen:
            continue
        seen.add((a, b))
        ua = unfold(a, env1)
        ub = unfold(b, env2)
        if ua is None or ub is None:
            if ua is not None or ub is not None:
                return None
            pairs.add((a.name, b.name))
            continue
        if isinstance(ua, Obj):
            if (
                not isinstance(ub, Obj)
                or ua.cls != ub.cls
                or len(ua.fields) != len(ub.fields)
            ):
                return None
            stack.extend(zip(ua.fields, ub.fields))
        elif type(ua) is not type(ub) or ua.value != ub.value:
            return None
    return pairs


def equivalent_parts(o1, env1, o2, env2) -> Optional[Renaming]:
    """Equivalence on raw (open value, environment) pairs; see `equivalent`."""
    if o1 == o2 and env1 == env2:
        # Reflexivity: the identity over undetermined classes is strict.
        und = undetermined(env1)
        return Renaming(frozenset(), frozenset((c, c) for c in und.classes), und, und)
    pairs = _bisim_var_pairs(o1, env1, o2, env2)
    if pairs is None:
        return None
    und1 = undetermined(env1)
    und2 = undetermined(env2)
    class_pairs = {(und1.class_of(x), und2.class_of(y)) for x, y in pairs}
    # Strictness over the shared undetermined variables: class pairs demanded
    # by the definition are added, and pairs it forbids must not occur.
    shared = und1.vars & und2.vars
    forbidden = set()
    for x in shared:
        for y in shared:
            cp = (und1.class_of(x), und2.class_of(y))
            if und1.same_class(x, y) and und2.same_class(x, y):
                class_pairs.add(cp)
            else:
                forbidden.add(cp)
    if class_pairs & forbidden:
        return None
    # Partial bijection between the two quotients.
    fwd, bwd = {}, {}
    for l, r in class_pairs:
        if fwd.setdefault(l, r) != r or bwd.setdefault(r, l) != l:
            return None
    return Renaming(frozenset(pairs), frozenset(class_pairs), und1, und2)


def equivalent(c1: Capsule, c2: Capsule) -> Optional[Renaming]:
    """Some(renaming) iff the capsules denote the same regular values."""
    return equivalent_parts(c1.open, c1.env, c2.open, c2.env)


def calls_equivalent(c1: TracedCall, env1: Environment, c2: TracedCall, env2: Environment) -> bool:
    """Equivalence extended by congruence to calls: one strict renaming must
    cover receiver and all arguments at once."""
    if c1.method != c2.method or len(c1.args) != len(c2.args):
        return False
    return equivalent_parts(c1.wrapper(), env1, c2.wrapper(), env2) is not None


def trace_lookup(trace: CallTrace, call: TracedCall, env: Environment):
    """Entry whose stored call is equivalent to `call` under `env`; most
    recent entries win.  Returns (variable, checking) or None."""
    for entry in reversed(trace.entries):
        if calls_equivalent(entry.call, env, call, env):
            return entry.var, entry.checking
    return None


# ---------------------------------------------------------------------------
# Tree expansion


@dataclass(frozen=True)
class TCut:
    pass


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class TPrim:
    value: object


@dataclass(frozen=True)
class TObj:
    cls: str
    kids: tuple


CUT = TCut()


def tree_expand(c: Capsule, depth: int):
    """Truncation at `depth` of the infinite tree the capsule denotes;
    undetermined variables appear as themselves, cut points as TCut."""

    def go(u, k):
        if k <= 0:
            return CUT
        w = unfold(u, c.env)
        if w is None:
            return TVar(u.name)
        if isinstance(w, Obj):
            return TObj(w.cls, tuple(go(f, k - 1) for f in w.fields))
        return TPrim(w.value)

    return go(c.open, depth)


def _tree_var_pairs(t1, t2):
    """Variable-leaf pairs of two structurally matching expansions, else None."""
    stack = [(t1, t2)]
    pairs = set()
    while stack:
        a, b = stack.pop()
        if isinstance(a, TCut) or isinstance(b, TCut):
            if type(a) is not type(b):
                return None
            continue
        if isinstance(a, TVar):
            if not isinstance(b, TVar):
                return None
            pairs.add((a.name, b.name))
            continue
        if isinstance(a, TPrim):
            if not isinstance(b, TPrim) or a.value != b.value:
                return None
            continue
        if not isinstance(b, TObj) or a.cls != b.cls or len(a.kids) != len(b.kids):
            return None
        stack.extend(zip(a.kids, b.kids))
    return pairs


def expansions_match_witness(c1: Capsule, c2: Capsule, depth: int, witness: Renaming) -> bool:
    """Expansions equal at `depth`, with variable leaves related by `witness`."""
    pairs = _tree_var_pairs(tree_expand(c1, depth), tree_expand(c2, depth))
    if pairs is None:
        return False
    return all(witness.relates(x, y) for x, y in pairs)


def expansions_match_some_renaming(c1: Capsule, c2: Capsule, depth: int) -> bool:
    """Expansions equal at `depth` up to *some* (not necessarily strict)
    renaming of undetermined variables."""
    pairs = _tree_var_pairs(tree_expand(c1, depth), tree_expand(c2, depth))
    if pairs is None:
        return False
    und1, und2 = undetermined(c1.env), undetermined(c2.env)
    fwd, bwd = {}, {}
    for x, y in pairs:
        l, r = und1.class_of(x), und2.class_of(y)
        if fwd.setdefault(l, r) != r or bwd.setdefault(r, l) != l:
            return False
    return True


# ---------------------------------------------------------------------------
# Garbage collection, subcapsules, canonical printing


def _reachable(open_value, env: Environment) -> set:
    reach = set()
    work = list(free_vars(open_value))
    while work:
        x = work.pop()
        if x in reach:
            continue
        reach.add(x)
        u = env.lookup(x)
        if u is not None:
            work.extend(free_vars(u))
    return reach


def gc(c: Capsule) -> Capsule:
    """Environment restricted to the variables the open value can reach."""
    return capsule_unchecked(c.open, c.env.restrict(_reachable(c.open, c.env)))


def subcapsules(term, env: Environment) -> list:
    """Capsules for every open-value subterm of `term` (an expression or open
    value) and of the environment bindings it can reach, deduplicated up to
    equivalence.  Used as finite instantiation pools by the oracle searches."""
    roots = [term]
    for x in _reachable(term, env):
        roots.append(env.lookup(x))
    out = []
    for root in roots:
        for t in subterms(root):
            if isinstance(t, New):
                u = as_open(t)
            elif isinstance(t, (Obj, Var, IntVal, BoolVal)):
                u = t
            else:
                continue
            if u is None:
                continue
            cand = gc(capsule_unchecked(u, env))
            if all(equivalent(cand, seen) is None for seen in out):
                out.append(cand)
    return out


def _cyclic_vars(env: Environment) -> set:
    cyclic = set()
    for x in env.domain():
        seen = set()
        work = list(free_vars(env.lookup(x)))
        hit = False
        while work:
            y = work.pop()
            if y == x:
                hit = True
                break
            if y in seen:
                continue
            seen.add(y)
            u = env.lookup(y)
            if u is not None:
                work.extend(free_vars(u))
        if hit:
            cyclic.add(x)
    return cyclic


def render_capsule(c: Capsule) -> str:
    """Canonical textual form, bit-exact for golden tests.

    After garbage collection, bindings that take no part in a cycle are
    inlined, so a capsule denoting a plain value prints as that value.  The
    surviving (cyclic) variables are renumbered x0, x1, ... by first
    occurrence in a depth-first walk, and printed as `v where x0 = ...; ...`.
    """
    c = gc(c)
    env = c.env
    cyclic = _cyclic_vars(env)
    memo = {}

    def inline(u):
        if isinstance(u, Var):
            if u.name in cyclic or u.name not in env:
                return u
            if u.name not in memo:
                memo[u.name] = inline(env.lookup(u.name))
            return memo[u.name]
        if isinstance(u, Obj):
            return Obj(u.cls, tuple(inline(f) for f in u.fields))
        return u

    main = inline(c.open)
    order = []
    seen = set()

    def number(u):
        for t in subterms(u):
            if isinstance(t, Var) and t.name not in seen:
                seen.add(t.name)
                order.append(t.name)

    number(main)
    i = 0
    expanded = {}
    while i < len(order):
        x = order[i]
        expanded[x] = inline(env.lookup(x))
        number(expanded[x])
        i += 1
    rename = {x: f"x{i}" for i, x in enumerate(order)}
    text = render_expr(as_expr(main), rename)
    if not order:
        return text
    bindings = "; ".join(
        f"{rename[x]} = {render_expr(as_expr(expanded[x]), rename)}" for x in order
    )
    return f"{text} where {bindings}"

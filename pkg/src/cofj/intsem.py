"""Bounded oracle searches used to validate the main evaluator.

Two derivability relations are implemented over regular values encoded as
capsules, with membership everywhere taken modulo capsule equivalence:

* `derive_int` searches the nondeterministic bridge semantics whose judgment
  carries a result map for calls being checked and a set of already
  encountered calls.  At an already encountered call both continuing with
  the body and consulting the codefinition are explored.

* `derive_inductive_with_corules` searches the plain inductive system made
  of the baseline rules plus the two extra axiom schemes: every value
  evaluates to itself, and a call may evaluate its codefinition with the
  placeholder instantiated from a finite candidate pool.

Both searches saturate tables of call goals to a least fixpoint, bounded by
a node budget and by caps on the value universe (integer magnitude, capsule
size).  A search that saturates inside its caps is reported complete; the
caps make the oracle deliberately incomplete but keep refutation decidable
at desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import Optional

from .capsules import env_union, equivalent, gc, subcapsules, unfold
from .classtable import ClassTable
from .errors import (
    CofjError,
    InconclusiveSearch,
    MethodNotFound,
    NoCodefinition,
)
from .fj import apply_binop, project_field
from .syntax import (
    Any,
    BinOp,
    BoolVal,
    Call,
    Capsule,
    EMPTY_ENV,
    Environment,
    FieldAccess,
    If,
    IntVal,
    New,
    Obj,
    TracedCall,
    Var,
    as_open,
    capsule_unchecked,
    substitute,
    subterms,
)


@dataclass(frozen=True)
class OracleBudget:
    nodes: int = 100_000   # rule applications across the whole search
    rounds: int = 200      # saturation passes
    int_cap: int = 64      # largest |integer| admitted into the value universe
    size_cap: int = 48     # largest capsule (term nodes) admitted
    pairs_cap: int = 64    # largest per-goal result set


@dataclass
class DeriveResult:
    pairs: list          # of (value: Capsule, calls: tuple of call capsules)
    complete: bool       # the search saturated within its budget
    truncated: bool      # some value fell to the universe caps


class _BudgetOut(Exception):
    pass


def _value(u, env) -> Capsule:
    return gc(capsule_unchecked(u, env))


def _capsule_size(c: Capsule) -> int:
    n = sum(1 for _ in subterms(c.open))
    for _, u in c.env.items():
        n += sum(1 for _ in subterms(u))
    return n


def _ints_of(c: Capsule):
    for t in subterms(c.open):
        if isinstance(t, IntVal):
            yield t.value
    for _, u in c.env.items():
        for t in subterms(u):
            if isinstance(t, IntVal):
                yield t.value


def _within_caps(c: Capsule, budget: OracleBudget) -> bool:
    if _capsule_size(c) > budget.size_cap:
        return False
    return all(abs(v) <= budget.int_cap for v in _ints_of(c))


def make_call_capsule(call: TracedCall, env: Environment) -> Capsule:
    return gc(capsule_unchecked(call.wrapper(), env))


def _in_callset(calls, c: Capsule) -> bool:
    return any(equivalent(c, other) is not None for other in calls)


def _add_call(calls, c: Capsule):
    if _in_callset(calls, c):
        return calls
    return calls + (c,)


def _remove_call(calls, c: Capsule):
    return tuple(o for o in calls if equivalent(c, o) is None)


def _union_callsets(a, b):
    out = a
    for c in b:
        out = _add_call(out, c)
    return out


def _callsets_equal(a, b) -> bool:
    if a == b:
        return True
    return len(a) == len(b) and all(_in_callset(b, c) for c in a)


def _rho_get(rho, c: Capsule) -> Optional[Capsule]:
    for key, value in rho:
        if equivalent(key, c) is not None:
            return value
    return None


def _rho_extend(rho, c: Capsule, v: Capsule):
    return rho + ((c, v),)


def _rhos_equal(r1, r2) -> bool:
    if r1 == r2:
        return True
    if len(r1) != len(r2):
        return False
    for k1, v1 in r1:
        if not any(
            equivalent(k1, k2) is not None and equivalent(v1, v2) is not None
            for k2, v2 in r2
        ):
            return False
    return True


_fresh_counter = itertools.count()


def freshen(c: Capsule) -> Capsule:
    """Rename the capsule's bound variables to globally fresh names so it can
    be merged into any ambient environment without collisions."""
    mapping = {x: f"%{next(_fresh_counter)}" for x in c.env.domain()}

    def rn(u):
        if isinstance(u, Var):
            return Var(mapping.get(u.name, u.name))
        if isinstance(u, Obj):
            return Obj(u.cls, tuple(rn(f) for f in u.fields))
        return u

    env = Environment((mapping[x], rn(u)) for x, u in c.env.items())
    return capsule_unchecked(rn(c.open), env)


# ---------------------------------------------------------------------------
# Intermediate-semantics search


class _Goal:
    __slots__ = ("call", "env", "callcap", "rho", "calls", "pairs", "cls", "confirmed")

    def __init__(self, call, env, callcap, rho, calls, cls):
        self.call = call
        self.env = env
        self.callcap = callcap
        self.rho = rho
        self.calls = calls
        self.cls = cls
        self.pairs = []
        self.confirmed = []  # values whose checking step already succeeded


class _IntSearch:
    def __init__(self, table: ClassTable, budget: OracleBudget, candidates, hints):
        self.table = table
        self.budget = budget
        self.nodes_left = budget.nodes
        self.truncated = False
        self.changed = False
        self.goals = []
        self.buckets = {}  # cheap invariants -> goals, to keep lookups small
        self.candidates = candidates
        self.hints = hints  # list of (call capsule, value capsule)

    def tick(self):
        if self.nodes_left <= 0:
            raise _BudgetOut()
        self.nodes_left -= 1

    # -- expression layer ---------------------------------------------------

    def expr_pairs(self, e, env, rho, calls):
        """All (open value, environment, undischarged calls) the expression
        can derive, reading call goals from the current tables."""
        self.tick()
        u = as_open(e)
        if u is not None:
            return [(u, env, ())]
        if isinstance(e, FieldAccess):
            out = []
            for u, env1, s1 in self.expr_pairs(e.target, env, rho, calls):
                w = unfold(u, env1)
                if not isinstance(w, Obj):
                    continue
                try:
                    v = project_field(self.table, w, e.field)
                except CofjError:
                    continue
                out.append((v, env1, s1))
            return self._dedup(out)
        if isinstance(e, New):
            acc = [((), env, ())]
            for a in e.args:
                branch = self.expr_pairs(a, env, rho, calls)
                acc = [
                    (vs + (v,), env_union(env_a, env_v), _union_callsets(s_a, s_v))
                    for vs, env_a, s_a in acc
                    for v, env_v, s_v in branch
                ]
            return self._dedup([(Obj(e.cls, vs), env_o, s) for vs, env_o, s in acc])
        if isinstance(e, BinOp):
            out = []
            for l, env1, s1 in self.expr_pairs(e.lhs, env, rho, calls):
                for r, env2, s2 in self.expr_pairs(e.rhs, env, rho, calls):
                    env_o = env_union(env1, env2)
                    lw, rw = unfold(l, env_o), unfold(r, env_o)
                    if lw is None or rw is None:
                        continue
                    try:
                        v = apply_binop(e.op, lw, rw)
                    except CofjError:
                        continue
                    out.append((v, env_o, _union_callsets(s1, s2)))
            return self._dedup(out)
        if isinstance(e, If):
            out = []
            for c, env1, s1 in self.expr_pairs(e.cond, env, rho, calls):
                w = unfold(c, env1)
                if not isinstance(w, BoolVal):
                    continue
                branch = e.then if w.value else e.orelse
                for v, env2, s2 in self.expr_pairs(branch, env1, rho, calls):
                    out.append((v, env2, _union_callsets(s1, s2)))
            return self._dedup(out)
        if isinstance(e, Call):
            out = []
            for recv, env0, s0 in self.expr_pairs(e.target, env, rho, calls):
                combos = [((), env0, s0)]
                for a in e.args:
                    branch = self.expr_pairs(a, env, rho, calls)
                    combos = [
                        (vs + (v,), env_union(env_a, env_v), _union_callsets(s_a, s_v))
                        for vs, env_a, s_a in combos
                        for v, env_v, s_v in branch
                    ]
                for args, env_c, s_args in combos:
                    call = TracedCall(recv, e.method, args)
                    for v, s_body in self.call_pairs(call, env_c, rho, calls):
                        env_o = env_union(env_c, v.env)
                        out.append((v.open, env_o, _union_callsets(s_args, s_body)))
            return self._dedup(out)
        raise TypeError(f"not an expression: {e!r}")

    def _dedup(self, pairs):
        out = []
        vals = []
        for u, env, s in pairs:
            val = _value(u, env)
            dup = any(
                equivalent(val, val2) is not None and _callsets_equal(s, s2)
                for val2, (_, _, s2) in zip(vals, out)
            )
            if not dup:
                out.append((u, env, s))
                vals.append(val)
        return out

    # -- call goals -----------------------------------------------------------

    def call_pairs(self, call, env, rho, calls):
        w = unfold(call.receiver, env)
        if not isinstance(w, Obj):
            return []
        callcap = make_call_capsule(call, env)
        bucket = self.buckets.setdefault(
            (call.method, w.cls, len(call.args), len(rho), len(calls)), []
        )
        for goal in bucket:
            if (
                equivalent(goal.callcap, callcap) is not None
                and _rhos_equal(goal.rho, rho)
                and _callsets_equal(goal.calls, calls)
            ):
                return list(goal.pairs)
        goal = _Goal(call, env, callcap, rho, calls, w.cls)
        self.goals.append(goal)
        bucket.append(goal)
        self.changed = True
        return []

    def recompute(self, goal):
        self.tick()
        found = []
        hit = _rho_get(goal.rho, goal.callcap)
        if hit is not None:
            found.append((hit, ()))
        in_s = _in_callset(goal.calls, goal.callcap)
        if in_s and hit is None:
            found.extend(self._corec_pairs(goal))
        found.extend(self._invk_pairs(goal, in_s))
        grew = False
        for pair in found:
            if len(goal.pairs) >= self.budget.pairs_cap:
                self.truncated = True
                break
            if not _within_caps(pair[0], self.budget):
                self.truncated = True
                continue
            dup = any(
                equivalent(pair[0], old[0]) is not None and _callsets_equal(pair[1], old[1])
                for old in goal.pairs
            )
            if not dup:
                goal.pairs.append(pair)
                grew = True
        if grew:
            self.changed = True

    def _any_candidates(self, goal):
        """Placeholder instantiations for a goal: result hints recorded for an
        equivalent call first, the global pool otherwise."""
        hinted = [v for cc, v in self.hints if equivalent(cc, goal.callcap) is not None]
        return hinted if hinted else self.candidates

    def _corec_pairs(self, goal):
        try:
            info = self.table.combody(goal.cls, goal.call.method)
        except (NoCodefinition, MethodNotFound):
            return []
        if len(info.params) != len(goal.call.args):
            return []
        base = {"this": goal.call.receiver}
        base.update(zip(info.params, goal.call.args))
        has_any = any(isinstance(t, Any) for t in subterms(info.cobody))
        variants = []
        if has_any:
            for cand in self._any_candidates(goal):
                bindings = dict(base)
                bindings["any"] = cand.open
                variants.append((bindings, env_union(goal.env, cand.env)))
        else:
            variants.append((base, goal.env))
        out = []
        for bindings, env_c in variants:
            body = substitute(info.cobody, bindings)
            for u, env_o, s1 in self.expr_pairs(body, env_c, goal.rho, goal.calls):
                out.append((_value(u, env_o), _add_call(s1, goal.callcap)))
        return out

    def _invk_pairs(self, goal, in_s):
        try:
            info = self.table.mbody(goal.cls, goal.call.method)
        except (MethodNotFound,):
            return []
        if len(info.params) != len(goal.call.args):
            return []
        bindings = {"this": goal.call.receiver}
        bindings.update(zip(info.params, goal.call.args))
        body = substitute(info.body, bindings)
        s_plus = _add_call(goal.calls, goal.callcap)
        out = []
        for u, env_o, s1 in self.expr_pairs(body, goal.env, goal.rho, s_plus):
            val = _value(u, env_o)
            c_in_s1 = _in_callset(s1, goal.callcap)
            if (not c_in_s1) or in_s:
                out.append((val, s1))
            if (not in_s) and c_in_s1 and self._check_confirms(goal, body, val):
                out.append((val, _remove_call(s1, goal.callcap)))
        return out

    def _check_confirms(self, goal, body, val):
        """Checking step: the same body must re-derive the same value under
        the hypothesis recorded in the result map.  Confirmations are
        monotone under saturation, so successes are cached."""
        if any(equivalent(val, old) is not None for old in goal.confirmed):
            return True
        rho2 = _rho_extend(goal.rho, goal.callcap, val)
        for u3, env3, _s3 in self.expr_pairs(body, goal.env, rho2, goal.calls):
            if equivalent(_value(u3, env3), val) is not None:
                goal.confirmed.append(val)
                return True
        return False


def _collect_pairs(search, top, budget):
    pairs = []
    for u, env_o, s in top:
        val = _value(u, env_o)
        if not _within_caps(val, budget):
            search.truncated = True
            continue
        if not any(
            equivalent(val, v2) is not None and _callsets_equal(s, s2) for v2, s2 in pairs
        ):
            pairs.append((val, s))
    return pairs


def derive_int(
    table: ClassTable,
    e,
    env: Environment = EMPTY_ENV,
    rho=(),
    calls=(),
    budget: Optional[OracleBudget] = None,
    candidates=(),
    call_hints=(),
    stop_at: Optional[Capsule] = None,
) -> DeriveResult:
    """All (value, undischarged-call-set) pairs derivable within budget.

    `candidates` and `call_hints` seed the placeholder instantiation at
    codefinitions; they are only search hints, every reported pair is backed
    by a full derivation.  With `stop_at` the search returns as soon as that
    value is derivable with no undischarged calls.
    """
    budget = budget or OracleBudget()
    pool = [freshen(c) for c in candidates]
    hints = [(cc, freshen(v)) for cc, v in call_hints]
    search = _IntSearch(table, budget, pool, hints)
    top = []
    complete = False
    try:
        for _ in range(budget.rounds):
            search.changed = False
            top = search.expr_pairs(e, env, tuple(rho), tuple(calls))
            if stop_at is not None:
                for u, env_o, s in top:
                    if not s and equivalent(_value(u, env_o), stop_at) is not None:
                        return DeriveResult(
                            _collect_pairs(search, top, budget), False, search.truncated
                        )
            for goal in list(search.goals):
                search.recompute(goal)
            if not search.changed:
                complete = True
                break
    except _BudgetOut:
        # Partial results from the last finished pass are still reported;
        # `complete` stays False so callers treat them as a lower bound.
        pass
    return DeriveResult(_collect_pairs(search, top, budget), complete, search.truncated)


def check_sound(
    table: ClassTable,
    e,
    result: Optional[Capsule],
    budget: Optional[OracleBudget] = None,
    candidates=(),
    call_hints=(),
) -> bool:
    """True iff the bounded search derives the evaluator's result with no
    undischarged calls; False when the capped search saturates without it.

    Raises InconclusiveSearch when the budget runs out first.  A None result
    (the evaluation itself failed) is vacuously confirmed.
    """
    if result is None:
        return True
    pool = list(candidates)
    pool.extend(subcapsules(e, EMPTY_ENV))
    pool.extend(subcapsules(result.open, result.env))
    res = derive_int(
        table,
        e,
        budget=budget,
        candidates=pool,
        call_hints=call_hints,
        stop_at=result,
    )
    for v, s in res.pairs:
        if not s and equivalent(v, result) is not None:
            return True
    if res.complete:
        return False
    raise InconclusiveSearch(
        "intermediate search exhausted its budget before confirming the result"
    )


# ---------------------------------------------------------------------------
# Inductive derivability in rules plus corules


class _IndGoal:
    __slots__ = ("call", "env", "callcap", "cls", "values")

    def __init__(self, call, env, callcap, cls):
        self.call = call
        self.env = env
        self.callcap = callcap
        self.cls = cls
        self.values = []


class _IndSearch:
    def __init__(self, table: ClassTable, budget: OracleBudget, candidates):
        self.table = table
        self.budget = budget
        self.nodes_left = budget.nodes
        self.truncated = False
        self.changed = False
        self.goals = []
        self.candidates = candidates

    def tick(self):
        if self.nodes_left <= 0:
            raise _BudgetOut()
        self.nodes_left -= 1

    def expr_values(self, e, env):
        self.tick()
        u = as_open(e)
        if u is not None:
            return [(u, env)]
        if isinstance(e, FieldAccess):
            out = []
            for u, env1 in self.expr_values(e.target, env):
                w = unfold(u, env1)
                if not isinstance(w, Obj):
                    continue
                try:
                    out.append((project_field(self.table, w, e.field), env1))
                except CofjError:
                    continue
            return self._dedup(out)
        if isinstance(e, New):
            acc = [((), env)]
            for a in e.args:
                branch = self.expr_values(a, env)
                acc = [
                    (vs + (v,), env_union(env_a, env_v))
                    for vs, env_a in acc
                    for v, env_v in branch
                ]
            return self._dedup([(Obj(e.cls, vs), env_o) for vs, env_o in acc])
        if isinstance(e, BinOp):
            out = []
            for l, env1 in self.expr_values(e.lhs, env):
                for r, env2 in self.expr_values(e.rhs, env):
                    env_o = env_union(env1, env2)
                    lw, rw = unfold(l, env_o), unfold(r, env_o)
                    if lw is None or rw is None:
                        continue
                    try:
                        out.append((apply_binop(e.op, lw, rw), env_o))
                    except CofjError:
                        continue
            return self._dedup(out)
        if isinstance(e, If):
            out = []
            for c, env1 in self.expr_values(e.cond, env):
                w = unfold(c, env1)
                if not isinstance(w, BoolVal):
                    continue
                out.extend(self.expr_values(e.then if w.value else e.orelse, env1))
            return self._dedup(out)
        if isinstance(e, Call):
            out = []
            for recv, env0 in self.expr_values(e.target, env):
                combos = [((), env0)]
                for a in e.args:
                    branch = self.expr_values(a, env)
                    combos = [
                        (vs + (v,), env_union(env_a, env_v))
                        for vs, env_a in combos
                        for v, env_v in branch
                    ]
                for args, env_c in combos:
                    call = TracedCall(recv, e.method, args)
                    for v in self.call_values(call, env_c):
                        out.append((v.open, env_union(env_c, v.env)))
            return self._dedup(out)
        raise TypeError(f"not an expression: {e!r}")

    def _dedup(self, values):
        out = []
        for u, env in values:
            val = _value(u, env)
            if all(equivalent(val, _value(u2, env2)) is None for u2, env2 in out):
                out.append((u, env))
        return out

    def call_values(self, call, env):
        w = unfold(call.receiver, env)
        if not isinstance(w, Obj):
            return []
        callcap = make_call_capsule(call, env)
        for goal in self.goals:
            if equivalent(goal.callcap, callcap) is not None:
                return list(goal.values)
        goal = _IndGoal(call, env, callcap, w.cls)
        self.goals.append(goal)
        self.changed = True
        return []

    def recompute(self, goal):
        self.tick()
        found = []
        try:
            info = self.table.mbody(goal.cls, goal.call.method)
        except MethodNotFound:
            info = None
        if info is not None and len(info.params) == len(goal.call.args):
            bindings = {"this": goal.call.receiver}
            bindings.update(zip(info.params, goal.call.args))
            body = substitute(info.body, bindings)
            for u, env_o in self.expr_values(body, goal.env):
                found.append(_value(u, env_o))
        try:
            co = self.table.combody(goal.cls, goal.call.method)
        except (NoCodefinition, MethodNotFound):
            co = None
        if co is not None and len(co.params) == len(goal.call.args):
            base = {"this": goal.call.receiver}
            base.update(zip(co.params, goal.call.args))
            has_any = any(isinstance(t, Any) for t in subterms(co.cobody))
            variants = []
            if has_any:
                for cand in self.candidates:
                    bindings = dict(base)
                    bindings["any"] = cand.open
                    variants.append((bindings, env_union(goal.env, cand.env)))
            else:
                variants.append((base, goal.env))
            for bindings, env_c in variants:
                cobody = substitute(co.cobody, bindings)
                for u, env_o in self.expr_values(cobody, env_c):
                    found.append(_value(u, env_o))
        grew = False
        for val in found:
            if not _within_caps(val, self.budget):
                self.truncated = True
                continue
            if all(equivalent(val, old) is None for old in goal.values):
                goal.values.append(val)
                grew = True
        if grew:
            self.changed = True


def derive_inductive_with_corules(
    table: ClassTable,
    e,
    v: Capsule,
    env: Environment = EMPTY_ENV,
    budget: Optional[OracleBudget] = None,
    candidates=(),
) -> bool:
    """Whether `e` evaluates to `v` with a finite proof tree in the baseline
    rules extended by the corules, instantiating the placeholder from the
    subcapsules of the goal (plus any extra candidates supplied)."""
    budget = budget or OracleBudget()
    pool = [freshen(c) for c in candidates]
    pool.extend(freshen(c) for c in subcapsules(e, env))
    pool.extend(freshen(c) for c in subcapsules(v.open, v.env))
    search = _IndSearch(table, budget, pool)
    complete = False
    try:
        for _ in range(budget.rounds):
            search.changed = False
            top = search.expr_values(e, env)
            for u, env_o in top:
                if equivalent(_value(u, env_o), v) is not None:
                    return True
            for goal in list(search.goals):
                search.recompute(goal)
            if not search.changed:
                complete = True
                break
    except _BudgetOut:
        complete = False
    if complete:
        return False
    raise InconclusiveSearch("inductive search exhausted its budget before settling")

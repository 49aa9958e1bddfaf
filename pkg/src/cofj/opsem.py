"""The main evaluator: big-step rules over capsules with regular corecursion.

The judgment evaluates an expression in an environment and a call trace and
returns an open value with an extended environment.  Seven rules apply:

  val         the expression already is an open value
  field       evaluate the target, unfold, project
  new         evaluate arguments, union their environments
  invk-ok     first occurrence of a call; body evaluated under the trace
              extended with a fresh variable that stays unused
  invk-check  first occurrence whose body consulted the codefinition; the
              body is re-evaluated under the hypothesized result, and the
              two results must be equivalent
  corec       the call is already in the trace untagged: evaluate the
              codefinition with the trace variable standing for the result
  look-up     the call is in the trace tagged (checking phase): return the
              trace variable

Fuel counts rule applications and is shared with checking re-evaluations.
Fresh variables are drawn from one per-run counter, so names never collide
across the re-evaluation either.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

from .capsules import env_union, equivalent_parts, gc, trace_lookup, unfold
from .classtable import ClassTable
from .errors import (
    CofjRuntimeError,
    CorecCheckFailure,
    FuelExhausted,
    PrimitiveMisuse,
    UndeterminedReceiver,
)
from .fj import DEFAULT_FUEL, apply_binop, project_field
from .syntax import (
    Any,
    BinOp,
    BoolVal,
    Call,
    CallTrace,
    Capsule,
    EMPTY_ENV,
    EMPTY_TRACE,
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
    free_vars,
    render_expr,
    substitute,
)

# Fault-injection switches for the soundness-oracle mutation tests.
MUTATION_DROP_COREC_ENV = "drop-corec-env-update"
MUTATION_SKIP_CHECK = "skip-invk-check"


@dataclass
class EvalState:
    fuel: int
    next_fresh: int = 0
    trace_log: list = None
    mutations: frozenset = frozenset()
    call_log: list = None

    def fresh(self) -> str:
        name = f"${self.next_fresh}"
        self.next_fresh += 1
        return name


class OpEvaluator:
    def __init__(
        self,
        table: ClassTable,
        fuel: int = DEFAULT_FUEL,
        trace: bool = False,
        mutations=(),
        record_calls: bool = False,
    ):
        self.table = table
        self.fuel = fuel
        self.trace_enabled = trace
        self.mutations = frozenset(mutations)
        self.record_calls = record_calls
        self.state = None

    # -- public entry points ------------------------------------------------

    def eval_main(self, e) -> Capsule:
        """Evaluate a closed expression in empty environment and trace;
        the result capsule is garbage collected."""
        assert not free_vars(e), "top-level expression must be closed"
        u, env = self.eval(e, EMPTY_ENV, EMPTY_TRACE)
        if not self.mutations:
            return gc(Capsule(u, env))
        return gc(capsule_unchecked(u, env))

    def eval(self, e, env: Environment, trace: CallTrace):
        """Evaluate under a given environment and call trace; returns the
        open value and the extended environment."""
        sys.setrecursionlimit(max(sys.getrecursionlimit(), 60_000))
        self.state = EvalState(
            fuel=self.fuel,
            trace_log=[] if self.trace_enabled else None,
            mutations=self.mutations,
            call_log=[] if self.record_calls else None,
        )
        # Fresh names must avoid anything already present.
        used = [int(x[1:]) for x in env.domain() if x.startswith("$") and x[1:].isdigit()]
        used += [int(t.var[1:]) for t in trace if t.var.startswith("$") and t.var[1:].isdigit()]
        self.state.next_fresh = max(used) + 1 if used else 0
        return self._eval(e, env, trace)

    @property
    def trace_log(self):
        return self.state.trace_log if self.state else None

    @property
    def call_log(self):
        return self.state.call_log if self.state else None

    # -- machinery ----------------------------------------------------------

    def _log(self, kind, e, trace, env):
        if self.state.trace_log is not None:
            summary = render_expr(e)
            if len(summary) > 48:
                summary = summary[:45] + "..."
            self.state.trace_log.append(f"RULE({kind}) {summary} | {len(trace)} | {len(env)}")

    def _eval(self, e, env, trace):
        st = self.state
        if st.fuel <= 0:
            raise FuelExhausted(self.fuel)
        st.fuel -= 1
        out = self._step(e, env, trace)
        assert self._extends(env, out[1]), "environment lost bindings across a rule"
        return out

    @staticmethod
    def _extends(before: Environment, after: Environment) -> bool:
        if not __debug__:
            return True
        return all(after.lookup(x) == u for x, u in before.items())

    def _step(self, e, env, trace):
        u = as_open(e)
        if u is not None:
            self._log("val", e, trace, env)
            return u, env
        if isinstance(e, FieldAccess):
            target, env1 = self._eval(e.target, env, trace)
            w = unfold(target, env1)
            if w is None:
                raise UndeterminedReceiver(f"field {e.field} on an undetermined value")
            value = project_field(self.table, w, e.field)
            self._log("field", e, trace, env)
            return value, env1
        if isinstance(e, New):
            out_env = env
            values = []
            for a in e.args:
                v, env_i = self._eval(a, env, trace)
                values.append(v)
                out_env = env_union(out_env, env_i)
            self._log("new", e, trace, env)
            return Obj(e.cls, tuple(values)), out_env
        if isinstance(e, BinOp):
            lhs, env1 = self._eval(e.lhs, env, trace)
            rhs, env2 = self._eval(e.rhs, env, trace)
            out_env = env_union(env1, env2)
            lw = unfold(lhs, out_env)
            rw = unfold(rhs, out_env)
            if lw is None or rw is None:
                raise UndeterminedReceiver(f"operator {e.op} on an undetermined value")
            return apply_binop(e.op, lw, rw), out_env
        if isinstance(e, If):
            cond, env1 = self._eval(e.cond, env, trace)
            w = unfold(cond, env1)
            if w is None:
                raise UndeterminedReceiver("condition is undetermined")
            if not isinstance(w, BoolVal):
                raise PrimitiveMisuse("condition is not a boolean")
            return self._eval(e.then if w.value else e.orelse, env1, trace)
        if isinstance(e, Call):
            return self._call(e, env, trace)
        if isinstance(e, Any):
            raise CofjRuntimeError("`any` reached outside a codefinition")
        raise TypeError(f"not an expression: {e!r}")

    def _call(self, e, env, trace):
        st = self.state
        receiver, env0 = self._eval(e.target, env, trace)
        out_env = env_union(env, env0)
        args = []
        for a in e.args:
            v, env_i = self._eval(a, env, trace)
            args.append(v)
            out_env = env_union(out_env, env_i)
        recv = unfold(receiver, env0)
        if recv is None:
            raise UndeterminedReceiver(f"method {e.method} on an undetermined value")
        if not isinstance(recv, Obj):
            raise PrimitiveMisuse(f"method {e.method} called on a primitive")
        call = TracedCall(receiver, e.method, tuple(args))

        hit = trace_lookup(trace, call, out_env)
        if hit is not None:
            x, checking = hit
            if checking:
                self._log("look-up", e, trace, env)
                return Var(x), out_env
            return self._corec(e, call, recv.cls, x, out_env, trace, env)

        info = self.table.mbody(recv.cls, e.method)
        if len(info.params) != len(args):
            raise CofjRuntimeError(
                f"{recv.cls}.{e.method} expects {len(info.params)} arguments"
            )
        x = st.fresh()
        bindings = {"this": receiver}
        bindings.update(zip(info.params, args))
        body = substitute(info.body, bindings)
        value, env1 = self._eval(body, out_env, trace.extend(call, x))
        if x not in env1:
            self._log("invk-ok", e, trace, env)
            self._record(call, value, env1)
            return value, env1
        return self._check(e, call, body, x, value, out_env, env1, trace, env)

    def _corec(self, e, call, cls, x, out_env, trace, log_env):
        info = self.table.combody(cls, e.method)
        bindings = {"this": call.receiver, "any": Var(x)}
        bindings.update(zip(info.params, call.args))
        cobody = substitute(info.cobody, bindings)
        dropped = MUTATION_DROP_COREC_ENV in self.state.mutations
        env_in = out_env if dropped else out_env.bind(x, Var(x))
        value, env1 = self._eval(cobody, env_in, trace)
        env_out = env1 if dropped else env1.bind(x, Var(x))
        self._log("corec", e, trace, log_env)
        self._record(call, value, env_out)
        return value, env_out

    def _check(self, e, call, body, x, value, out_env, env1, trace, log_env):
        result_env = env1.bind(x, value)
        if MUTATION_SKIP_CHECK in self.state.mutations:
            self._log("invk-check", e, trace, log_env)
            self._record(call, Var(x), result_env)
            return Var(x), result_env
        check_env = env_union(out_env, result_env)
        check_value, env2 = self._eval(body, check_env, trace.extend(call, x, checking=True))
        if equivalent_parts(Var(x), result_env, check_value, env2) is None:
            raise CorecCheckFailure(
                gc(capsule_unchecked(Var(x), result_env)),
                gc(capsule_unchecked(check_value, env2)),
            )
        self._log("invk-check", e, trace, log_env)
        self._record(call, Var(x), result_env)
        return Var(x), result_env

    def _record(self, call, value, env):
        # Harvested by the soundness oracle as call-indexed result hints.
        if self.state.call_log is not None:
            self.state.call_log.append(
                (
                    gc(capsule_unchecked(call.wrapper(), env)),
                    gc(capsule_unchecked(value, env)),
                )
            )


def eval_main(table: ClassTable, e, fuel: int = DEFAULT_FUEL) -> Capsule:
    return OpEvaluator(table, fuel=fuel).eval_main(e)

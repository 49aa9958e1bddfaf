"""Interpreter for a Java-like calculus with cyclic objects and flexibly
corecursive methods: parser, class tables, capsule algebra, the main
operational evaluator, a baseline finite-object evaluator, and bounded
derivation oracles."""

from .capsules import (
    env_union,
    equivalent,
    gc,
    render_capsule,
    subcapsules,
    trace_lookup,
    tree_expand,
    undetermined,
    unfold,
)
from .classtable import ClassTable, validate_main
from .corpus import load_corpus, load_program
from .errors import (
    CofjError,
    CofjRuntimeError,
    CorecCheckFailure,
    FuelExhausted,
    InconclusiveSearch,
    ParseError,
    ValidationError,
)
from .fj import eval_fj
from .intsem import OracleBudget, check_sound, derive_inductive_with_corules, derive_int
from .opsem import DEFAULT_FUEL, OpEvaluator, eval_main
from .parser import parse_capsule, parse_expr, parse_program
from .syntax import (
    Capsule,
    Environment,
    free_vars,
    render_expr,
    render_value,
    substitute,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Exception taxonomy shared by the parser, class table, and evaluators."""


class CofjError(Exception):
    """Base class for everything raised on purpose by this package."""


class ParseError(CofjError):
    def __init__(self, message, line, col, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        suffix = ""
        if self.expected:
            suffix = " (expected %s)" % ", ".join(self.expected)
        super().__init__(f"{line}:{col}: {message}{suffix}")


class ValidationError(CofjError):
    """A class table violates a static well-formedness rule."""


class CofjRuntimeError(CofjError):
    """An evaluation got stuck; maps to exit code 2 at the CLI."""


class UnknownClass(CofjRuntimeError):
    pass


class FieldNotFound(CofjRuntimeError):
    pass


class MethodNotFound(CofjRuntimeError):
    pass


class NoCodefinition(CofjRuntimeError):
    """The method exists but carries no codefinition, yet a cyclic call needs one."""


class PrimitiveMisuse(CofjRuntimeError):
    """Field access, method call, or operator applied to a value of the wrong shape."""


class UndeterminedReceiver(CofjRuntimeError):
    """Unfolding was undefined where a constructor or primitive was required."""


class UnionConflict(CofjRuntimeError):
    """Two environments disagree on a shared variable."""


class DivisionByZero(CofjRuntimeError):
    pass


class CorecCheckFailure(CofjRuntimeError):
    """The re-evaluation of a method body under the hypothesized result
    disagreed with the hypothesis; carries both capsules for diagnosis."""

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(
            "corecursive result failed its checking step: "
            f"hypothesis {expected} but re-evaluation produced {actual}"
        )


class FuelExhausted(CofjError):
    """Evaluation exceeded its fuel; the divergence proxy, exit code 3."""

    def __init__(self, fuel):
        self.fuel = fuel
        super().__init__(f"evaluation exceeded {fuel} rule applications")


class InconclusiveSearch(CofjError):
    """A bounded derivation search ran out of budget before settling."""

"""Parser for source programs and expressions.

Grammar (whitespace-insensitive, `//` line comments):

    program    := classdecl* ("main" expr ";")?
    classdecl  := "class" Id ("extends" Id)? "{" fielddecl* methoddecl* "}"
    fielddecl  := Type Id ";"
    methoddecl := Type Id "(" params ")" "{" expr "}" ("corec" "{" expr "}")?
    Type       := Id | "int" | "bool"
    expr       := ternary; `e1 ? e2 : e3` and `if (e1) e2 else e3` both build
                  a conditional; precedence comparison < additive <
                  multiplicative < postfix `.f` / `.m(args)`.

`extends Object` may be omitted.  `Math.min(a, b)` is accepted and desugared
to the binary minimum operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ParseError
from .syntax import (
    ANY,
    BinOp,
    BoolVal,
    Call,
    Capsule,
    Environment,
    FieldAccess,
    If,
    IntVal,
    New,
    Var,
    as_open,
    capsule_unchecked,
)
from .classtable import ClassDecl, FieldDecl, MethodDecl

KEYWORDS = {
    "class", "extends", "main", "corec", "new", "if", "else",
    "this", "any", "true", "false", "int", "bool", "where",
}

_SYMBOLS = (
    "==", "!=", "<=", ">=",
    "{", "}", "(", ")", ";", ",", ".", "?", ":", "=",
    "<", ">", "+", "-", "*", "/", "%",
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "id" | keyword | symbol | "eof"
    text: str
    line: int
    col: int


def tokenize(text: str):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("num", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in KEYWORDS else "id"
            tokens.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, line, col))
                col += len(sym)
                i += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class SourceProgram:
    classes: tuple
    main: Optional[object]


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def check(self, kind: str) -> bool:
        return self.peek().kind == kind

    def accept(self, kind: str) -> Optional[Token]:
        if self.check(kind):
            return self.advance()
        return None

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind in kinds:
            return self.advance()
        raise ParseError(
            f"unexpected {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
            tok.line,
            tok.col,
            expected=kinds,
        )

    # -- program structure ------------------------------------------------

    def program(self) -> SourceProgram:
        classes = []
        while self.check("class"):
            classes.append(self.classdecl())
        main = None
        if self.accept("main"):
            main = self.expr()
            self.expect(";")
        self.expect("eof")
        return SourceProgram(tuple(classes), main)

    def classdecl(self) -> ClassDecl:
        self.expect("class")
        name = self.expect("id").text
        superclass = "Object"
        if self.accept("extends"):
            superclass = self.expect("id").text
        self.expect("{")
        fields, methods = [], []
        while not self.check("}"):
            ftype = self.type_name()
            fname = self.expect("id").text
            if self.accept(";"):
                if methods:
                    tok = self.peek()
                    raise ParseError(
                        f"field {fname!r} declared after methods", tok.line, tok.col
                    )
                fields.append(FieldDecl(ftype, fname))
            else:
                methods.append(self.method_rest(ftype, fname))
        self.expect("}")
        return ClassDecl(name, superclass, tuple(fields), tuple(methods))

    def type_name(self) -> str:
        tok = self.expect("id", "int", "bool")
        return tok.text

    def method_rest(self, ret_type: str, name: str) -> MethodDecl:
        self.expect("(")
        params = []
        if not self.check(")"):
            while True:
                ptype = self.type_name()
                pname = self.expect("id").text
                params.append((ptype, pname))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("{")
        body = self.expr()
        self.expect("}")
        cobody = None
        if self.accept("corec"):
            self.expect("{")
            cobody = self.expr()
            self.expect("}")
        return MethodDecl(ret_type, name, tuple(params), body, cobody)

    # -- expressions -------------------------------------------------------

    def expr(self):
        return self.ternary()

    def ternary(self):
        cond = self.comparison()
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            orelse = self.expr()
            return If(cond, then, orelse)
        return cond

    def comparison(self):
        left = self.additive()
        while self.peek().kind in ("==", "!=", "<", "<=", ">", ">="):
            op = self.advance().kind
            left = BinOp(op, left, self.additive())
        return left

    def additive(self):
        left = self.multiplicative()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            left = BinOp(op, left, self.multiplicative())
        return left

    def multiplicative(self):
        left = self.unary()
        while self.peek().kind in ("*", "/", "%"):
            op = self.advance().kind
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.accept("-"):
            minus = self.unary()
            if isinstance(minus, IntVal):
                return IntVal(-minus.value)
            return BinOp("-", IntVal(0), minus)
        return self.postfix()

    def postfix(self):
        tok = self.peek()
        e = self.primary()
        while self.accept("."):
            member = self.expect("id").text
            if self.accept("("):
                args = self.call_args()
                if isinstance(e, Var) and e.name == "Math":
                    if member != "min" or len(args) != 2:
                        raise ParseError(
                            "only Math.min(a, b) is supported", tok.line, tok.col
                        )
                    e = BinOp("min", args[0], args[1])
                else:
                    e = Call(e, member, tuple(args))
            else:
                e = FieldAccess(e, member)
        if isinstance(e, Var) and e.name == "Math":
            raise ParseError("Math is usable only as Math.min(a, b)", tok.line, tok.col)
        return e

    def call_args(self):
        args = []
        if not self.check(")"):
            while True:
                args.append(self.expr())
                if not self.accept(","):
                    break
        self.expect(")")
        return args

    def primary(self):
        tok = self.peek()
        if self.accept("new"):
            cls = self.expect("id").text
            self.expect("(")
            args = self.call_args()
            return New(cls, tuple(args))
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.ternary()
            self.expect("else")
            orelse = self.expr()
            return If(cond, then, orelse)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("this"):
            return Var("this")
        if self.accept("any"):
            return ANY
        if self.accept("true"):
            return BoolVal(True)
        if self.accept("false"):
            return BoolVal(False)
        if self.check("num"):
            return IntVal(int(self.advance().text))
        if self.check("id"):
            return Var(self.advance().text)
        raise ParseError(
            f"unexpected {tok.text!r}" if tok.kind != "eof" else "unexpected end of input",
            tok.line,
            tok.col,
            expected=("new", "if", "(", "this", "any", "true", "false", "number", "identifier"),
        )


def parse_program(text: str) -> SourceProgram:
    return _Parser(text).program()


def parse_expr(text: str):
    p = _Parser(text)
    e = p.expr()
    p.expect("eof")
    return e


def parse_capsule(text: str) -> Capsule:
    """Parse the canonical capsule form `v` or `v where x0 = ...; x1 = ...`."""
    p = _Parser(text)
    start = p.peek()
    main = p.expr()
    bindings = []
    if p.accept("where"):
        while True:
            tok = p.peek()
            name = p.expect("id").text
            p.expect("=")
            rhs = p.expr()
            u = as_open(rhs)
            if u is None:
                raise ParseError(f"binding of {name} is not a value", tok.line, tok.col)
            bindings.append((name, u))
            if not p.accept(";"):
                break
    p.expect("eof")
    open_value = as_open(main)
    if open_value is None:
        raise ParseError("capsule body is not a value", start.line, start.col)
    return Capsule(open_value, Environment(bindings))

"""Textual formula syntax for debugging, fixtures, and the command line.

Grammar (ASCII):

    formula := disj ('->' formula)?
    disj    := conj ('|' conj)*
    conj    := unary ('&' unary)*
    unary   := '!' unary | 'E' vars '.' formula | 'A' vars '.' formula
             | '(' formula ')' | 'true' | 'false' | atom
    atom    := sum ('<' | '<=' | '=' | '>=' | '>') sum
    sum     := ['-'] term (('+' | '-') term)*
    term    := number ['*'] ident | number | ident

Numbers are integers, exact decimals (``1.1`` means 11/10) or
fractions ``p/q``.  Products of variables are rejected: the language is
linear by construction.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Optional

from .formula import (
    AffineExpr,
    And,
    Atom,
    Exists,
    FAtom,
    FFalse,
    FTrue,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    Rel,
    exists,
    fatom,
    fimp,
    fnot,
    forall,
    land,
    lor,
    sorted_atoms,
    var,
)
from .rationals import format_rat


class ParseError(ValueError):
    pass


class NonlinearError(ParseError):
    """The input contains a nonlinear term (variable product or power)."""


# 'E' and 'A' immediately followed by whitespace are quantifier heads;
# any other alphanumeric word is an identifier.
_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:/\d+)?)|(?P<quant>[EA](?=[ \t]))"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op><=|>=|->|[<>=!&|().+\-*^]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r} at {pos}")
        pos = m.end()
        for kind in ("num", "ident", "quant", "op"):
            tok = m.group(kind)
            if tok is not None:
                out.append((kind, tok))
                break
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> tuple[str, str]:
        return self.toks[self.i]

    def next(self) -> tuple[str, str]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str) -> None:
        kind, tok = self.next()
        if tok != value:
            raise ParseError(f"expected {value!r}, got {tok!r}")

    def formula(self) -> Formula:
        left = self.disj()
        if self.peek()[1] == "->":
            self.next()
            return fimp(left, self.formula())
        return left

    def disj(self) -> Formula:
        parts = [self.conj()]
        while self.peek()[1] == "|":
            self.next()
            parts.append(self.conj())
        return lor(*parts)

    def conj(self) -> Formula:
        parts = [self.unary()]
        while self.peek()[1] == "&":
            self.next()
            parts.append(self.unary())
        return land(*parts)

    def unary(self) -> Formula:
        kind, tok = self.peek()
        if tok == "!":
            self.next()
            return fnot(self.unary())
        if kind == "quant":
            self.next()
            names: list[str] = []
            while self.peek()[0] == "ident":
                names.append(self.next()[1])
            if not names:
                raise ParseError("quantifier with no variables")
            self.expect(".")
            body = self.formula()
            return exists(names, body) if tok == "E" else forall(names, body)
        if tok == "(":
            save = self.i
            self.next()
            try:
                inner = self.formula()
                self.expect(")")
            except ParseError:
                self.i = save
                return self.atom()
            if self.peek()[1] in ("<", "<=", "=", ">=", ">", "+", "-", "*"):
                self.i = save
                return self.atom()
            return inner
        if kind == "ident" and tok == "true":
            self.next()
            return FTrue()
        if kind == "ident" and tok == "false":
            self.next()
            return FFalse()
        return self.atom()

    def atom(self) -> Formula:
        lhs = self.sum()
        kind, tok = self.next()
        if tok not in ("<", "<=", "=", ">=", ">"):
            raise ParseError(f"expected a relation, got {tok!r}")
        rhs = self.sum()
        return fatom(Atom.make(lhs - rhs, Rel(tok)))

    def sum(self) -> AffineExpr:
        negate = False
        if self.peek()[1] == "-":
            self.next()
            negate = True
        expr = self.term()
        if negate:
            expr = -expr
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            t = self.term()
            expr = expr + t if op == "+" else expr - t
        return expr

    def term(self) -> AffineExpr:
        kind, tok = self.next()
        if kind == "num":
            coeff = Fraction(tok)
            nk, nt = self.peek()
            if nt == "*":
                self.next()
                nk, nt = self.peek()
                if nk != "ident":
                    raise ParseError(f"expected a variable after '*', got {nt!r}")
            if nk == "ident" and nt not in ("true", "false"):
                name = self.next()[1]
                self._reject_power()
                return AffineExpr(((name, coeff),))
            return AffineExpr((), coeff)
        if kind == "ident":
            self._reject_power()
            nk, nt = self.peek()
            if nt == "*" or nk in ("ident", "num"):
                raise NonlinearError("products of variables are not linear")
            return var(tok)
        if tok == "(":
            inner = self.sum()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected token {tok!r} in expression")

    def _reject_power(self) -> None:
        if self.peek()[1] == "^":
            raise NonlinearError("powers of variables are not linear")


def parse_formula(text: str) -> Formula:
    p = _Parser(_tokenize(text))
    f = p.formula()
    if p.peek()[0] != "end":
        raise ParseError(f"trailing input at token {p.peek()[1]!r}")
    return f


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _print_affine(e: AffineExpr) -> str:
    parts: list[str] = []
    for v, c in e.coeffs:
        if c == 1:
            term = v
        elif c == -1:
            term = f"-{v}"
        else:
            term = f"{format_rat(c)}*{v}"
        parts.append(term)
    if e.const != 0 or not parts:
        parts.append(format_rat(e.const))
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def print_atom(a: Atom) -> str:
    return f"{_print_affine(a.expr)} {a.rel.value} 0"


def print_formula(f: Formula) -> str:
    """Canonical text; ``parse_formula`` round-trips it syntactically."""
    return _pf(f, 0)


# precedence levels: 0 formula/implies, 1 or, 2 and, 3 unary
def _pf(f: Formula, level: int) -> str:
    if isinstance(f, FTrue):
        return "true"
    if isinstance(f, FFalse):
        return "false"
    if isinstance(f, FAtom):
        return print_atom(f.atom)
    if isinstance(f, Not):
        return f"!({_pf(f.arg, 0)})"
    if isinstance(f, (Exists, Forall)):
        q = "E" if isinstance(f, Exists) else "A"
        body = _pf(f.body, 0)
        text = f"{q} {' '.join(f.bound)}. {body}"
        return f"({text})" if level > 0 else text
    if isinstance(f, Implies):
        text = f"{_pf(f.head, 1)} -> {_pf(f.body, 0)}"
        return f"({text})" if level > 0 else text
    if isinstance(f, Or):
        text = " | ".join(_pf(g, 2) for g in f.args)
        return f"({text})" if level > 1 else text
    assert isinstance(f, And)
    text = " & ".join(_pf(g, 3) for g in f.args)
    return f"({text})" if level > 2 else text

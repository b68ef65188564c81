"""Parse and format polynomial expressions.

Grammar::

    expr   := ['+'|'-'] term (('+'|'-') term)*
    term   := factor (['*'] factor)*      # juxtaposition only after a number
    factor := ['-'] primary ['^' uint]
    primary:= number | var | '(' expr ')'

``3x^2`` is read as ``3*x^2``. An undeclared identifier made only of declared
single-letter variables (``xy``) is read as their product.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .polyring import Polynomial

MAX_EXPONENT = 63
MAX_DEPTH = 200

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


class ParseError(ValueError):
    """Base class for polynomial parsing errors."""


class PolynomialSyntaxError(ParseError):
    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at position {position}: {message}")


class UnknownVariable(ParseError):
    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        super().__init__(f"unknown variable {name!r}")


class ExponentOverflow(ParseError):
    def __init__(self, exponent: int, position: int | None = None):
        self.exponent = exponent
        self.position = position
        super().__init__(f"exponent {exponent} exceeds {MAX_EXPONENT}")


@dataclass(frozen=True)
class VariableTable:
    names: tuple[str, ...]
    index: dict[str, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise ValueError("variable table is empty")
        for name in names:
            if not isinstance(name, str) or not _IDENT.match(name):
                raise ValueError(f"invalid variable name {name!r}")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        object.__setattr__(self, "index", {v: i for i, v in enumerate(names)})

    @classmethod
    def from_string(cls, text: str) -> "VariableTable":
        return cls(tuple(s.strip() for s in text.split(",") if s.strip()))

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def extended(self, extra) -> "VariableTable":
        return VariableTable(self.names + tuple(extra))


class _Parser:
    def __init__(self, text: str, vars: VariableTable):
        self.text = text
        self.vars = vars
        self.n = len(vars)
        self.toks = self._tokenize(text)
        self.pos = 0
        self.depth = 0

    def _tokenize(self, text):
        toks = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch in " \t\r\n":
                i += 1
            elif ch in "+-*^()":
                toks.append((ch, ch, i))
                i += 1
            elif ch.isascii() and (ch.isdigit() or ch == "."):
                m = _NUMBER.match(text, i)
                if m is None:
                    raise PolynomialSyntaxError(i, "malformed number")
                toks.append(("num", m.group(0), i))
                i = m.end()
            elif ch.isascii() and ch.isalpha():
                j = i + 1
                while j < len(text) and text[j].isascii() and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                toks.extend(self._split_identifier(text[i:j], i))
                i = j
            else:
                raise PolynomialSyntaxError(i, f"unexpected character {ch!r}")
        toks.append(("end", "", len(text)))
        return toks

    def _split_identifier(self, name, start):
        if name in self.vars.index:
            return [("var", name, start)]
        if all(c in self.vars.index for c in name):
            toks = []
            for k, c in enumerate(name):
                if k:
                    toks.append(("*", "*", start + k))
                toks.append(("var", c, start + k))
            return toks
        raise UnknownVariable(name, start)

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.take()
        if tok[0] != kind:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise PolynomialSyntaxError(tok[2], f"expected {kind!r}, found {what}")
        return tok

    def parse(self) -> Polynomial:
        if not self.text.strip():
            raise PolynomialSyntaxError(0, "empty expression")
        p = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise PolynomialSyntaxError(tok[2], f"unexpected {tok[1]!r}")
        return p

    def expr(self) -> Polynomial:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise PolynomialSyntaxError(self.peek()[2], "expression nested too deeply")
        sign = 1.0
        if self.peek()[0] in "+-":
            sign = -1.0 if self.take()[0] == "-" else 1.0
        acc = self.term().scale(sign)
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            t = self.term()
            acc = acc + t if op == "+" else acc - t
        self.depth -= 1
        return acc

    def term(self) -> Polynomial:
        acc, last = self.factor()
        while True:
            kind = self.peek()[0]
            if kind == "*":
                self.take()
                f, last = self.factor()
            elif last == "num" and kind == "var":
                f, last = self.factor()
            else:
                return acc
            acc = self._checked(acc * f)

    def factor(self):
        tok = self.peek()
        if tok[0] == "-":
            self.take()
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise PolynomialSyntaxError(tok[2], "expression nested too deeply")
            f, kind = self.factor()
            self.depth -= 1
            return -f, kind
        tok = self.take()
        if tok[0] == "num":
            value = float(tok[1])
            if value != value or value in (float("inf"), float("-inf")):
                raise PolynomialSyntaxError(tok[2], "number out of range")
            base, kind = Polynomial.constant(self.n, value), "num"
        elif tok[0] == "var":
            base, kind = Polynomial.variable(self.n, self.vars.index[tok[1]]), "var"
        elif tok[0] == "(":
            base = self.expr()
            self.expect(")")
            kind = "paren"
        else:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise PolynomialSyntaxError(tok[2], f"expected a number, variable or '(', found {what}")
        if self.peek()[0] == "^":
            self.take()
            etok = self.take()
            if etok[0] != "num" or not etok[1].isdigit():
                raise PolynomialSyntaxError(etok[2], "exponent must be a non-negative integer")
            e = int(etok[1])
            if e > MAX_EXPONENT:
                raise ExponentOverflow(e, etok[2])
            base = self._checked(base ** e)
            kind = "pow"
        return base, kind

    def _checked(self, p: Polynomial) -> Polynomial:
        for m in p.terms:
            for e in m:
                if e > MAX_EXPONENT:
                    raise ExponentOverflow(e)
        return p


def parse_polynomial(text: str, vars: VariableTable) -> Polynomial:
    """Parse ``text`` into a polynomial over the variables in ``vars``."""
    if isinstance(vars, (list, tuple)):
        vars = VariableTable(tuple(vars))
    return _Parser(text, vars).parse()


def _format_coefficient(c: float) -> str:
    if c == int(c) and abs(c) < 1e16:
        return str(int(c))
    return repr(c)


def format_polynomial(p: Polynomial, vars: VariableTable) -> str:
    """Render ``p`` with highest graded-lex terms first; parses back exactly."""
    if isinstance(vars, (list, tuple)):
        vars = VariableTable(tuple(vars))
    if len(vars) != p.n:
        raise ValueError(f"{len(vars)} names for a polynomial in {p.n} variables")
    if p.is_zero():
        return "0"
    parts = []
    for m in sorted(p.terms, key=lambda m: (-sum(m), tuple(-e for e in m))):
        c = p.coefficient(m)
        powers = [name if e == 1 else f"{name}^{e}" for name, e in zip(vars.names, m) if e]
        mag = abs(c)
        if not powers:
            body = _format_coefficient(mag)
        elif mag == 1.0:
            body = "*".join(powers)
        else:
            body = _format_coefficient(mag) + "*" + "*".join(powers)
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts)

"""Formula text to expression trees and back.

The grammar is the conventional spreadsheet one.  Binding from loosest
to tightest: comparisons, text join (&), addition, multiplication,
exponentiation (left-associative), the percent postfix, then unary
sign, so -2^3 is (-2)^3 and -5% is (-5)%.  A leading = is accepted and
braces around the whole formula mark array entry.

Expression nodes are frozen dataclasses, so structurally equal
subtrees compare and hash equal; the tracer leans on that to
deduplicate repeated subexpressions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .grid import (
    A1_PATTERN,
    CellAddress,
    MAX_COLS,
    MAX_ROWS,
    RangeRef,
    letters_to_column,
)
from .values import BLANK, CellError, OMITTED, _Sentinel, render_number


class FormulaError(Exception):
    """A lexical or syntax problem, with the 0-based source offset."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # "number", "string", "ident", "op", "(", ")", ",", ":", "{", "}", "end"
    text: str
    offset: int


_NUMBER_TOKEN = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_TOKEN = re.compile(r"\$?[A-Za-z_][A-Za-z0-9_.$]*")
_TWO_CHAR_OPS = ("<=", ">=", "<>")
_ONE_CHAR_OPS = "=<>&+-*/^%"
_PUNCT = "(),:{}"


def tokenize(text: str) -> list[Token]:
    """Lex a formula into tokens, ending with a synthetic "end" token."""
    tokens: list[Token] = []
    pos = 0
    size = len(text)
    while pos < size:
        ch = text[pos]
        if ch in " \t\r\n":
            pos += 1
            continue
        if text[pos:pos + 2] in _TWO_CHAR_OPS:
            tokens.append(Token("op", text[pos:pos + 2], pos))
            pos += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token("op", ch, pos))
            pos += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(ch, ch, pos))
            pos += 1
            continue
        if ch == '"':
            end = pos + 1
            while True:
                if end >= size:
                    raise FormulaError(pos, "unterminated string literal")
                if text[end] == '"':
                    if end + 1 < size and text[end + 1] == '"':
                        end += 2  # doubled quote is an escaped quote
                        continue
                    break
                end += 1
            tokens.append(Token("string", text[pos:end + 1], pos))
            pos = end + 1
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < size and text[pos + 1].isdigit()):
            m = _NUMBER_TOKEN.match(text, pos)
            tokens.append(Token("number", m.group(0), pos))
            pos = m.end()
            continue
        m = _IDENT_TOKEN.match(text, pos)
        if m:
            tokens.append(Token("ident", m.group(0), pos))
            pos = m.end()
            continue
        raise FormulaError(pos, f"unexpected character {ch!r}")
    tokens.append(Token("end", "", size))
    return tokens


@dataclass(frozen=True)
class Literal:
    value: Union[float, str, bool, CellError, _Sentinel]


@dataclass(frozen=True)
class Ref:
    addr: CellAddress


@dataclass(frozen=True)
class RangeLit:
    rng: RangeRef


@dataclass(frozen=True)
class Unary:
    op: str  # "-", "+" or the "%" postfix
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str  # stored uppercase
    args: tuple["Expr", ...]


Expr = Union[Literal, Ref, RangeLit, Unary, Binary, Call]


@dataclass(frozen=True)
class Formula:
    """A parsed formula plus its entry mode."""

    expr: Expr
    array_entered: bool


_COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise FormulaError(tok.offset, f"expected {kind!r}")
        return self.advance()

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    # precedence ladder, loosest first

    def comparison(self) -> Expr:
        node = self.concat()
        while self.at_op(*_COMPARISON_OPS):
            op = self.advance().text
            node = Binary(op, node, self.concat())
        return node

    def concat(self) -> Expr:
        node = self.additive()
        while self.at_op("&"):
            self.advance()
            node = Binary("&", node, self.additive())
        return node

    def additive(self) -> Expr:
        node = self.multiplicative()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.multiplicative())
        return node

    def multiplicative(self) -> Expr:
        node = self.power()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.power())
        return node

    def power(self) -> Expr:
        node = self.postfix()
        while self.at_op("^"):
            self.advance()
            node = Binary("^", node, self.postfix())
        return node

    def postfix(self) -> Expr:
        node = self.unary()
        while self.at_op("%"):
            self.advance()
            node = Unary("%", node)
        return node

    def unary(self) -> Expr:
        if self.at_op("-", "+"):
            op = self.advance().text
            return Unary(op, self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Literal(float(tok.text))
        if tok.kind == "string":
            self.advance()
            return Literal(tok.text[1:-1].replace('""', '"'))
        if tok.kind == "(":
            self.advance()
            node = self.comparison()
            self.expect(")")
            return node
        if tok.kind == "ident":
            return self.name()
        raise FormulaError(tok.offset, "expected a value")

    def name(self) -> Expr:
        tok = self.advance()
        if self.peek().kind == "(":
            return self.call(tok)
        upper = tok.text.upper()
        if upper == "TRUE":
            return Literal(True)
        if upper == "FALSE":
            return Literal(False)
        first = self.cell_of(tok)
        if self.peek().kind == ":":
            self.advance()
            second = self.cell_of(self.expect("ident"))
            return RangeLit(RangeRef.make(first, second))
        return Ref(first)

    def cell_of(self, tok: Token) -> CellAddress:
        m = A1_PATTERN.match(tok.text)
        if not m:
            raise FormulaError(tok.offset, f"unknown name {tok.text!r}")
        col = letters_to_column(m.group(1))
        row = int(m.group(2))
        if col > MAX_COLS or row > MAX_ROWS or row < 1:
            raise FormulaError(tok.offset, f"cell reference out of range: {tok.text}")
        return CellAddress(col, row)

    def call(self, name_tok: Token) -> Expr:
        self.expect("(")
        args: list[Expr] = []
        if self.peek().kind == ")":
            self.advance()
            return Call(name_tok.text.upper(), ())
        while True:
            if self.peek().kind in (",", ")"):
                args.append(Literal(OMITTED))  # empty slot
            else:
                args.append(self.comparison())
            if self.peek().kind == ",":
                self.advance()
                continue
            self.expect(")")
            return Call(name_tok.text.upper(), tuple(args))


def parse_formula(text: str) -> Formula:
    """Parse formula text, accepting a leading = and array braces.

    Braces must wrap the entire formula; they set the array-entered
    flag rather than appearing in the tree.
    """
    tokens = tokenize(text)
    array_entered = False
    if tokens and tokens[0].kind == "{":
        if len(tokens) < 3 or tokens[-2].kind != "}":
            raise FormulaError(tokens[0].offset,
                               "array braces must wrap the whole formula")
        array_entered = True
        end = tokens[-1]
        tokens = tokens[1:-2] + [end]
    if tokens and tokens[0].kind == "op" and tokens[0].text == "=":
        tokens = tokens[1:]
    parser = _Parser(tokens)
    first = parser.peek()
    if first.kind == "end":
        raise FormulaError(first.offset, "empty formula")
    expr = parser.comparison()
    trailing = parser.peek()
    if trailing.kind != "end":
        raise FormulaError(trailing.offset, "unexpected trailing input")
    return Formula(expr, array_entered)


def parse_expression(text: str) -> Expr:
    return parse_formula(text).expr


_BINARY_LEVEL = {
    "=": 1, "<>": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
    "&": 2,
    "+": 3, "-": 3,
    "*": 4, "/": 4,
    "^": 5,
}
_LEVEL_POSTFIX = 6
_LEVEL_UNARY = 7
_LEVEL_ATOM = 8


def _level(expr: Expr) -> int:
    if isinstance(expr, Binary):
        return _BINARY_LEVEL[expr.op]
    if isinstance(expr, Unary):
        return _LEVEL_POSTFIX if expr.op == "%" else _LEVEL_UNARY
    return _LEVEL_ATOM


def unparse(expr: Expr) -> str:
    """Render a tree back to text with only the parentheses it needs.

    parse_expression(unparse(e)) reproduces e exactly.  Number
    literals are non-negative by construction (a negative constant
    parses as unary minus), so rendering never has to guard a sign.
    """
    if isinstance(expr, Literal):
        value = expr.value
        if value is OMITTED:
            return ""
        if value is BLANK:
            return ""
        if isinstance(value, bool):
            return "TRUE" if value else "FALSE"
        if isinstance(value, float):
            return render_number(value)
        if isinstance(value, CellError):
            return str(value)
        return '"' + value.replace('"', '""') + '"'
    if isinstance(expr, Ref):
        return expr.addr.a1
    if isinstance(expr, RangeLit):
        return expr.rng.a1
    if isinstance(expr, Unary):
        if expr.op == "%":
            return _paren_if_looser(expr.operand, _LEVEL_POSTFIX) + "%"
        return expr.op + _paren_if_looser(expr.operand, _LEVEL_UNARY)
    if isinstance(expr, Binary):
        level = _BINARY_LEVEL[expr.op]
        left = _paren_if_looser(expr.left, level)
        # every binary operator associates left, so an equal-level
        # right child keeps its parentheses
        right_text = unparse(expr.right)
        if _level(expr.right) <= level:
            right_text = f"({right_text})"
        return f"{left}{expr.op}{right_text}"
    if isinstance(expr, Call):
        return expr.name + "(" + ",".join(unparse(a) for a in expr.args) + ")"
    raise TypeError(f"not an expression node: {expr!r}")


def _paren_if_looser(expr: Expr, level: int) -> str:
    text = unparse(expr)
    if _level(expr) < level:
        return f"({text})"
    return text


def formula_text(formula: Formula) -> str:
    """Canonical full-formula text, with braces when array-entered."""
    body = "=" + unparse(formula.expr)
    if formula.array_entered:
        return "{" + body + "}"
    return body

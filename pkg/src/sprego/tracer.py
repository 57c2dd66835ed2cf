"""Stepwise formula traces.

A multilevel formula is easiest to understand inside-out.  decompose()
lists every distinct non-leaf sub-expression in post-order (children
before parents, repeats dropped at first sight), and trace() evaluates
each of those steps independently against the same sheet snapshot,
yielding a table whose columns progress from the innermost call to the
complete formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .evaluator import EvalContext, evaluate
from .grid import RangeRef
from .parser import (
    Binary,
    Call,
    Expr,
    Formula,
    Literal,
    RangeLit,
    Ref,
    Unary,
    parse_formula,
    unparse,
)
from .values import ArrayValue, BLANK, Scalar, render


class TraceError(Exception):
    """Raised when a formula cannot be laid out as a row-per-input table."""


def _children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, Unary):
        return (expr.operand,)
    if isinstance(expr, Binary):
        return (expr.left, expr.right)
    if isinstance(expr, Call):
        return expr.args
    return ()


def decompose(expr: Expr) -> list[Expr]:
    """Distinct non-leaf sub-expressions, innermost first.

    Post-order guarantees every step only builds on earlier ones; the
    last step is the whole expression.  Literals and bare references
    are not steps, and a subtree that occurs twice (like the repeated
    RIGHT(...) argument when trimming a trailing character) is listed
    once, where it first appears.
    """
    steps: list[Expr] = []
    seen: set[Expr] = set()

    def visit(node: Expr) -> None:
        if node in seen or isinstance(node, (Literal, Ref, RangeLit)):
            return
        for child in _children(node):
            visit(child)
        if node not in seen:
            seen.add(node)
            steps.append(node)

    visit(expr)
    return steps


@dataclass(frozen=True)
class TraceStep:
    label: str
    expr: Expr
    text: str
    results: ArrayValue  # one row per input row


@dataclass(frozen=True)
class TraceTable:
    input_header: Optional[str]
    input_values: tuple[Scalar, ...]
    steps: tuple[TraceStep, ...]
    rows: int


def _first_range(expr: Expr) -> Optional[RangeRef]:
    if isinstance(expr, RangeLit):
        return expr.rng
    for child in _children(expr):
        found = _first_range(child)
        if found is not None:
            return found
    return None


def _normalize(value, rows: int) -> ArrayValue:
    if not isinstance(value, ArrayValue):
        return ArrayValue(rows, 1, (value,) * rows)
    if value.rows == rows:
        return value
    if value.rows == 1:
        return ArrayValue(rows, value.cols, value.cells * rows)
    raise TraceError(
        f"step produced {value.rows} rows where the trace has {rows}")


def trace(
    source: Union[str, Formula],
    ctx: EvalContext,
    input_range: Optional[RangeRef] = None,
) -> TraceTable:
    """Evaluate a formula one decomposition step at a time.

    The input column defaults to the first range mentioned in the
    formula; a formula with no range traces as a single row.  Every
    step is evaluated array-entered over the same sheet, scalars
    repeating down the column.
    """
    formula = parse_formula(source) if isinstance(source, str) else source
    step_exprs = decompose(formula.expr)
    if not step_exprs:
        step_exprs = [formula.expr]  # constants and bare refs still trace
    run_ctx = ctx.entered(True)

    if input_range is None:
        input_range = _first_range(formula.expr)
    header: Optional[str] = None
    input_values: tuple[Scalar, ...] = ()
    if input_range is not None:
        if input_range.cols != 1:
            raise TraceError("the input range must be a single column")
        input_values = ctx.sheet.get_range(input_range).cells
        header = input_range.a1
        top = input_range.top_left
        if top.row > 1:
            above = ctx.sheet.get(top.offset(-1, 0))
            if above is not BLANK:
                header = render(above)

    raw = [(expr, evaluate(expr, run_ctx)) for expr in step_exprs]
    if input_range is not None:
        rows = input_range.rows
    else:
        rows = max((v.rows for _, v in raw if isinstance(v, ArrayValue)),
                   default=1)
    steps = tuple(
        TraceStep(f"S{i}", expr, unparse(expr), _normalize(value, rows))
        for i, (expr, value) in enumerate(raw, start=1))
    return TraceTable(header, input_values, steps, rows)


def render_tsv(table: TraceTable) -> str:
    """Trace table as TSV: a label header row, then one row per input."""
    has_input = table.input_header is not None
    header: list[str] = [table.input_header] if has_input else []
    header.extend(step.label for step in table.steps)
    lines = ["\t".join(header)]
    for r in range(table.rows):
        row: list[str] = []
        if has_input:
            row.append(render(table.input_values[r]))
        for step in table.steps:
            rendered = (render(step.results.get(r, c))
                        for c in range(step.results.cols))
            row.append(", ".join(rendered))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"

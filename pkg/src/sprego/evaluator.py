"""Expression evaluation with element-wise lifting over arrays.

Scalar operations are written once, for scalars; when an array turns
up in a scalar position the evaluation is repeated per element with
broadcasting (scalars pair with everything, a 1xN or Mx1 operand
stretches along its short axis).  Outside array entry a multi-cell
array in a scalar position is a #VALUE! error instead; there is no
implicit intersection.

Errors are values, not exceptions: they flow out of individual
elements and poison exactly the results that depend on them.
Evaluation never mutates the sheet.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .functions import REF, SCALAR, lookup
from .grid import CellAddress, RangeRef, Sheet
from .parser import Binary, Call, Expr, Formula, Literal, RangeLit, Ref, Unary
from .values import (
    ArrayValue,
    CellError,
    DIV0_ERR,
    NAME_ERR,
    NUM_ERR,
    OMITTED,
    Scalar,
    VALUE_ERR,
    Value,
    coerce_to_number,
    coerce_to_text,
    compare,
    is_truthy,
)


@dataclass
class EvalContext:
    """Everything one evaluation needs: the sheet snapshot, the entry
    mode, the formula's own cell (for ROW/COLUMN) and the random
    stream backing RAND."""

    sheet: Sheet
    array_entered: bool = False
    anchor: CellAddress = CellAddress(1, 1)
    rng: random.Random = field(default_factory=random.Random)

    def entered(self, array_entered: bool) -> "EvalContext":
        return replace(self, array_entered=array_entered)


def _finite(value: float) -> Value:
    return value if math.isfinite(value) else NUM_ERR


def _k_add(a: Scalar, b: Scalar) -> Value:
    x = coerce_to_number(a)
    if isinstance(x, CellError):
        return x
    y = coerce_to_number(b)
    if isinstance(y, CellError):
        return y
    return _finite(x + y)


def _k_sub(a: Scalar, b: Scalar) -> Value:
    x = coerce_to_number(a)
    if isinstance(x, CellError):
        return x
    y = coerce_to_number(b)
    if isinstance(y, CellError):
        return y
    return _finite(x - y)


def _k_mul(a: Scalar, b: Scalar) -> Value:
    x = coerce_to_number(a)
    if isinstance(x, CellError):
        return x
    y = coerce_to_number(b)
    if isinstance(y, CellError):
        return y
    return _finite(x * y)


def _k_div(a: Scalar, b: Scalar) -> Value:
    x = coerce_to_number(a)
    if isinstance(x, CellError):
        return x
    y = coerce_to_number(b)
    if isinstance(y, CellError):
        return y
    if y == 0.0:
        return DIV0_ERR
    return _finite(x / y)


def _k_pow(a: Scalar, b: Scalar) -> Value:
    x = coerce_to_number(a)
    if isinstance(x, CellError):
        return x
    y = coerce_to_number(b)
    if isinstance(y, CellError):
        return y
    if x == 0.0 and y == 0.0:
        return NUM_ERR
    if x == 0.0 and y < 0.0:
        return DIV0_ERR
    try:
        result = x ** y
    except (OverflowError, ValueError, ZeroDivisionError):
        return NUM_ERR
    if isinstance(result, complex):
        return NUM_ERR
    return _finite(result)


def _k_concat(a: Scalar, b: Scalar) -> Value:
    x = coerce_to_text(a)
    if isinstance(x, CellError):
        return x
    y = coerce_to_text(b)
    if isinstance(y, CellError):
        return y
    return x + y


def _k_neg(a: Scalar) -> Value:
    x = coerce_to_number(a)
    if isinstance(x, CellError):
        return x
    return -x


def _k_percent(a: Scalar) -> Value:
    x = coerce_to_number(a)
    if isinstance(x, CellError):
        return x
    return x / 100.0


def _comparison_kernel(op: str) -> Callable[[Scalar, Scalar], Value]:
    def kernel(a: Scalar, b: Scalar) -> Value:
        return compare(a, b, op)
    return kernel


_BINARY_KERNELS: dict[str, Callable[[Scalar, Scalar], Value]] = {
    "+": _k_add,
    "-": _k_sub,
    "*": _k_mul,
    "/": _k_div,
    "^": _k_pow,
    "&": _k_concat,
    **{op: _comparison_kernel(op) for op in ("=", "<>", "<", "<=", ">", ">=")},
}


def broadcast_shape(shapes: list[tuple[int, int]]) -> Optional[tuple[int, int]]:
    """Common shape of the given array shapes, or None if they clash.

    An axis of length 1 stretches to match; two different lengths
    above 1 on the same axis are incompatible.
    """
    rows, cols = 1, 1
    for r, c in shapes:
        if r != 1:
            if rows == 1:
                rows = r
            elif r != rows:
                return None
        if c != 1:
            if cols == 1:
                cols = c
            elif c != cols:
                return None
    return rows, cols


def _element_at(value: Value, row: int, col: int) -> Scalar:
    if not isinstance(value, ArrayValue):
        return value
    return value.get(row if value.rows > 1 else 0,
                     col if value.cols > 1 else 0)


def lift(
    kernel: Callable[..., Value],
    args: list[Value],
    ctx: EvalContext,
    *,
    lifted: Optional[list[int]] = None,
    captures_errors: bool = False,
) -> Value:
    """Apply a scalar kernel, repeating it element-wise over arrays.

    Only the positions named in `lifted` participate (all of them by
    default); other arguments pass through whole on every element
    call.  Unless the kernel captures errors, an error in a lifted
    argument short-circuits that element (first error in argument
    order wins).  A kernel that produces an array for a single
    element cannot be represented and yields #VALUE! there.
    """
    if lifted is None:
        lifted = list(range(len(args)))
    arrays = [i for i in lifted if isinstance(args[i], ArrayValue)]

    if arrays and not ctx.array_entered:
        args = list(args)
        for i in arrays:
            array = args[i]
            if array.rows == 1 and array.cols == 1:
                args[i] = array.first()
            else:
                return VALUE_ERR  # no implicit intersection
        arrays = []

    def apply_once(call_args: list) -> Value:
        if not captures_errors:
            for i in lifted:
                if isinstance(call_args[i], CellError):
                    return call_args[i]
        return kernel(*call_args)

    if not arrays:
        # single application: the kernel may legitimately produce a
        # whole array (TRANSPOSE, a resized OFFSET, ROW over a range)
        return apply_once(list(args))

    def apply_element(call_args: list) -> Scalar:
        result = apply_once(call_args)
        if isinstance(result, ArrayValue):
            # an array per element cannot nest inside the result
            if result.rows == 1 and result.cols == 1:
                return result.first()
            return VALUE_ERR
        return result

    shape = broadcast_shape([args[i].shape for i in arrays])
    if shape is None:
        return VALUE_ERR
    rows, cols = shape
    cells: list[Scalar] = []
    for r in range(rows):
        for c in range(cols):
            element_args = list(args)
            for i in arrays:
                element_args[i] = _element_at(args[i], r, c)
            cells.append(apply_element(element_args))
    return ArrayValue(rows, cols, tuple(cells))


def display_value(value: Value) -> Scalar:
    """What a single cell shows: an array displays its first element."""
    if isinstance(value, ArrayValue):
        return value.first()
    return value


def _branch_result(expr: Optional[Expr], ctx: EvalContext,
                   absent_default: Value) -> Value:
    if expr is None:
        return absent_default
    if isinstance(expr, Literal) and expr.value is OMITTED:
        return 0.0  # IF(c,,x): present-but-empty slot counts as 0
    return evaluate(expr, ctx)


def eval_if(args: tuple[Expr, ...], ctx: EvalContext) -> Value:
    """IF(condition, then, else?).

    With a scalar condition only the selected branch is evaluated.
    With an array condition (array entry) both branches are computed
    once and chosen element-wise; since errors are plain values this
    is observationally the same, element by element.  A false
    condition with no else argument gives FALSE, and an empty slot
    gives 0.
    """
    condition = evaluate(args[0], ctx)
    then_expr = args[1]
    else_expr = args[2] if len(args) > 2 else None

    if isinstance(condition, ArrayValue) and not ctx.array_entered:
        if condition.rows == 1 and condition.cols == 1:
            condition = condition.first()
        else:
            return VALUE_ERR

    if not isinstance(condition, ArrayValue):
        truth = is_truthy(condition)
        if isinstance(truth, CellError):
            return truth
        if truth:
            return _branch_result(then_expr, ctx, absent_default=0.0)
        return _branch_result(else_expr, ctx, absent_default=False)

    then_value = _branch_result(then_expr, ctx, absent_default=0.0)
    else_value = _branch_result(else_expr, ctx, absent_default=False)
    operands = [condition, then_value, else_value]
    shape = broadcast_shape([v.shape for v in operands
                             if isinstance(v, ArrayValue)])
    if shape is None:
        return VALUE_ERR
    rows, cols = shape
    cells: list[Scalar] = []
    for r in range(rows):
        for c in range(cols):
            truth = is_truthy(_element_at(condition, r, c))
            if isinstance(truth, CellError):
                cells.append(truth)
            elif truth:
                cells.append(_element_at(then_value, r, c))
            else:
                cells.append(_element_at(else_value, r, c))
    return ArrayValue(rows, cols, tuple(cells))


def _eval_call(call: Call, ctx: EvalContext) -> Value:
    descriptor = lookup(call.name)
    if descriptor is None:
        return NAME_ERR
    count = len(call.args)
    if count < descriptor.min_args:
        return VALUE_ERR
    if descriptor.max_args is not None and count > descriptor.max_args:
        return VALUE_ERR
    if descriptor.lazy:
        return eval_if(call.args, ctx)

    prepared: list = []
    lifted: list[int] = []
    for index, arg_expr in enumerate(call.args):
        mode = descriptor.mode_for(index)
        if mode == REF:
            if isinstance(arg_expr, Ref):
                prepared.append(RangeRef.cell(arg_expr.addr))
            elif isinstance(arg_expr, RangeLit):
                prepared.append(arg_expr.rng)
            else:
                return VALUE_ERR  # these arguments must be references
        else:
            prepared.append(evaluate(arg_expr, ctx))
            if mode == SCALAR:
                lifted.append(index)

    def kernel(*call_args):
        return descriptor.impl(ctx, list(call_args))

    return lift(kernel, prepared, ctx, lifted=lifted,
                captures_errors=descriptor.captures_errors)


def evaluate(expr: Expr, ctx: EvalContext) -> Value:
    """Evaluate an expression tree against the context's sheet."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Ref):
        return ctx.sheet.get(expr.addr)
    if isinstance(expr, RangeLit):
        return ctx.sheet.get_range(expr.rng)
    if isinstance(expr, Unary):
        if expr.op == "+":
            return evaluate(expr.operand, ctx)  # sign-preserving no-op
        kernel = _k_neg if expr.op == "-" else _k_percent
        return lift(kernel, [evaluate(expr.operand, ctx)], ctx)
    if isinstance(expr, Binary):
        operands = [evaluate(expr.left, ctx), evaluate(expr.right, ctx)]
        return lift(_BINARY_KERNELS[expr.op], operands, ctx)
    if isinstance(expr, Call):
        return _eval_call(expr, ctx)
    raise TypeError(f"not an expression node: {expr!r}")


def evaluate_formula(formula: Formula, ctx: EvalContext) -> Value:
    """Evaluate with the formula's own entry mode."""
    return evaluate(formula.expr, ctx.entered(formula.array_entered))

"""The built-in worksheet functions.

A deliberately small, composable set: aggregates, text slicing and
searching, the conditional, lookup, logic, structure helpers and a
few numeric utilities.  Every function is described by a
FunctionDescriptor that tells the evaluator how to prepare each
argument:

* SCALAR arguments are lifted element-wise over arrays, so kernels
  see plain scalars and are called once per element.
* ARRAY arguments arrive whole (scalars stay scalars; kernels that
  need a rectangle wrap them as 1x1).
* REF arguments are never evaluated; the evaluator resolves the
  argument expression to a range and passes the range itself.

Unless a descriptor sets captures_errors, the evaluator propagates an
error found in a SCALAR argument before the kernel runs, so kernels
only defend against errors coming out of their own coercions and out
of ARRAY elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP, localcontext
from typing import TYPE_CHECKING, Callable, Optional

from .grid import CellAddress, MAX_COLS, MAX_ROWS, RangeRef
from .values import (
    ArrayValue,
    BLANK,
    CellError,
    DIV0_ERR,
    NA_ERR,
    NUM_ERR,
    OMITTED,
    REF_ERR,
    Scalar,
    VALUE_ERR,
    Value,
    compare,
    is_truthy,
    parse_number,
    coerce_to_number,
    coerce_to_text,
)

if TYPE_CHECKING:
    from .evaluator import EvalContext

SCALAR = "scalar"
ARRAY = "array"
REF = "ref"


@dataclass(frozen=True)
class FunctionDescriptor:
    name: str
    min_args: int
    max_args: Optional[int]  # None means unlimited
    modes: tuple[str, ...]  # per position; the last mode repeats
    impl: Optional[Callable]
    volatile: bool = False
    captures_errors: bool = False
    lazy: bool = False  # evaluated by special-case logic, not a kernel

    def mode_for(self, index: int) -> str:
        if index < len(self.modes):
            return self.modes[index]
        return self.modes[-1] if self.modes else SCALAR


def _truncate(value: float) -> int:
    # spreadsheet count arguments drop the fraction toward zero
    return int(value)


def _finite(value: float) -> Value:
    return value if math.isfinite(value) else NUM_ERR


# ---------------------------------------------------------------- text

def fn_left(ctx: "EvalContext", args: list) -> Value:
    """LEFT(text, count=1): leading characters of text.

    A fractional count is truncated; a negative count is an error and
    a count beyond the length returns the whole text.
    """
    text = coerce_to_text(args[0])
    count = coerce_to_number(args[1]) if len(args) > 1 else 1.0
    if isinstance(count, CellError):
        return count
    n = _truncate(count)
    if n < 0:
        return VALUE_ERR
    return text[:n]


def fn_right(ctx: "EvalContext", args: list) -> Value:
    """RIGHT(text, count=1): trailing characters of text."""
    text = coerce_to_text(args[0])
    count = coerce_to_number(args[1]) if len(args) > 1 else 1.0
    if isinstance(count, CellError):
        return count
    n = _truncate(count)
    if n < 0:
        return VALUE_ERR
    if n == 0:
        return ""
    return text[-n:]


def fn_len(ctx: "EvalContext", args: list) -> Value:
    return float(len(coerce_to_text(args[0])))


def _find_core(needle: str, hay: str, args: list, fold: bool) -> Value:
    start = coerce_to_number(args[2]) if len(args) > 2 else 1.0
    if isinstance(start, CellError):
        return start
    at = _truncate(start)
    if at < 1 or at > len(hay) + 1:
        return VALUE_ERR
    if needle == "":
        return float(at)
    if fold:
        needle, hay = needle.lower(), hay.lower()
    index = hay.find(needle, at - 1)
    if index < 0:
        return VALUE_ERR
    return float(index + 1)


def fn_find(ctx: "EvalContext", args: list) -> Value:
    """FIND(needle, text, start=1): case-sensitive position, 1-based.

    A miss is an error value, which is what makes ISERROR(FIND(...))
    a usable containment test.
    """
    return _find_core(coerce_to_text(args[0]), coerce_to_text(args[1]), args, fold=False)


def fn_search(ctx: "EvalContext", args: list) -> Value:
    """SEARCH(needle, text, start=1): like FIND but case-insensitive."""
    return _find_core(coerce_to_text(args[0]), coerce_to_text(args[1]), args, fold=True)


def fn_substitute(ctx: "EvalContext", args: list) -> Value:
    """SUBSTITUTE(text, old, new, instance?).

    Replaces every occurrence, or only the instance-th when given.
    An instance below 1 is an error; one beyond the number of
    occurrences, or an empty old string, leaves the text unchanged.
    """
    text = coerce_to_text(args[0])
    old = coerce_to_text(args[1])
    new = coerce_to_text(args[2])
    if old == "":
        return text
    if len(args) < 4:
        return text.replace(old, new)
    instance = coerce_to_number(args[3])
    if isinstance(instance, CellError):
        return instance
    which = _truncate(instance)
    if which < 1:
        return VALUE_ERR
    index = -1
    for _ in range(which):
        index = text.find(old, index + 1)
        if index < 0:
            return text
    return text[:index] + new + text[index + len(old):]


# ------------------------------------------------------------ aggregates

def _iter_scalar_number(value: Scalar) -> Value | None:
    """Inclusion rule for a direct scalar argument of an aggregate.

    Numbers count, booleans coerce, text must parse as a number and
    blanks are skipped (returned as None).
    """
    if isinstance(value, CellError):
        return value
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        parsed = parse_number(value)
        return VALUE_ERR if parsed is None else parsed
    return None  # BLANK / OMITTED


def _collect_numbers(args: list) -> list[float] | CellError:
    """Flatten aggregate arguments into the numbers they contribute.

    Inside arrays only numbers count; text, booleans and blanks are
    skipped, and the first error element (row-major, in argument
    order) becomes the result.
    """
    numbers: list[float] = []
    for arg in args:
        if isinstance(arg, ArrayValue):
            for element in arg.cells:
                if isinstance(element, CellError):
                    return element
                if isinstance(element, float):
                    numbers.append(element)
        else:
            contribution = _iter_scalar_number(arg)
            if isinstance(contribution, CellError):
                return contribution
            if contribution is not None:
                numbers.append(contribution)
    return numbers


def fn_sum(ctx: "EvalContext", args: list) -> Value:
    numbers = _collect_numbers(args)
    if isinstance(numbers, CellError):
        return numbers
    return _finite(math.fsum(numbers))


def fn_average(ctx: "EvalContext", args: list) -> Value:
    numbers = _collect_numbers(args)
    if isinstance(numbers, CellError):
        return numbers
    if not numbers:
        return DIV0_ERR
    return _finite(math.fsum(numbers) / len(numbers))


def fn_min(ctx: "EvalContext", args: list) -> Value:
    numbers = _collect_numbers(args)
    if isinstance(numbers, CellError):
        return numbers
    return min(numbers) if numbers else 0.0


def fn_max(ctx: "EvalContext", args: list) -> Value:
    numbers = _collect_numbers(args)
    if isinstance(numbers, CellError):
        return numbers
    return max(numbers) if numbers else 0.0


def _kth(args: list, smallest: bool) -> Value:
    numbers = _collect_numbers(args[:1])
    if isinstance(numbers, CellError):
        return numbers
    k_value = coerce_to_number(args[1])
    if isinstance(k_value, CellError):
        return k_value
    k = _truncate(k_value)
    if k < 1 or k > len(numbers):
        return NUM_ERR
    numbers.sort()
    return numbers[k - 1] if smallest else numbers[len(numbers) - k]


def fn_small(ctx: "EvalContext", args: list) -> Value:
    """SMALL(values, k): k-th smallest of the numeric elements."""
    return _kth(args, smallest=True)


def fn_large(ctx: "EvalContext", args: list) -> Value:
    """LARGE(values, k): k-th largest of the numeric elements."""
    return _kth(args, smallest=False)


# ----------------------------------------------------------------- logic

def _iter_conditions(args: list):
    """Yield the boolean reading of every usable element, or an error."""
    for arg in args:
        elements = arg.cells if isinstance(arg, ArrayValue) else (arg,)
        for element in elements:
            if isinstance(element, CellError):
                yield element
            elif isinstance(element, bool):
                yield element
            elif isinstance(element, float):
                yield element != 0.0
            # text and blanks contribute nothing, matching how the
            # aggregates treat non-numeric array elements


def fn_and(ctx: "EvalContext", args: list) -> Value:
    found = False
    for condition in _iter_conditions(args):
        if isinstance(condition, CellError):
            return condition
        found = True
        if not condition:
            return False
    return True if found else VALUE_ERR


def fn_or(ctx: "EvalContext", args: list) -> Value:
    found = False
    for condition in _iter_conditions(args):
        if isinstance(condition, CellError):
            return condition
        found = True
        if condition:
            return True
    return False if found else VALUE_ERR


def fn_not(ctx: "EvalContext", args: list) -> Value:
    truth = is_truthy(args[0])
    if isinstance(truth, CellError):
        return truth
    return not truth


def fn_iserror(ctx: "EvalContext", args: list) -> Value:
    # the one consumer of error values
    return isinstance(args[0], CellError)


# ---------------------------------------------------------------- lookup

def _vector_elements(value: Value) -> list | None:
    if not isinstance(value, ArrayValue):
        return [value]
    if value.rows != 1 and value.cols != 1:
        return None
    return list(value.cells)


def _same_kind(a: Scalar, b: Scalar) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool)
    if isinstance(a, float) or isinstance(b, float):
        return isinstance(a, float) and isinstance(b, float)
    return isinstance(a, str) and isinstance(b, str)


def fn_match(ctx: "EvalContext", args: list) -> Value:
    """MATCH(needle, vector, mode=1): 1-based position in a vector.

    Mode 0 finds the first exact match (text folds case).  Positive
    mode finds the last element <= needle, negative the last element
    >= needle, scanning linearly; no sortedness is assumed.  Elements
    of a different type than the needle, blanks and error elements
    are ignored.
    """
    needle = args[0]
    if isinstance(args[1], CellError):
        return args[1]
    elements = _vector_elements(args[1])
    if elements is None:
        return VALUE_ERR
    mode = coerce_to_number(args[2]) if len(args) > 2 else 1.0
    if isinstance(mode, CellError):
        return mode
    op = "=" if mode == 0 else ("<=" if mode > 0 else ">=")
    best: int | None = None
    for position, element in enumerate(elements, start=1):
        if isinstance(element, CellError) or element is BLANK:
            continue
        if not _same_kind(element, needle):
            continue
        if compare(element, needle, op) is True:
            if op == "=":
                return float(position)
            best = position
    return NA_ERR if best is None else float(best)


def _as_array(value: Value) -> ArrayValue:
    if isinstance(value, ArrayValue):
        return value
    return ArrayValue(1, 1, (value,))


def _unwrap(array: ArrayValue) -> Value:
    return array.first() if array.rows == 1 and array.cols == 1 else array


def fn_index(ctx: "EvalContext", args: list) -> Value:
    """INDEX(array, row, col=1): one element, or a whole row/column.

    Row or column 0 selects the entire column/row; indexes past the
    edge are reference errors.
    """
    array = _as_array(args[0])
    row_value = coerce_to_number(args[1])
    if isinstance(row_value, CellError):
        return row_value
    col_value = coerce_to_number(args[2]) if len(args) > 2 else 1.0
    if isinstance(col_value, CellError):
        return col_value
    r = _truncate(row_value)
    c = _truncate(col_value)
    if r < 0 or c < 0:
        return VALUE_ERR
    if r > array.rows or c > array.cols:
        return REF_ERR
    if r == 0 and c == 0:
        return _unwrap(array)
    if r == 0:
        column = [array.get(i, c - 1) for i in range(array.rows)]
        return _unwrap(ArrayValue(array.rows, 1, tuple(column)))
    if c == 0:
        row = [array.get(r - 1, j) for j in range(array.cols)]
        return _unwrap(ArrayValue(1, array.cols, tuple(row)))
    return array.get(r - 1, c - 1)


def fn_offset(ctx: "EvalContext", args: list) -> Value:
    """OFFSET(ref, rows, cols, height?, width?): a shifted range's values.

    The result is read through the sheet, resized when height/width
    are given; anything that lands outside the grid is a reference
    error.
    """
    base: RangeRef = args[0]
    d_rows = coerce_to_number(args[1])
    d_cols = coerce_to_number(args[2])
    if isinstance(d_rows, CellError):
        return d_rows
    if isinstance(d_cols, CellError):
        return d_cols
    height = base.rows
    width = base.cols
    if len(args) > 3 and args[3] is not OMITTED:
        h_value = coerce_to_number(args[3])
        if isinstance(h_value, CellError):
            return h_value
        height = _truncate(h_value)
    if len(args) > 4 and args[4] is not OMITTED:
        w_value = coerce_to_number(args[4])
        if isinstance(w_value, CellError):
            return w_value
        width = _truncate(w_value)
    if height < 1 or width < 1:
        return VALUE_ERR
    top_row = base.top_left.row + _truncate(d_rows)
    left_col = base.top_left.col + _truncate(d_cols)
    if top_row < 1 or left_col < 1:
        return REF_ERR
    if top_row + height - 1 > MAX_ROWS or left_col + width - 1 > MAX_COLS:
        return REF_ERR
    shifted = RangeRef.make(
        CellAddress(left_col, top_row),
        CellAddress(left_col + width - 1, top_row + height - 1),
    )
    return _unwrap(ctx.sheet.get_range(shifted))


def fn_row(ctx: "EvalContext", args: list) -> Value:
    """ROW(ref?): the row number; of the formula's own cell with no
    argument, of a range's rows (as a column vector, when array
    entered) with one."""
    if not args:
        return float(ctx.anchor.row)
    rng: RangeRef = args[0]
    if ctx.array_entered and rng.rows > 1:
        rows = [float(r) for r in
                range(rng.top_left.row, rng.bottom_right.row + 1)]
        return ArrayValue.column(rows)
    return float(rng.top_left.row)


def fn_column(ctx: "EvalContext", args: list) -> Value:
    if not args:
        return float(ctx.anchor.col)
    rng: RangeRef = args[0]
    if ctx.array_entered and rng.cols > 1:
        cols = tuple(float(c) for c in
                     range(rng.top_left.col, rng.bottom_right.col + 1))
        return ArrayValue(1, len(cols), cols)
    return float(rng.top_left.col)


def fn_transpose(ctx: "EvalContext", args: list) -> Value:
    value = args[0]
    if not isinstance(value, ArrayValue):
        return value
    cells = tuple(value.get(r, c)
                  for c in range(value.cols)
                  for r in range(value.rows))
    return ArrayValue(value.cols, value.rows, cells)


# --------------------------------------------------------------- numeric

def fn_round(ctx: "EvalContext", args: list) -> Value:
    """ROUND(x, digits): decimal rounding with half away from zero.

    Works on the shortest decimal form of x, so ROUND(2.345, 2) is
    2.35 even though the double below 2.345 is what is stored.
    Negative digit counts round left of the decimal point.
    """
    x = coerce_to_number(args[0])
    if isinstance(x, CellError):
        return x
    digits_value = coerce_to_number(args[1])
    if isinstance(digits_value, CellError):
        return digits_value
    digits = _truncate(digits_value)
    if digits > 330:
        return x  # finer than any double, nothing to do
    if digits < -330:
        return 0.0
    with localcontext() as decimal_ctx:
        decimal_ctx.prec = 700
        quantum = Decimal(1).scaleb(-digits)
        result = Decimal(repr(x)).quantize(quantum, rounding=ROUND_HALF_UP)
    return _finite(float(result))


def fn_int(ctx: "EvalContext", args: list) -> Value:
    """INT(x): floor, so INT(-1.5) is -2."""
    x = coerce_to_number(args[0])
    if isinstance(x, CellError):
        return x
    return float(math.floor(x))


def fn_rand(ctx: "EvalContext", args: list) -> Value:
    """RAND(): uniform draw from [0, 1) using the context's generator."""
    return ctx.rng.random()


# -------------------------------------------------------------- registry

def _descriptor(name, min_args, max_args, modes, impl, **flags):
    return FunctionDescriptor(name, min_args, max_args, modes, impl, **flags)


REGISTRY: dict[str, FunctionDescriptor] = {d.name: d for d in [
    _descriptor("SUM", 1, None, (ARRAY,), fn_sum),
    _descriptor("AVERAGE", 1, None, (ARRAY,), fn_average),
    _descriptor("MIN", 1, None, (ARRAY,), fn_min),
    _descriptor("MAX", 1, None, (ARRAY,), fn_max),
    _descriptor("SMALL", 2, 2, (ARRAY, SCALAR), fn_small),
    _descriptor("LARGE", 2, 2, (ARRAY, SCALAR), fn_large),
    _descriptor("LEFT", 1, 2, (SCALAR, SCALAR), fn_left),
    _descriptor("RIGHT", 1, 2, (SCALAR, SCALAR), fn_right),
    _descriptor("LEN", 1, 1, (SCALAR,), fn_len),
    _descriptor("FIND", 2, 3, (SCALAR, SCALAR, SCALAR), fn_find),
    _descriptor("SEARCH", 2, 3, (SCALAR, SCALAR, SCALAR), fn_search),
    _descriptor("SUBSTITUTE", 3, 4, (SCALAR, SCALAR, SCALAR, SCALAR), fn_substitute),
    _descriptor("IF", 2, 3, (SCALAR, SCALAR, SCALAR), None, lazy=True),
    _descriptor("MATCH", 2, 3, (SCALAR, ARRAY, SCALAR), fn_match),
    _descriptor("INDEX", 2, 3, (ARRAY, SCALAR, SCALAR), fn_index),
    _descriptor("ISERROR", 1, 1, (SCALAR,), fn_iserror, captures_errors=True),
    _descriptor("AND", 1, None, (ARRAY,), fn_and),
    _descriptor("OR", 1, None, (ARRAY,), fn_or),
    _descriptor("NOT", 1, 1, (SCALAR,), fn_not),
    _descriptor("ROW", 0, 1, (REF,), fn_row),
    _descriptor("COLUMN", 0, 1, (REF,), fn_column),
    _descriptor("OFFSET", 3, 5, (REF, SCALAR, SCALAR, SCALAR, SCALAR), fn_offset),
    _descriptor("TRANSPOSE", 1, 1, (ARRAY,), fn_transpose),
    _descriptor("ROUND", 2, 2, (SCALAR, SCALAR), fn_round),
    _descriptor("INT", 1, 1, (SCALAR,), fn_int),
    _descriptor("RAND", 0, 0, (), fn_rand, volatile=True),
]}

FUNCTION_NAMES = tuple(sorted(REGISTRY))


def lookup(name: str) -> Optional[FunctionDescriptor]:
    return REGISTRY.get(name.upper())

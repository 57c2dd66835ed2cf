"""Task scripts: reproducible formula pipelines with expectations.

A script is a plain-text file of directives, one per line:

    LOAD <file.csv> [AT <column-offset>] [TEXT]
    SET <cell> = <literal>
    STEP <label> <range> = <formula>
    TRACE <label>
    EXPECT <range> = @<file.csv>
    EXPECT <range> = <cell>[,<cell>...][;<row>...]

Lines starting with # are comments.  STEP evaluates its formula
(braces request array entry) and spills the result over the declared
range, which must match the result's shape exactly.  EXPECT compares a
previously written range cell-by-cell: text, booleans, blanks and
error kinds must match exactly, numbers within 1e-9 relative or 1e-12
absolute, whichever is looser.  In expectation data a quoted field is
always text, so "14" is the text and 14 the number; an empty unquoted
field is a blank.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .evaluator import EvalContext, evaluate_formula
from .grid import (
    CellAddress,
    GridError,
    IngestError,
    RangeRef,
    Sheet,
    as_range,
    load_csv,
    parse_a1,
)
from .parser import FormulaError, parse_formula
from .tracer import TraceError, render_tsv, trace
from .values import (
    ArrayValue,
    BLANK,
    CellError,
    ERROR_BY_LABEL,
    Scalar,
    parse_number,
    render,
)


class ScriptError(Exception):
    """A malformed script file (not a failed expectation)."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# exit codes shared with the CLI
OK = 0
EXPECT_FAILED = 1
PARSE_FAILED = 2
EVAL_FAILED = 3
IO_FAILED = 4


@dataclass(frozen=True)
class Load:
    path: str
    column_offset: int
    force_text: bool
    line: int


@dataclass(frozen=True)
class SetCell:
    target: str
    value: Scalar
    line: int


@dataclass(frozen=True)
class Step:
    label: str
    target: str
    formula: str
    line: int


@dataclass(frozen=True)
class Trace:
    label: str
    line: int


@dataclass(frozen=True)
class Expect:
    target: str
    rows: tuple[tuple[Scalar, ...], ...]
    source: str  # how the expectation was written, for reporting
    line: int


Directive = Union[Load, SetCell, Step, Trace, Expect]


@dataclass
class TaskScript:
    path: Optional[Path]
    directives: list[Directive]


def _split_fields(text: str, line: int, row_separator: str = ";"):
    """Split expectation data, remembering which fields were quoted.

    Returns rows of (text, was_quoted) pairs.  Quotes follow CSV
    conventions ("" escapes a quote); unquoted fields are stripped.
    """
    rows: list[list[tuple[str, bool]]] = [[]]
    buffer: list[str] = []
    quoted = False
    closed = False  # a quoted field has ended; only separators may follow
    i = 0

    def push() -> None:
        nonlocal buffer, quoted, closed
        text_value = "".join(buffer) if quoted else "".join(buffer).strip()
        rows[-1].append((text_value, quoted))
        buffer = []
        quoted = False
        closed = False

    while i < len(text):
        ch = text[i]
        if quoted and not closed:
            if ch == '"':
                if i + 1 < len(text) and text[i + 1] == '"':
                    buffer.append('"')
                    i += 2
                    continue
                closed = True
                i += 1
                continue
            buffer.append(ch)
            i += 1
            continue
        if ch == '"' and not buffer and not closed:
            quoted = True
            i += 1
            continue
        if ch == ",":
            push()
            i += 1
            continue
        if ch == row_separator:
            push()
            rows.append([])
            i += 1
            continue
        if closed:
            if ch in " \t":
                i += 1
                continue
            raise ScriptError(line, f"unexpected {ch!r} after closing quote")
        buffer.append(ch)
        i += 1
    if quoted and not closed:
        raise ScriptError(line, "unterminated quote in expectation data")
    push()
    return rows


def parse_scalar_field(text: str, quoted: bool) -> Scalar:
    """One expectation or SET literal: quoted text stays text, TRUE and
    FALSE are booleans, error labels are errors, numbers are numbers,
    empty is blank and anything else is text."""
    if quoted:
        return text
    if text == "":
        return BLANK
    upper = text.upper()
    if upper == "TRUE":
        return True
    if upper == "FALSE":
        return False
    if text in ERROR_BY_LABEL:
        return ERROR_BY_LABEL[text]
    number = parse_number(text)
    if number is not None:
        return number
    return text


def _parse_set_literal(text: str, line: int) -> Scalar:
    stripped = text.strip()
    if stripped.startswith('"'):
        fields = _split_fields(stripped, line)
        if len(fields) != 1 or len(fields[0]) != 1:
            raise ScriptError(line, "SET takes exactly one value")
        return parse_scalar_field(*fields[0][0])
    return parse_scalar_field(stripped, quoted=False)


_STEP_RE = re.compile(r"(\S+)\s+(\$?[A-Za-z]{1,3}\$?\d+(?::\$?[A-Za-z]{1,3}\$?\d+)?)\s*=\s*(.+)\Z", re.S)
_SET_RE = re.compile(r"(\$?[A-Za-z]{1,3}\$?\d+)\s*=\s*(.+)\Z", re.S)
_LOAD_RE = re.compile(r"(\S+)(?:\s+AT\s+(\d+))?(\s+TEXT)?\s*\Z", re.I)


def parse_task_script(source: Union[str, Path], *,
                      text: Optional[str] = None) -> TaskScript:
    """Read a script file (or parse `text` directly with `source` used
    only for error reporting and relative paths)."""
    path = Path(source)
    if text is None:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IngestError(str(exc)) from exc
    directives: list[Directive] = []
    labels: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        keyword, _, rest = stripped.partition(" ")
        rest = rest.strip()
        keyword = keyword.upper()
        if keyword == "LOAD":
            m = _LOAD_RE.match(rest)
            if not m:
                raise ScriptError(line_no, f"malformed LOAD: {stripped!r}")
            directives.append(Load(m.group(1), int(m.group(2) or 0),
                                   bool(m.group(3)), line_no))
        elif keyword == "SET":
            m = _SET_RE.match(rest)
            if not m:
                raise ScriptError(line_no, f"malformed SET: {stripped!r}")
            directives.append(SetCell(m.group(1),
                                      _parse_set_literal(m.group(2), line_no),
                                      line_no))
        elif keyword == "STEP":
            m = _STEP_RE.match(rest)
            if not m:
                raise ScriptError(line_no, f"malformed STEP: {stripped!r}")
            label = m.group(1)
            if label in labels:
                raise ScriptError(line_no, f"duplicate step label {label!r}")
            labels.add(label)
            directives.append(Step(label, m.group(2), m.group(3).strip(),
                                   line_no))
        elif keyword == "TRACE":
            if not rest or " " in rest:
                raise ScriptError(line_no, f"malformed TRACE: {stripped!r}")
            directives.append(Trace(rest, line_no))
        elif keyword == "EXPECT":
            target, eq, data = rest.partition("=")
            if not eq:
                raise ScriptError(line_no, f"malformed EXPECT: {stripped!r}")
            target = target.strip()
            data = data.strip()
            if data.startswith("@"):
                directives.append(Expect(target, (), data, line_no))
            else:
                rows = tuple(
                    tuple(parse_scalar_field(*f) for f in row)
                    for row in _split_fields(data, line_no))
                directives.append(Expect(target, rows, "inline", line_no))
        else:
            raise ScriptError(line_no, f"unknown directive {keyword!r}")
    return TaskScript(path, directives)


def _load_expect_file(path: Path, line: int) -> tuple[tuple[Scalar, ...], ...]:
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(str(exc)) from exc
    rows = []
    for file_line in content.splitlines():
        fields = _split_fields(file_line, line, row_separator="\x00")
        rows.append(tuple(parse_scalar_field(*f) for f in fields[0]))
    return tuple(rows)


def scalars_match(expected: Scalar, actual: Scalar) -> bool:
    """Expectation equality: exact for text (case included), booleans,
    blanks and error kinds; tolerant for numbers."""
    if isinstance(expected, bool) or isinstance(actual, bool):
        return expected is actual
    if isinstance(expected, float) and isinstance(actual, float):
        if expected == actual:
            return True
        return abs(actual - expected) <= max(1e-9 * abs(expected), 1e-12)
    if isinstance(expected, CellError) or isinstance(actual, CellError):
        return expected == actual
    if isinstance(expected, str) and isinstance(actual, str):
        return expected == actual
    return expected is actual  # BLANK, or a type mismatch


@dataclass
class DirectiveOutcome:
    line: int
    text: str
    ok: bool
    exit_code: int = OK


@dataclass
class RunReport:
    script: str
    outcomes: list[DirectiveOutcome] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(outcome.ok for outcome in self.outcomes)

    @property
    def exit_code(self) -> int:
        return max((o.exit_code for o in self.outcomes), default=OK)

    def render(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        body = "\n".join(o.text for o in self.outcomes)
        return f"{body}\n{self.script}: {status}\n"


class _Runner:
    def __init__(self, script: TaskScript, seed: Optional[int]):
        self.script = script
        self.base_dir = (script.path.parent if script.path is not None
                         else Path("."))
        self.sheet = Sheet()
        self.rng = random.Random(seed)
        self.written: set[tuple[int, int]] = set()
        self.steps: dict[str, Step] = {}
        self.report = RunReport(str(script.path or "<script>"))

    def note(self, line: int, text: str, ok: bool = True,
             exit_code: int = OK) -> bool:
        self.report.outcomes.append(DirectiveOutcome(line, text, ok, exit_code))
        return ok

    def run_directive(self, directive: Directive) -> bool:
        try:
            if isinstance(directive, Load):
                return self.do_load(directive)
            if isinstance(directive, SetCell):
                return self.do_set(directive)
            if isinstance(directive, Step):
                return self.do_step(directive)
            if isinstance(directive, Trace):
                return self.do_trace(directive)
            return self.do_expect(directive)
        except FormulaError as exc:
            return self.note(directive.line,
                             f"line {directive.line}: formula error: {exc}",
                             ok=False, exit_code=PARSE_FAILED)
        except IngestError as exc:
            return self.note(directive.line,
                             f"line {directive.line}: {exc}",
                             ok=False, exit_code=IO_FAILED)
        except (GridError, TraceError, ScriptError) as exc:
            return self.note(directive.line,
                             f"line {directive.line}: {exc}",
                             ok=False, exit_code=EVAL_FAILED)

    def do_load(self, directive: Load) -> bool:
        path = Path(directive.path)
        if not path.is_absolute():
            path = self.base_dir / path
        loaded = load_csv(path, header=True,
                          force_text=directive.force_text,
                          column_offset=directive.column_offset)
        for (row, col) in loaded.used_cells():
            self.sheet.set(CellAddress(col, row),
                           loaded.get(CellAddress(col, row)))
        self.written.update(loaded.used_cells())
        return self.note(directive.line,
                         f"LOAD {directive.path}: {len(loaded.used_cells())} cells")

    def do_set(self, directive: SetCell) -> bool:
        addr = parse_a1(directive.target)
        if isinstance(addr, RangeRef):
            raise ScriptError(directive.line, "SET takes a single cell")
        self.sheet.set(addr, directive.value)
        self.written.add((addr.row, addr.col))
        return self.note(directive.line,
                         f"SET {addr.a1} = {render(directive.value)}")

    def do_step(self, directive: Step) -> bool:
        target = as_range(parse_a1(directive.target))
        formula = parse_formula(directive.formula)
        ctx = EvalContext(self.sheet, anchor=target.top_left, rng=self.rng)
        result = evaluate_formula(formula, ctx)
        if not isinstance(result, ArrayValue):
            result = ArrayValue(1, 1, (result,))
        if result.shape != (target.rows, target.cols):
            raise ScriptError(
                directive.line,
                f"STEP {directive.label} produced {result.rows}x{result.cols} "
                f"but {target.a1} is {target.rows}x{target.cols}")
        self.sheet.spill(target.top_left, result)
        self.written.update((a.row, a.col) for a in target.addresses())
        self.steps[directive.label] = directive
        return self.note(directive.line,
                         f"STEP {directive.label} {target.a1}: "
                         f"spilled {result.rows}x{result.cols}")

    def do_trace(self, directive: Trace) -> bool:
        step = self.steps.get(directive.label)
        if step is None:
            raise ScriptError(directive.line,
                              f"TRACE of unknown step {directive.label!r}")
        ctx = EvalContext(self.sheet, rng=self.rng)
        table = trace(step.formula, ctx)
        tsv = render_tsv(table)
        return self.note(directive.line,
                         f"TRACE {directive.label}:\n{tsv.rstrip()}")

    def do_expect(self, directive: Expect) -> bool:
        target = as_range(parse_a1(directive.target))
        missing = [a for a in target.addresses()
                   if (a.row, a.col) not in self.written]
        if missing:
            raise ScriptError(
                directive.line,
                f"EXPECT {target.a1} covers {missing[0].a1}, "
                "which no directive has written")
        expected_rows = directive.rows
        if directive.source.startswith("@"):
            path = Path(directive.source[1:])
            if not path.is_absolute():
                path = self.base_dir / path
            expected_rows = _load_expect_file(path, directive.line)
        if (len(expected_rows), max((len(r) for r in expected_rows), default=0)) \
                != (target.rows, target.cols):
            return self.note(
                directive.line,
                f"EXPECT {target.a1}: FAIL (expected data is "
                f"{len(expected_rows)} rows, range is {target.rows}x{target.cols})",
                ok=False, exit_code=EXPECT_FAILED)
        actual = self.sheet.get_range(target)
        for r, row in enumerate(expected_rows):
            for c, expected in enumerate(row):
                got = actual.get(r, c)
                if not scalars_match(expected, got):
                    addr = target.top_left.offset(r, c)
                    return self.note(
                        directive.line,
                        f"EXPECT {target.a1}: FAIL at {addr.a1}: "
                        f"expected {render(expected)!r}, got {render(got)!r}",
                        ok=False, exit_code=EXPECT_FAILED)
        cell_count = target.rows * target.cols
        unit = "cell" if cell_count == 1 else "cells"
        return self.note(directive.line,
                         f"EXPECT {target.a1}: PASS ({cell_count} {unit})")


def run_script(
    source: Union[str, Path, TaskScript],
    *,
    seed: Optional[int] = None,
    keep_going: bool = False,
) -> RunReport:
    """Execute a task script and return its report.

    A failed directive stops the run unless keep_going is set; the
    report's exit_code distinguishes expectation mismatches from
    parse, evaluation and I/O failures.
    """
    script = (source if isinstance(source, TaskScript)
              else parse_task_script(source))
    runner = _Runner(script, seed)
    for directive in script.directives:
        if not runner.run_directive(directive) and not keep_going:
            break
    return runner.report

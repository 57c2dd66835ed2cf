"""Sparse sheet storage, A1 addressing, CSV ingestion and array spill."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Union

from .values import (
    ArrayValue,
    BLANK,
    CellError,
    OMITTED,
    Scalar,
    parse_number,
    render,
)

MAX_COLS = 16384
MAX_ROWS = 1048576


class GridError(Exception):
    """Raised for bad addresses, out-of-bounds spills and CSV problems."""


class IngestError(GridError):
    """Raised when a CSV source cannot be decoded or parsed."""


def column_letters(col: int) -> str:
    """1-based column index to letters: 1 -> A, 27 -> AA."""
    if col < 1:
        raise GridError(f"column index {col} out of range")
    out = ""
    while col:
        col, rem = divmod(col - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def letters_to_column(letters: str) -> int:
    col = 0
    for ch in letters.upper():
        col = col * 26 + (ord(ch) - ord("A") + 1)
    return col


@dataclass(frozen=True)
class CellAddress:
    """1-based (column, row) position."""

    col: int
    row: int

    def __post_init__(self):
        if not (1 <= self.col <= MAX_COLS and 1 <= self.row <= MAX_ROWS):
            raise GridError(f"address out of range: col={self.col} row={self.row}")

    @property
    def a1(self) -> str:
        return f"{column_letters(self.col)}{self.row}"

    def offset(self, d_rows: int, d_cols: int) -> "CellAddress":
        return CellAddress(self.col + d_cols, self.row + d_rows)


@dataclass(frozen=True)
class RangeRef:
    """A rectangle of cells, normalized so top_left really is top-left."""

    top_left: CellAddress
    bottom_right: CellAddress

    @classmethod
    def make(cls, a: CellAddress, b: CellAddress) -> "RangeRef":
        return cls(
            CellAddress(min(a.col, b.col), min(a.row, b.row)),
            CellAddress(max(a.col, b.col), max(a.row, b.row)),
        )

    @classmethod
    def cell(cls, addr: CellAddress) -> "RangeRef":
        return cls(addr, addr)

    @property
    def rows(self) -> int:
        return self.bottom_right.row - self.top_left.row + 1

    @property
    def cols(self) -> int:
        return self.bottom_right.col - self.top_left.col + 1

    @property
    def a1(self) -> str:
        if self.rows == 1 and self.cols == 1:
            return self.top_left.a1
        return f"{self.top_left.a1}:{self.bottom_right.a1}"

    def addresses(self) -> Iterator[CellAddress]:
        """Row-major walk over every cell in the rectangle."""
        for row in range(self.top_left.row, self.bottom_right.row + 1):
            for col in range(self.top_left.col, self.bottom_right.col + 1):
                yield CellAddress(col, row)


_A1_RE = re.compile(r"\$?([A-Za-z]{1,3})\$?([0-9]+)\Z")

A1_PATTERN = _A1_RE  # reused by the formula lexer


def parse_cell(token: str) -> CellAddress:
    """Parse one A1 cell token such as C2 or $C$2 (case-insensitive)."""
    m = _A1_RE.match(token)
    if not m:
        raise GridError(f"not a cell address: {token!r}")
    col = letters_to_column(m.group(1))
    row = int(m.group(2))
    if not (1 <= col <= MAX_COLS and 1 <= row <= MAX_ROWS):
        raise GridError(f"cell address out of range: {token!r}")
    return CellAddress(col, row)


def parse_a1(text: str) -> Union[CellAddress, RangeRef]:
    """Parse an A1 token: a bare cell gives a CellAddress, a
    colon-separated pair gives a normalized RangeRef."""
    if ":" in text:
        first, _, second = text.partition(":")
        return RangeRef.make(parse_cell(first), parse_cell(second))
    return parse_cell(text)


def as_range(parsed: Union[CellAddress, RangeRef]) -> RangeRef:
    if isinstance(parsed, CellAddress):
        return RangeRef.cell(parsed)
    return parsed


@dataclass
class Sheet:
    """Sparse mapping from (row, col) to scalar values.

    Unset cells read as BLANK, and writing BLANK unsets the cell, so
    the stored mapping never contains blanks (or Omitted, which is an
    argument placeholder rather than data).
    """

    _cells: dict[tuple[int, int], Scalar] = field(default_factory=dict)

    def get(self, addr: CellAddress) -> Scalar:
        return self._cells.get((addr.row, addr.col), BLANK)

    def set(self, addr: CellAddress, value: Scalar) -> None:
        if value is OMITTED:
            raise GridError("cannot store an omitted-argument placeholder")
        if value is BLANK:
            self._cells.pop((addr.row, addr.col), None)
        else:
            self._cells[(addr.row, addr.col)] = value

    def get_range(self, rng: RangeRef) -> ArrayValue:
        """Dense snapshot of a rectangle; missing cells appear as BLANK."""
        cells = tuple(self.get(addr) for addr in rng.addresses())
        return ArrayValue(rng.rows, rng.cols, cells)

    def spill(self, top_left: CellAddress, array: ArrayValue) -> RangeRef:
        """Write an array with its first element at top_left.

        The write is all-or-nothing: bounds are checked up front so a
        failed spill leaves the sheet untouched.
        """
        bottom = top_left.row + array.rows - 1
        right = top_left.col + array.cols - 1
        if bottom > MAX_ROWS or right > MAX_COLS:
            raise GridError(
                f"spill of {array.rows}x{array.cols} at {top_left.a1} "
                "exceeds the sheet bounds")
        for r in range(array.rows):
            for c in range(array.cols):
                self.set(top_left.offset(r, c), array.get(r, c))
        return RangeRef.make(top_left, CellAddress(right, bottom))

    def used_cells(self) -> set[tuple[int, int]]:
        return set(self._cells)


CsvSource = Union[str, Path, IO[bytes], IO[str]]


def _open_text(source: CsvSource) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def load_csv(
    source: CsvSource,
    *,
    header: bool = True,
    force_text: bool = False,
    column_offset: int = 0,
) -> Sheet:
    """Ingest a CSV file into a fresh sheet.

    Fields that parse completely as numbers become Numbers unless
    force_text is set; everything else stays Text.  Empty fields stay
    Blank.  With header set, row 1 is kept as Text regardless.  The
    column_offset shifts the whole table right, leaving the first
    columns free for derived series.
    """
    if column_offset < 0:
        raise IngestError("column offset must be non-negative")
    sheet = Sheet()
    try:
        stream = _open_text(source)
    except OSError as exc:
        raise IngestError(str(exc)) from exc
    owns_stream = isinstance(source, (str, Path))
    try:
        reader = csv.reader(stream)
        for row_idx, fields in enumerate(reader, start=1):
            for col_idx, text in enumerate(fields, start=1):
                if text == "":
                    continue
                value: Scalar = text
                if not force_text and not (header and row_idx == 1):
                    number = parse_number(text)
                    if number is not None:
                        value = number
                sheet.set(CellAddress(col_idx + column_offset, row_idx), value)
    except UnicodeDecodeError as exc:
        raise IngestError(f"CSV source is not valid UTF-8: {exc}") from exc
    except csv.Error as exc:
        raise IngestError(f"malformed CSV: {exc}") from exc
    finally:
        if owns_stream:
            stream.close()
        elif stream is not source and isinstance(stream, io.TextIOWrapper):
            # keep the caller's byte stream open
            stream.detach()
    return sheet


def range_to_csv(sheet: Sheet, rng: RangeRef) -> str:
    """Render a rectangle back to RFC 4180 CSV text.

    Values are written with the canonical rendering, so a force_text
    load followed by an export reproduces every field's text.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    array = sheet.get_range(rng)
    for row in array.to_rows():
        writer.writerow([render(v) for v in row])
    return out.getvalue()

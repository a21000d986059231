"""Column-oriented relational table, CSV ingestion, and output comparison.

Tables are immutable value objects: every column is a tuple of cells, a
missing cell is ``None``, and all other cells carry a plain Python value
(float, str, bool, or ``datetime.date``).  A column created by splitting
text holds tuples of strings (``ListOf`` element type).
"""

from __future__ import annotations

import csv
import datetime
import enum
import io
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union


class CellType(enum.Enum):
    NUMBER = "number"
    TEXT = "text"
    BOOL = "bool"
    DATE = "date"


@dataclass(frozen=True)
class ListOf:
    """Element type of a column whose cells are lists (e.g. split results)."""

    elem: CellType


ColumnType = Union[CellType, ListOf]

# A cell value.  None encodes a missing cell; lists are stored as tuples so
# tables stay hashable and safely shareable.
Value = Union[None, float, str, bool, datetime.date, tuple]


class CsvError(ValueError):
    """Raised for malformed CSV input (ragged rows, empty body, ...)."""


_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_SLASH_DATE_RE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{2})$")
_MONTHS = {
    m: i + 1
    for i, m in enumerate(
        ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
    )
}
_NAME_DATE_RE = re.compile(r"^([A-Z][a-z]{2}) (\d{1,2}) (\d{4})$")


def parse_date(text: str) -> Optional[datetime.date]:
    """Parse the two accepted date shapes: ``M/D/YY`` and ``Mon D YYYY``.

    Two-digit years land in the 1930-2029 window.  Returns None when the
    text is not a valid calendar date in either shape.
    """
    m = _SLASH_DATE_RE.match(text)
    if m:
        month, day, yy = int(m.group(1)), int(m.group(2)), int(m.group(3))
        year = 1900 + yy if yy >= 30 else 2000 + yy
    else:
        m = _NAME_DATE_RE.match(text)
        if not m or m.group(1) not in _MONTHS:
            return None
        month, day, year = _MONTHS[m.group(1)], int(m.group(2)), int(m.group(3))
    try:
        return datetime.date(year, month, day)
    except ValueError:
        return None


def infer_column_type(cells: Sequence[str]) -> CellType:
    """Infer one type for a column of raw CSV strings.

    Number wins iff every non-empty cell is a decimal number, Bool iff all
    are true/false (any case), Date iff all match an accepted date shape,
    otherwise Text.  An all-empty column has no inferable type.
    """
    non_empty = [c for c in cells if c != ""]
    if not non_empty:
        raise CsvError("column has no values to infer a type from")
    if all(_NUMBER_RE.match(c) for c in non_empty):
        return CellType.NUMBER
    if all(c.lower() in ("true", "false") for c in non_empty):
        return CellType.BOOL
    if all(parse_date(c) is not None for c in non_empty):
        return CellType.DATE
    return CellType.TEXT


def _convert(raw: str, cell_type: CellType) -> Value:
    if raw == "":
        return None
    if cell_type is CellType.NUMBER:
        return float(raw)
    if cell_type is CellType.BOOL:
        return raw.lower() == "true"
    if cell_type is CellType.DATE:
        return parse_date(raw)
    return raw


@dataclass(frozen=True)
class Column:
    name: str
    cell_type: ColumnType
    cells: tuple

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple

    def __post_init__(self):
        if not self.columns:
            raise ValueError("a table needs at least one column")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError("columns differ in length")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")

    @property
    def num_rows(self) -> int:
        return len(self.columns[0])

    def column_names(self) -> list:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)


class OutputShape(enum.Enum):
    SINGLE_VALUE = "single_value"
    NEW_COLUMNS = "new_columns"
    NEW_ROWS = "new_rows"
    NEW_TABLE = "new_table"


@dataclass(frozen=True)
class TabularOutput:
    shape: OutputShape
    payload: object  # Value | tuple[Column, ...] | Table

    def __post_init__(self):
        ok = {
            OutputShape.NEW_COLUMNS: lambda p: isinstance(p, tuple)
            and all(isinstance(c, Column) for c in p),
            OutputShape.NEW_ROWS: lambda p: isinstance(p, tuple),
            OutputShape.NEW_TABLE: lambda p: isinstance(p, Table),
            OutputShape.SINGLE_VALUE: lambda p: not isinstance(p, (Column, Table)),
        }[self.shape]
        if not ok(self.payload):
            raise ValueError(f"payload does not match shape {self.shape}")


def parse_csv(text: str, name: str = "df") -> Table:
    """Read an RFC-4180-style CSV document (comma separated, header row).

    Column types are inferred per :func:`infer_column_type`; empty fields
    become missing cells; row order is preserved.
    """
    rows = list(csv.reader(io.StringIO(text)))
    while rows and not rows[0]:
        rows.pop(0)
    if not rows:
        raise CsvError("no header row")
    header = rows[0]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise CsvError(f"duplicate header names: {', '.join(dupes)}")
    if len(header) == 1:
        # A blank line in single-column data is a missing cell.
        body = [r if r else [""] for r in rows[1:]]
    else:
        body = [r for r in rows[1:] if r]
    if not body:
        raise CsvError("empty body: header row only")
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise CsvError(f"row {i + 2} has {len(row)} fields, expected {len(header)}")
    columns = []
    for j, col_name in enumerate(header):
        raw = [row[j] for row in body]
        cell_type = infer_column_type(raw)
        cells = tuple(_convert(c, cell_type) for c in raw)
        columns.append(Column(col_name, cell_type, cells))
    return Table(name, tuple(columns))


def format_value(v: Value) -> str:
    """Render a cell for the grid / CSV: shortest decimal, TRUE/FALSE, Mon D YYYY."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, (int, float)):
        f = float(v)
        if f.is_integer() and abs(f) < 1e16:
            return str(int(f))
        return repr(f)
    if isinstance(v, datetime.date):
        month = [k for k, n in _MONTHS.items() if n == v.month][0]
        return f"{month} {v.day} {v.year}"
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    return v


def serialize_csv(table: Table) -> str:
    """Emit the same CSV dialect parse_csv reads; value content round-trips."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.column_names())
    for i in range(table.num_rows):
        writer.writerow([format_value(c.cells[i]) for c in table.columns])
    return buf.getvalue()


NUMERIC_TOLERANCE = 1e-9


def _values_equal(a: Value, b: Value) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(float(a) - float(b)) <= NUMERIC_TOLERANCE
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_values_equal(x, y) for x, y in zip(a, b))
    if type(a) is not type(b):
        return False
    return a == b


def _columns_equal(a: Sequence[Column], b: Sequence[Column]) -> bool:
    if len(a) != len(b):
        return False
    for ca, cb in zip(a, b):
        if len(ca) != len(cb):
            return False
        if not all(_values_equal(x, y) for x, y in zip(ca.cells, cb.cells)):
            return False
    return True


def outputs_equivalent(a: TabularOutput, b: TabularOutput) -> bool:
    """Positional value equality of two outputs, ignoring column labels.

    Numbers compare with absolute tolerance 1e-9; missing only equals
    missing.  Total: never raises.
    """
    if a.shape is not b.shape:
        return False
    if a.shape is OutputShape.SINGLE_VALUE:
        return _values_equal(a.payload, b.payload)
    if a.shape is OutputShape.NEW_COLUMNS:
        return _columns_equal(a.payload, b.payload)
    if a.shape is OutputShape.NEW_TABLE:
        return _columns_equal(a.payload.columns, b.payload.columns)
    return _columns_equal(a.payload, b.payload)  # NEW_ROWS: tuple of columns

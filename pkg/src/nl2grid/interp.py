"""Native evaluation of DSL programs against a table.

Replaces a sandboxed runtime for the generated-code language: the typed
DSL is total on finite tables, so programs are executed directly.
Semantics worth calling out:

* the input table is never mutated; results come back as a fresh
  :class:`TabularOutput`,
* creating a column under a protected (original) name is refused,
* division by zero and arithmetic over missing cells yield missing,
* new columns / rows are appended to the grid, single values and new
  tables go to a side pane only.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from . import tcr
from .table import (
    CellType, Column, ColumnType, ListOf, OutputShape, Table, TabularOutput,
    Value, format_value, infer_column_type,
)
from .tcr import (
    Agg, AggOp, AndExpr, ArithOp, BinArith, BindVar, CmpOp, ColProject,
    CompareExpr, Contains, CountOccurrences, CreateColumn, DateCeil, DateYear,
    ElemIndex, FrameRef, GroupBy, GroupSize, IndexKind, Len, Literal,
    LiteralList, Lower, NotExpr, OrExpr, Replace, RowFilter, Shape, SliceRows,
    Split, Strip, TcrExpr, TcrProgram, Transpose, VarRef,
)


class Placement:
    APPEND_TO_GRID = "append_to_grid"
    SIDE_PANE_ONLY = "side_pane_only"


@dataclass(frozen=True)
class EvalOutput:
    output: TabularOutput
    placement: str
    created_column_names: Tuple[str, ...] = ()


@dataclass(frozen=True)
class EvalError:
    kind: str  # "overwrite_refused" | "runtime_fault" | "unsupported_at_runtime" | "no_output"
    description: str
    location: tcr.TcrExpr = field(default=None, compare=False, repr=False)

    OVERWRITE_REFUSED = "overwrite_refused"
    RUNTIME_FAULT = "runtime_fault"
    UNSUPPORTED = "unsupported_at_runtime"
    NO_OUTPUT = "no_output"


class _Fault(Exception):
    def __init__(self, kind: str, description: str):
        super().__init__(description)
        self.kind = kind
        self.description = description


def classify_output(raw: TabularOutput) -> str:
    """New columns or rows join the grid; values and tables stay in the side pane."""
    if raw.shape in (OutputShape.NEW_COLUMNS, OutputShape.NEW_ROWS):
        return Placement.APPEND_TO_GRID
    return Placement.SIDE_PANE_ONLY


# Evaluation-time representations: a frame is a list of (name, type, cells);
# a series is (elem_type, cells); scalars are plain values.

@dataclass
class _Frame:
    columns: List[Tuple[str, ColumnType, Tuple[Value, ...]]]

    @property
    def num_rows(self) -> int:
        return len(self.columns[0][2]) if self.columns else 0


@dataclass
class _Series:
    elem: ColumnType
    cells: Tuple[Value, ...]


@dataclass
class _Scalar:
    elem: ColumnType
    value: Value


@dataclass
class _TupleVal:
    labels: Tuple[str, ...]
    values: Tuple[Value, ...]


@dataclass
class _GroupedVal:
    frame: _Frame
    keys: Tuple[str, ...]


_REGEX_META = set("\\^$.|?*+()[]{")


def _pattern_is_regex(pattern: str) -> bool:
    return any(c in _REGEX_META for c in pattern)


def _replace_text(text: str, pattern: str, replacement: str) -> str:
    if _pattern_is_regex(pattern):
        try:
            return re.sub(pattern, replacement, text)
        except re.error:
            return text.replace(pattern, replacement)
    return text.replace(pattern, replacement)


def _frame_of_table(table: Table) -> _Frame:
    return _Frame([(c.name, c.cell_type, c.cells) for c in table.columns])


def _table_of_frame(frame: _Frame, name: str = "result") -> Table:
    return Table(name, tuple(Column(n, t, cells) for n, t, cells in frame.columns))


class _Evaluator:
    def __init__(self, table: Table, protected: FrozenSet[str]):
        self.base = _frame_of_table(table)
        self.protected = protected
        self.env: Dict[str, object] = {}
        self.created: List[Tuple[str, ColumnType, Tuple[Value, ...]]] = []

    # -- helpers -------------------------------------------------------------

    def working_frame(self) -> _Frame:
        cols = list(self.base.columns)
        names = [n for n, _, _ in cols]
        for name, t, cells in self.created:
            if name in names:
                i = names.index(name)
                cols[i] = (name, t, cells)
            else:
                cols.append((name, t, cells))
                names.append(name)
        return _Frame(cols)

    def _column(self, frame: _Frame, name: str) -> Tuple[ColumnType, Tuple[Value, ...]]:
        for n, t, cells in frame.columns:
            if n == name:
                return t, cells
        raise _Fault(EvalError.RUNTIME_FAULT, f"column {name!r} not present")

    def _broadcast(self, value: object, n: int) -> Tuple[ColumnType, Tuple[Value, ...]]:
        if isinstance(value, _Series):
            if len(value.cells) != n:
                raise _Fault(
                    EvalError.RUNTIME_FAULT,
                    f"length mismatch: {len(value.cells)} values for {n} rows")
            return value.elem, value.cells
        if isinstance(value, _Scalar):
            return value.elem, tuple([value.value] * n)
        raise _Fault(EvalError.RUNTIME_FAULT, "expression does not produce column values")

    # -- program -------------------------------------------------------------

    def run(self, program: TcrProgram) -> EvalOutput:
        yielded: Optional[object] = None
        for stmt in program.statements:
            if isinstance(stmt, CreateColumn):
                if stmt.name in self.protected:
                    raise _Fault(EvalError.OVERWRITE_REFUSED, stmt.name)
                value = self.expr(stmt.expr)
                elem, cells = self._broadcast(value, self.base.num_rows)
                self.created = [c for c in self.created if c[0] != stmt.name]
                self.created.append((stmt.name, elem, cells))
            elif isinstance(stmt, BindVar):
                self.env[stmt.name] = self.expr(stmt.expr)
            else:
                yielded = self.expr(stmt.expr)

        created_names = tuple(n for n, _, _ in self.created)
        if yielded is not None:
            output = self._classify_value(yielded)
        elif self.created:
            cols = tuple(Column(n, t, cells) for n, t, cells in self.created)
            output = TabularOutput(OutputShape.NEW_COLUMNS, cols)
        else:
            raise _Fault(EvalError.NO_OUTPUT, "program produced no displayable output")
        return EvalOutput(output, classify_output(output), created_names)

    def _classify_value(self, value: object) -> TabularOutput:
        if isinstance(value, _Scalar):
            return TabularOutput(OutputShape.SINGLE_VALUE, value.value)
        if isinstance(value, _Series):
            if len(value.cells) == self.base.num_rows:
                col = Column("result", value.elem, value.cells)
                return TabularOutput(OutputShape.NEW_COLUMNS, (col,))
            table = Table("result", (Column("result", value.elem, value.cells),))
            return TabularOutput(OutputShape.NEW_TABLE, table)
        if isinstance(value, _Frame):
            return TabularOutput(OutputShape.NEW_TABLE, _table_of_frame(value))
        if isinstance(value, _TupleVal):
            cols = tuple(
                Column(label, CellType.NUMBER, (v,))
                for label, v in zip(value.labels, value.values)
            )
            return TabularOutput(OutputShape.NEW_TABLE, Table("result", cols))
        if isinstance(value, _GroupedVal):
            raise _Fault(EvalError.NO_OUTPUT, "a grouping needs an aggregation")
        raise _Fault(EvalError.RUNTIME_FAULT, f"cannot display {type(value).__name__}")

    # -- expressions ----------------------------------------------------------

    def expr(self, e: TcrExpr) -> object:
        if isinstance(e, FrameRef):
            return self.working_frame()
        if isinstance(e, VarRef):
            if e.name not in self.env:
                raise _Fault(EvalError.RUNTIME_FAULT, f"unbound variable {e.name!r}")
            return self.env[e.name]
        if isinstance(e, Literal):
            if isinstance(e.value, bool):
                return _Scalar(CellType.BOOL, e.value)
            if isinstance(e.value, (int, float)):
                return _Scalar(CellType.NUMBER, float(e.value))
            return _Scalar(CellType.TEXT, e.value)
        if isinstance(e, LiteralList):
            cells = tuple(
                float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v
                for v in e.values
            )
            non_missing = [v for v in cells if v is not None]
            if non_missing and isinstance(non_missing[0], bool):
                elem: ColumnType = CellType.BOOL
            elif non_missing and isinstance(non_missing[0], float):
                elem = CellType.NUMBER
            else:
                elem = CellType.TEXT
            return _Series(elem, cells)
        if isinstance(e, ColProject):
            frame = self._frame(e.frame)
            t, cells = self._column(frame, e.name)
            return _Series(t, cells)
        if isinstance(e, RowFilter):
            frame = self._frame(e.frame)
            mask = self.expr(e.mask)
            if not isinstance(mask, _Series):
                raise _Fault(EvalError.RUNTIME_FAULT, "filter mask is not a column")
            if len(mask.cells) != frame.num_rows:
                raise _Fault(EvalError.RUNTIME_FAULT, "filter mask length mismatch")
            keep = [i for i, v in enumerate(mask.cells) if v is True]
            return _Frame([
                (n, t, tuple(cells[i] for i in keep)) for n, t, cells in frame.columns
            ])
        if isinstance(e, SliceRows):
            frame = self._frame(e.frame)
            rng = range(frame.num_rows)[e.lo:e.hi]
            return _Frame([
                (n, t, tuple(cells[i] for i in rng)) for n, t, cells in frame.columns
            ])
        if isinstance(e, CompareExpr):
            return self._compare(e)
        if isinstance(e, (AndExpr, OrExpr)):
            operands = [self.expr(o) for o in e.operands]
            is_and = isinstance(e, AndExpr)
            series = [o for o in operands if isinstance(o, _Series)]
            if not series:
                vals = [bool(o.value) for o in operands]
                return _Scalar(CellType.BOOL, all(vals) if is_and else any(vals))
            n = len(series[0].cells)
            rows = []
            for i in range(n):
                bits = []
                for o in operands:
                    v = o.cells[i] if isinstance(o, _Series) else o.value
                    bits.append(v is True)
                rows.append(all(bits) if is_and else any(bits))
            return _Series(CellType.BOOL, tuple(rows))
        if isinstance(e, NotExpr):
            v = self.expr(e.operand)
            if isinstance(v, _Series):
                return _Series(CellType.BOOL, tuple(not (c is True) for c in v.cells))
            return _Scalar(CellType.BOOL, not (v.value is True))
        if isinstance(e, BinArith):
            return self._arith(e)
        if isinstance(e, Split):
            return self._map_text(e.subject, lambda s: tuple(
                s.split(e.delim) if e.delim is not None else s.split()
            ), ListOf(CellType.TEXT))
        if isinstance(e, Replace):
            return self._map_text(
                e.subject, lambda s: _replace_text(s, e.pattern, e.replacement), CellType.TEXT)
        if isinstance(e, Lower):
            return self._map_text(e.subject, str.lower, CellType.TEXT)
        if isinstance(e, Strip):
            return self._map_text(e.subject, str.strip, CellType.TEXT)
        if isinstance(e, CountOccurrences):
            if e.pattern == "":
                raise _Fault(EvalError.RUNTIME_FAULT, "cannot count an empty pattern")
            return self._map_text(
                e.subject, lambda s: float(s.count(e.pattern)), CellType.NUMBER)
        if isinstance(e, Contains):
            return self._map_text(e.subject, lambda s: e.pattern in s, CellType.BOOL)
        if isinstance(e, Len):
            return self._map_cells(
                e.subject, lambda v: float(len(v)), CellType.NUMBER)
        if isinstance(e, ElemIndex):
            return self._elem_index(e)
        if isinstance(e, Agg):
            return self._agg(e)
        if isinstance(e, Shape):
            frame = self._frame(e.frame)
            return _TupleVal(("rows", "columns"),
                             (float(frame.num_rows), float(len(frame.columns))))
        if isinstance(e, GroupBy):
            return _GroupedVal(self._frame(e.frame), e.keys)
        if isinstance(e, GroupSize):
            return self._group_size(e)
        if isinstance(e, Transpose):
            return self._transpose(self._frame(e.frame))
        if isinstance(e, DateYear):
            return self._map_cells(e.subject, lambda d: float(d.year), CellType.NUMBER)
        if isinstance(e, DateCeil):
            if e.unit != "D":
                raise _Fault(EvalError.UNSUPPORTED, f"ceil unit {e.unit!r}")
            return self._map_cells(e.subject, lambda d: d, CellType.DATE)
        raise _Fault(EvalError.UNSUPPORTED, type(e).__name__)

    def _frame(self, e: TcrExpr) -> _Frame:
        v = self.expr(e)
        if not isinstance(v, _Frame):
            raise _Fault(EvalError.RUNTIME_FAULT, "expected a table")
        return v

    def _map_cells(self, subject: TcrExpr, fn, out_elem: ColumnType) -> object:
        v = self.expr(subject)
        if isinstance(v, _Series):
            return _Series(out_elem, tuple(None if c is None else fn(c) for c in v.cells))
        if isinstance(v, _Scalar):
            return _Scalar(out_elem, None if v.value is None else fn(v.value))
        raise _Fault(EvalError.RUNTIME_FAULT, "expected column values")

    def _map_text(self, subject: TcrExpr, fn, out_elem: ColumnType) -> object:
        def wrap(value):
            if not isinstance(value, str):
                raise _Fault(EvalError.RUNTIME_FAULT, "expected text")
            return fn(value)

        return self._map_cells(subject, wrap, out_elem)

    def _compare(self, e: CompareExpr) -> object:
        left, right = self.expr(e.left), self.expr(e.right)

        def cmp(a: Value, b: Value) -> bool:
            # Missing never satisfies a comparison; filters drop those rows.
            if a is None or b is None:
                return False
            if e.op is CmpOp.EQ:
                return a == b
            if e.op is CmpOp.NE:
                return a != b
            try:
                if e.op is CmpOp.GT:
                    return a > b
                if e.op is CmpOp.GE:
                    return a >= b
                if e.op is CmpOp.LT:
                    return a < b
                return a <= b
            except TypeError:
                raise _Fault(EvalError.RUNTIME_FAULT, "values cannot be ordered")

        if isinstance(left, _Series) or isinstance(right, _Series):
            n = len(left.cells) if isinstance(left, _Series) else len(right.cells)
            if isinstance(left, _Series) and isinstance(right, _Series) \
                    and len(left.cells) != len(right.cells):
                raise _Fault(EvalError.RUNTIME_FAULT, "column length mismatch")
            out = []
            for i in range(n):
                a = left.cells[i] if isinstance(left, _Series) else left.value
                b = right.cells[i] if isinstance(right, _Series) else right.value
                out.append(cmp(a, b))
            return _Series(CellType.BOOL, tuple(out))
        return _Scalar(CellType.BOOL, cmp(left.value, right.value))

    def _arith(self, e: BinArith) -> object:
        left, right = self.expr(e.left), self.expr(e.right)

        def apply(a: Value, b: Value) -> Value:
            if a is None or b is None:
                return None
            if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
                raise _Fault(EvalError.RUNTIME_FAULT, "arithmetic needs numbers")
            if e.op is ArithOp.ADD:
                return a + b
            if e.op is ArithOp.SUB:
                return a - b
            if e.op is ArithOp.MUL:
                return a * b
            if b == 0:
                return None  # empty cell, not a crash
            return a / b

        if isinstance(left, _Series) or isinstance(right, _Series):
            n = len(left.cells) if isinstance(left, _Series) else len(right.cells)
            if isinstance(left, _Series) and isinstance(right, _Series) \
                    and len(left.cells) != len(right.cells):
                raise _Fault(EvalError.RUNTIME_FAULT, "column length mismatch")
            out = []
            for i in range(n):
                a = left.cells[i] if isinstance(left, _Series) else left.value
                b = right.cells[i] if isinstance(right, _Series) else right.value
                out.append(apply(a, b))
            return _Series(CellType.NUMBER, tuple(out))
        return _Scalar(CellType.NUMBER, apply(left.value, right.value))

    def _elem_index(self, e: ElemIndex) -> object:
        if e.kind is IndexKind.TUPLE_FIELD:
            v = self.expr(e.subject)
            if not isinstance(v, _TupleVal):
                raise _Fault(EvalError.RUNTIME_FAULT, "expected a labeled tuple")
            return _Scalar(CellType.NUMBER, v.values[e.index])
        if e.kind is IndexKind.ELEMENT_OF_SERIES:
            v = self.expr(e.subject)
            if not isinstance(v, _Series):
                raise _Fault(EvalError.RUNTIME_FAULT, "expected a column")
            try:
                return _Scalar(v.elem, v.cells[e.index])
            except IndexError:
                raise _Fault(EvalError.RUNTIME_FAULT, f"element {e.index} out of range")

        def pick(value):
            try:
                return value[e.index]
            except IndexError:
                return None

        if e.kind is IndexKind.CHAR_OF_TEXT:
            return self._map_text(e.subject, pick, CellType.TEXT)
        v = self.expr(e.subject)
        elem = v.elem.elem if isinstance(v.elem, ListOf) else CellType.TEXT
        return self._map_cells(e.subject, pick, elem)

    def _agg(self, e: Agg) -> object:
        if e.op is AggOp.ROW_COUNT:
            frame = self._frame(e.subject)
            return _Scalar(CellType.NUMBER, float(frame.num_rows))
        subject = self.expr(e.subject)
        if isinstance(subject, _Frame):
            if e.op is not AggOp.COUNT:
                raise _Fault(EvalError.UNSUPPORTED, f"{e.op.value} over a table")
            cols = (
                Column("column", CellType.TEXT, tuple(n for n, _, _ in subject.columns)),
                Column("count", CellType.NUMBER, tuple(
                    float(sum(1 for v in cells if v is not None))
                    for _, _, cells in subject.columns
                )),
            )
            return _Frame([(c.name, c.cell_type, c.cells) for c in cols])
        if not isinstance(subject, _Series):
            raise _Fault(EvalError.RUNTIME_FAULT, "expected a column")
        values = [v for v in subject.cells if v is not None]
        if e.op is AggOp.COUNT:
            return _Scalar(CellType.NUMBER, float(len(values)))
        if not values:
            return _Scalar(subject.elem, None)
        if e.op is AggOp.SUM:
            return _Scalar(CellType.NUMBER, float(sum(values)))
        if e.op is AggOp.MEAN:
            return _Scalar(CellType.NUMBER, float(sum(values)) / len(values))
        if e.op is AggOp.MIN:
            return _Scalar(subject.elem, min(values))
        if e.op is AggOp.MAX:
            return _Scalar(subject.elem, max(values))
        if e.op is AggOp.IDX_MAX:
            best = max(range(len(subject.cells)),
                       key=lambda i: -math.inf if subject.cells[i] is None else subject.cells[i])
            return _Scalar(CellType.NUMBER, float(best))
        raise _Fault(EvalError.UNSUPPORTED, e.op.value)

    def _group_size(self, e: GroupSize) -> _Frame:
        grouped = self.expr(e.grouped)
        if not isinstance(grouped, _GroupedVal):
            raise _Fault(EvalError.RUNTIME_FAULT, "size applies to a grouping")
        frame, keys = grouped.frame, grouped.keys
        key_cols = [self._column(frame, k) for k in keys]
        buckets: Dict[Tuple[Value, ...], int] = {}
        for i in range(frame.num_rows):
            key = tuple(cells[i] for _, cells in key_cols)
            if any(v is None for v in key):
                continue  # missing keys form no group
            buckets[key] = buckets.get(key, 0) + 1
        ordered = sorted(buckets.items(), key=lambda kv: kv[0])
        columns: List[Tuple[str, ColumnType, Tuple[Value, ...]]] = []
        for j, k in enumerate(keys):
            columns.append((k, key_cols[j][0], tuple(key[j] for key, _ in ordered)))
        columns.append(("size", CellType.NUMBER, tuple(float(n) for _, n in ordered)))
        return _Frame(columns)

    def _transpose(self, frame: _Frame) -> _Frame:
        names = [n for n, _, _ in frame.columns]
        header = ("column", CellType.TEXT, tuple(names))
        columns = [header]
        for i in range(frame.num_rows):
            raw = [format_value(cells[i]) for _, _, cells in frame.columns]
            try:
                t = infer_column_type(raw)
            except Exception:
                t = CellType.TEXT
            converted = tuple(
                None if r == "" else (float(r) if t is CellType.NUMBER else r) for r in raw
            )
            columns.append((f"row {i + 1}", t, converted))
        return _Frame(columns)


def evaluate(
    program: TcrProgram,
    table: Table,
    protected_columns: Optional[FrozenSet[str]] = None,
) -> Union[EvalOutput, EvalError]:
    """Run a program against a table; failures come back as values.

    ``protected_columns`` defaults to every column of the given table:
    those names cannot be re-created.  Sessions pass their original
    column set so a re-run may replace columns it created itself.
    """
    if protected_columns is None:
        protected_columns = frozenset(table.column_names())
    evaluator = _Evaluator(table, protected_columns)
    try:
        return evaluator.run(program)
    except _Fault as f:
        return EvalError(f.kind, f.description)


def output_to_json(output: TabularOutput) -> dict:
    if output.shape is OutputShape.SINGLE_VALUE:
        return {"shape": "single_value", "value": format_value(output.payload)}
    if output.shape is OutputShape.NEW_COLUMNS:
        return {
            "shape": "new_columns",
            "columns": [
                {"name": c.name, "cells": [format_value(v) for v in c.cells]}
                for c in output.payload
            ],
        }
    if output.shape is OutputShape.NEW_TABLE:
        t = output.payload
        return {
            "shape": "new_table",
            "table": {
                "columns": [
                    {"name": c.name, "cells": [format_value(v) for v in c.cells]}
                    for c in t.columns
                ]
            },
        }
    return {"shape": "new_rows", "rows": []}


def eval_output_to_json(out: EvalOutput) -> dict:
    body = output_to_json(out.output)
    body["placement"] = out.placement
    body["created_columns"] = list(out.created_column_names)
    return body

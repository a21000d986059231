"""Task-centric program representation: a typed dataframe DSL.

A :class:`TcrProgram` captures what generated code *does* to the table,
with library artifacts (``.str`` / ``.dt`` accessors, ``loc``/``iloc``
spellings) stripped away.  The three jobs of this module:

* ``infer_type``  — type every DSL node against a table schema,
* ``translate``   — type-directed translation from the object-code AST,
  where the inferred type of a subscript base decides between column
  projection, row filtering, and element indexing,
* ``render_code`` — deterministic re-emission of a program as canonical
  object code (accessors reinstated where that language requires them).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from . import objcode as oc
from .table import CellType, ColumnType, ListOf, Table


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameType:
    def __str__(self):
        return "frame"


@dataclass(frozen=True)
class SeriesType:
    elem: ColumnType

    def __str__(self):
        return f"series[{_elem_str(self.elem)}]"


@dataclass(frozen=True)
class ScalarType:
    elem: ColumnType

    def __str__(self):
        return f"scalar[{_elem_str(self.elem)}]"


@dataclass(frozen=True)
class TupleType:
    labels: Tuple[str, ...]
    elems: Tuple[ColumnType, ...]

    def __str__(self):
        return "tuple[" + ", ".join(self.labels) + "]"


@dataclass(frozen=True)
class GroupedType:
    keys: Tuple[str, ...]

    def __str__(self):
        return "grouped[" + ", ".join(self.keys) + "]"


TcrType = Union[FrameType, SeriesType, ScalarType, TupleType, GroupedType]

FRAME = FrameType()


def _elem_str(elem: ColumnType) -> str:
    if isinstance(elem, ListOf):
        return f"list of {elem.elem.value}"
    return elem.value


@dataclass(frozen=True)
class Schema:
    """Column types of one table, as seen by the type checker."""

    table_name: str
    columns: Tuple[Tuple[str, ColumnType], ...]

    @staticmethod
    def of_table(table: Table, table_name: str = "df") -> "Schema":
        return Schema(table_name, tuple((c.name, c.cell_type) for c in table.columns))

    def column_type(self, name: str) -> Optional[ColumnType]:
        for n, t in self.columns:
            if n == name:
                return t
        return None

    def column_names(self) -> List[str]:
        return [n for n, _ in self.columns]

    def with_column(self, name: str, cell_type: ColumnType) -> "Schema":
        cols = [(n, t) for n, t in self.columns if n != name]
        cols.append((name, cell_type))
        return Schema(self.table_name, tuple(cols))


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class TranslateError(ValueError):
    def __init__(self, message: str, loc: oc.Loc = oc.Loc()):
        super().__init__(f"{message} (line {loc.line}, column {loc.col})" if loc.line else message)
        self.message = message
        self.loc = loc


class UnknownColumn(TranslateError):
    def __init__(self, name: str, loc: oc.Loc = oc.Loc()):
        super().__init__(f"unknown column {name!r}", loc)
        self.name = name


class UnknownName(TranslateError):
    def __init__(self, name: str, loc: oc.Loc = oc.Loc()):
        super().__init__(f"unknown name {name!r}", loc)
        self.name = name


class TypeMismatch(TranslateError):
    def __init__(self, expected: str, found: str, loc: oc.Loc = oc.Loc()):
        super().__init__(f"type mismatch: expected {expected}, found {found}", loc)
        self.expected = expected
        self.found = found


class UnsupportedApi(TranslateError):
    def __init__(self, name: str, loc: oc.Loc = oc.Loc()):
        super().__init__(f"unsupported operation: {name}", loc)
        self.name = name


class AmbiguousSubscript(TranslateError):
    def __init__(self, detail: str, loc: oc.Loc = oc.Loc()):
        super().__init__(f"ambiguous subscript: {detail}", loc)
        self.detail = detail


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class CmpOp(enum.Enum):
    EQ = "=="
    NE = "!="
    GT = ">"
    GE = ">="
    LT = "<"
    LE = "<="


class ArithOp(enum.Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"


class AggOp(enum.Enum):
    SUM = "sum"
    MIN = "min"
    MAX = "max"
    MEAN = "mean"
    COUNT = "count"
    ROW_COUNT = "row_count"
    IDX_MAX = "idxmax"


class IndexKind(enum.Enum):
    CHAR_OF_TEXT = "character"
    WORD_OF_LIST = "word"
    ELEMENT_OF_SERIES = "element"
    TUPLE_FIELD = "tuple_field"


def _span_field():
    return field(default=oc.Loc(), compare=False, repr=False)


@dataclass(frozen=True)
class FrameRef:
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class ColProject:
    frame: "TcrExpr"
    name: str
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class RowFilter:
    frame: "TcrExpr"
    mask: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class CompareExpr:
    op: CmpOp
    left: "TcrExpr"
    right: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class AndExpr:
    operands: Tuple["TcrExpr", ...]
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class OrExpr:
    operands: Tuple["TcrExpr", ...]
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class NotExpr:
    operand: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class BinArith:
    op: ArithOp
    left: "TcrExpr"
    right: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Literal:
    value: object  # int | float | str | bool
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class LiteralList:
    values: Tuple[object, ...]
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Split:
    subject: "TcrExpr"
    delim: Optional[str]  # None: split on whitespace
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Replace:
    subject: "TcrExpr"
    pattern: str
    replacement: str
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Lower:
    subject: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Strip:
    subject: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class CountOccurrences:
    subject: "TcrExpr"
    pattern: str
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Contains:
    subject: "TcrExpr"
    pattern: str
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Len:
    subject: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class ElemIndex:
    subject: "TcrExpr"
    index: int
    kind: IndexKind
    label: Optional[str] = None  # for TUPLE_FIELD
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class SliceRows:
    frame: "TcrExpr"
    lo: int
    hi: Optional[int]
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Agg:
    op: AggOp
    subject: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Shape:
    frame: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class GroupBy:
    frame: "TcrExpr"
    keys: Tuple[str, ...]
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class GroupSize:
    grouped: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Transpose:
    frame: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class DateYear:
    subject: "TcrExpr"
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class DateCeil:
    subject: "TcrExpr"
    unit: str
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class VarRef:
    name: str
    span: oc.Loc = _span_field()


TcrExpr = Union[
    FrameRef, ColProject, RowFilter, CompareExpr, AndExpr, OrExpr, NotExpr,
    BinArith, Literal, LiteralList, Split, Replace, Lower, Strip,
    CountOccurrences, Contains, Len, ElemIndex, SliceRows, Agg, Shape,
    GroupBy, GroupSize, Transpose, DateYear, DateCeil, VarRef,
]


@dataclass(frozen=True)
class CreateColumn:
    name: str
    expr: TcrExpr
    overwrites_original: bool = False
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class BindVar:
    name: str
    expr: TcrExpr
    span: oc.Loc = _span_field()


@dataclass(frozen=True)
class Yield:
    expr: TcrExpr
    span: oc.Loc = _span_field()


TcrStatement = Union[CreateColumn, BindVar, Yield]


@dataclass(frozen=True)
class TcrProgram:
    statements: Tuple[TcrStatement, ...]
    dropped_noops: bool = field(default=False, compare=False)

    def __post_init__(self):
        for stmt in self.statements[:-1]:
            if isinstance(stmt, Yield):
                raise ValueError("only the final statement may yield a value")


# ---------------------------------------------------------------------------
# Type inference
# ---------------------------------------------------------------------------

_ORDERED = (CellType.NUMBER, CellType.DATE, CellType.TEXT)


def _literal_elem(value: object) -> CellType:
    if isinstance(value, bool):
        return CellType.BOOL
    if isinstance(value, (int, float)):
        return CellType.NUMBER
    if isinstance(value, str):
        return CellType.TEXT
    raise TypeMismatch("literal", repr(value))


def _is_bool(t: TcrType) -> bool:
    return isinstance(t, (SeriesType, ScalarType)) and t.elem is CellType.BOOL


def infer_type(expr: TcrExpr, schema: Schema, env: Optional[Dict[str, TcrType]] = None) -> TcrType:
    """Infer the type of a DSL expression against a schema and local bindings."""
    env = env or {}

    def text_subject(e, what: str) -> TcrType:
        t = go(e)
        if isinstance(t, (SeriesType, ScalarType)) and t.elem is CellType.TEXT:
            return t
        raise TypeMismatch(f"text for {what}", str(t), e.span)

    def go(e: TcrExpr) -> TcrType:
        if isinstance(e, FrameRef):
            return FRAME
        if isinstance(e, VarRef):
            if e.name not in env:
                raise UnknownName(e.name, e.span)
            return env[e.name]
        if isinstance(e, Literal):
            return ScalarType(_literal_elem(e.value))
        if isinstance(e, LiteralList):
            elems = [v for v in e.values if v is not None]
            if not elems:
                return SeriesType(CellType.TEXT)
            kinds = {_literal_elem(v) for v in elems}
            if len(kinds) > 1:
                raise TypeMismatch("uniform list", "mixed element types", e.span)
            return SeriesType(kinds.pop())
        if isinstance(e, ColProject):
            if not isinstance(go(e.frame), FrameType):
                raise TypeMismatch("frame", str(go(e.frame)), e.span)
            t = schema.column_type(e.name)
            if t is None:
                raise UnknownColumn(e.name, e.span)
            return SeriesType(t)
        if isinstance(e, RowFilter):
            if not isinstance(go(e.frame), FrameType):
                raise TypeMismatch("frame", str(go(e.frame)), e.span)
            mt = go(e.mask)
            if not (isinstance(mt, SeriesType) and mt.elem is CellType.BOOL):
                raise TypeMismatch("boolean mask", str(mt), e.span)
            return FRAME
        if isinstance(e, SliceRows):
            if not isinstance(go(e.frame), FrameType):
                raise TypeMismatch("frame", str(go(e.frame)), e.span)
            return FRAME
        if isinstance(e, CompareExpr):
            lt, rt = go(e.left), go(e.right)
            le = lt.elem if isinstance(lt, (SeriesType, ScalarType)) else None
            re_ = rt.elem if isinstance(rt, (SeriesType, ScalarType)) else None
            if le is None or re_ is None or le != re_:
                raise TypeMismatch(str(lt), str(rt), e.span)
            if e.op not in (CmpOp.EQ, CmpOp.NE) and le not in _ORDERED:
                raise TypeMismatch("orderable values", _elem_str(le), e.span)
            series = isinstance(lt, SeriesType) or isinstance(rt, SeriesType)
            return SeriesType(CellType.BOOL) if series else ScalarType(CellType.BOOL)
        if isinstance(e, (AndExpr, OrExpr)):
            types = [go(o) for o in e.operands]
            if not all(_is_bool(t) for t in types):
                bad = next(t for t in types if not _is_bool(t))
                raise TypeMismatch("boolean operands", str(bad), e.span)
            series = any(isinstance(t, SeriesType) for t in types)
            return SeriesType(CellType.BOOL) if series else ScalarType(CellType.BOOL)
        if isinstance(e, NotExpr):
            t = go(e.operand)
            if not _is_bool(t):
                raise TypeMismatch("boolean operand", str(t), e.span)
            return t
        if isinstance(e, BinArith):
            lt, rt = go(e.left), go(e.right)
            elems = []
            for t in (lt, rt):
                if not (isinstance(t, (SeriesType, ScalarType))
                        and t.elem in (CellType.NUMBER, CellType.TEXT)):
                    raise TypeMismatch("number", str(t), e.span)
                elems.append(t.elem)
            if elems[0] != elems[1]:
                raise TypeMismatch(_elem_str(elems[0]), _elem_str(elems[1]), e.span)
            # Text operands stay expressible (generated code does produce
            # them); evaluation is where they fail.
            series = isinstance(lt, SeriesType) or isinstance(rt, SeriesType)
            return SeriesType(elems[0]) if series else ScalarType(elems[0])
        if isinstance(e, Split):
            t = text_subject(e.subject, "split")
            wrapped = ListOf(CellType.TEXT)
            return SeriesType(wrapped) if isinstance(t, SeriesType) else ScalarType(wrapped)
        if isinstance(e, (Replace, Lower, Strip)):
            return text_subject(e.subject, type(e).__name__.lower())
        if isinstance(e, CountOccurrences):
            t = text_subject(e.subject, "count")
            return SeriesType(CellType.NUMBER) if isinstance(t, SeriesType) else ScalarType(CellType.NUMBER)
        if isinstance(e, Contains):
            t = text_subject(e.subject, "contains")
            return SeriesType(CellType.BOOL) if isinstance(t, SeriesType) else ScalarType(CellType.BOOL)
        if isinstance(e, Len):
            t = go(e.subject)
            if isinstance(t, (SeriesType, ScalarType)) and (
                t.elem is CellType.TEXT or isinstance(t.elem, ListOf)
            ):
                num = CellType.NUMBER
                return SeriesType(num) if isinstance(t, SeriesType) else ScalarType(num)
            raise TypeMismatch("text or list", str(t), e.span)
        if isinstance(e, ElemIndex):
            t = go(e.subject)
            if e.kind is IndexKind.TUPLE_FIELD:
                if not isinstance(t, TupleType):
                    raise TypeMismatch("labeled tuple", str(t), e.span)
                if not (0 <= e.index < len(t.labels)):
                    raise TypeMismatch("tuple field index", str(e.index), e.span)
                return ScalarType(t.elems[e.index])
            if not isinstance(t, (SeriesType, ScalarType)):
                raise TypeMismatch("series", str(t), e.span)
            if e.kind is IndexKind.CHAR_OF_TEXT:
                if t.elem is not CellType.TEXT:
                    raise TypeMismatch("text", str(t), e.span)
                return t
            if e.kind is IndexKind.WORD_OF_LIST:
                if not isinstance(t.elem, ListOf):
                    raise TypeMismatch("list", str(t), e.span)
                elem = t.elem.elem
                return SeriesType(elem) if isinstance(t, SeriesType) else ScalarType(elem)
            if not isinstance(t, SeriesType):
                raise TypeMismatch("series", str(t), e.span)
            return ScalarType(t.elem)
        if isinstance(e, Agg):
            t = go(e.subject)
            if e.op is AggOp.ROW_COUNT:
                if not isinstance(t, FrameType):
                    raise TypeMismatch("frame", str(t), e.span)
                return ScalarType(CellType.NUMBER)
            if e.op is AggOp.COUNT:
                if isinstance(t, FrameType):
                    return FRAME  # per-column counts: a small new table
                if isinstance(t, SeriesType):
                    return ScalarType(CellType.NUMBER)
                raise TypeMismatch("frame or series", str(t), e.span)
            if not isinstance(t, SeriesType):
                raise TypeMismatch("series", str(t), e.span)
            if e.op in (AggOp.MIN, AggOp.MAX):
                if t.elem not in (CellType.NUMBER, CellType.DATE):
                    raise TypeMismatch("number or date series", str(t), e.span)
                return ScalarType(t.elem)
            if t.elem is not CellType.NUMBER:
                raise TypeMismatch("number series", str(t), e.span)
            return ScalarType(CellType.NUMBER)
        if isinstance(e, Shape):
            if not isinstance(go(e.frame), FrameType):
                raise TypeMismatch("frame", str(go(e.frame)), e.span)
            return TupleType(("rows", "columns"), (CellType.NUMBER, CellType.NUMBER))
        if isinstance(e, GroupBy):
            if not isinstance(go(e.frame), FrameType):
                raise TypeMismatch("frame", str(go(e.frame)), e.span)
            for k in e.keys:
                if schema.column_type(k) is None:
                    raise UnknownColumn(k, e.span)
            return GroupedType(e.keys)
        if isinstance(e, GroupSize):
            t = go(e.grouped)
            if not isinstance(t, GroupedType):
                raise TypeMismatch("grouped frame", str(t), e.span)
            return FRAME
        if isinstance(e, Transpose):
            if not isinstance(go(e.frame), FrameType):
                raise TypeMismatch("frame", str(go(e.frame)), e.span)
            return FRAME
        if isinstance(e, DateYear):
            t = go(e.subject)
            if not (isinstance(t, (SeriesType, ScalarType)) and t.elem is CellType.DATE):
                raise TypeMismatch("date", str(t), e.span)
            num = CellType.NUMBER
            return SeriesType(num) if isinstance(t, SeriesType) else ScalarType(num)
        if isinstance(e, DateCeil):
            t = go(e.subject)
            if not (isinstance(t, (SeriesType, ScalarType)) and t.elem is CellType.DATE):
                raise TypeMismatch("date", str(t), e.span)
            return t
        raise TypeMismatch("expression", repr(e))

    return go(expr)


def check_program(program: TcrProgram, schema: Schema) -> Schema:
    """Type-check a whole program; returns the schema extended with created columns."""
    env: Dict[str, TcrType] = {}
    current = schema
    for stmt in program.statements:
        if isinstance(stmt, Yield):
            infer_type(stmt.expr, current, env)
        elif isinstance(stmt, BindVar):
            env[stmt.name] = infer_type(stmt.expr, current, env)
        else:
            t = infer_type(stmt.expr, current, env)
            if isinstance(t, SeriesType):
                elem = t.elem
            elif isinstance(t, ScalarType):
                elem = t.elem  # broadcast
            else:
                raise TypeMismatch("column values", str(t), stmt.span)
            current = current.with_column(stmt.name, elem)
    return current


# ---------------------------------------------------------------------------
# Translation from object code
# ---------------------------------------------------------------------------

_STRING_METHODS = {"split", "replace", "lower", "strip", "count", "contains"}
_AGG_METHODS = {"sum": AggOp.SUM, "min": AggOp.MIN, "max": AggOp.MAX,
                "mean": AggOp.MEAN, "count": AggOp.COUNT, "idxmax": AggOp.IDX_MAX}


class _Accessor(enum.Enum):
    STR = "str"
    DT = "dt"
    LOC = "loc"
    ILOC = "iloc"


@dataclass
class _Marked:
    expr: TcrExpr
    accessor: _Accessor


class _Translator:
    def __init__(self, schema: Schema):
        self.original = schema
        self.schema = schema
        self.env: Dict[str, TcrType] = {}

    def ty(self, expr: TcrExpr) -> TcrType:
        return infer_type(expr, self.schema, self.env)

    def run(self, ast: oc.ObjectAst) -> TcrProgram:
        statements: List[TcrStatement] = []
        dropped = False
        body = list(ast.statements)
        for i, stmt in enumerate(body):
            if oc.is_print_statement(stmt):
                dropped = True
                continue
            if isinstance(stmt, oc.Assign):
                statements.append(self.assign(stmt))
            else:
                if i != len(body) - 1:
                    dropped = True  # dead expression before the end
                    continue
                statements.append(Yield(self.expr(stmt.expr), span=stmt.loc))
        return TcrProgram(tuple(statements), dropped_noops=dropped)

    def assign(self, stmt: oc.Assign) -> TcrStatement:
        target = stmt.target
        if isinstance(target, oc.Name):
            if target.id == self.schema.table_name:
                raise UnsupportedApi("reassigning the table", target.loc)
            expr = self.expr(stmt.expr)
            self.env[target.id] = self.ty(expr)
            return BindVar(target.id, expr, span=stmt.loc)
        if (
            isinstance(target, oc.Subscript)
            and isinstance(target.base, oc.Name)
            and target.base.id == self.schema.table_name
            and isinstance(target.index, oc.StringLit)
        ):
            name = target.index.value
            expr = self.expr(stmt.expr)
            t = self.ty(expr)
            if isinstance(t, SeriesType):
                elem = t.elem
            elif isinstance(t, ScalarType):
                elem = t.elem
            else:
                raise TypeMismatch("column values", str(t), stmt.loc)
            overwrite = self.original.column_type(name) is not None
            self.schema = self.schema.with_column(name, elem)
            return CreateColumn(name, expr, overwrites_original=overwrite, span=stmt.loc)
        raise UnsupportedApi("assignment target", stmt.loc)

    def expr(self, e: oc.ObjectExpr) -> TcrExpr:
        out = self._expr(e)
        if isinstance(out, _Marked):
            raise UnsupportedApi(f"bare .{out.accessor.value} accessor", e.loc)
        return out

    def _expr(self, e: oc.ObjectExpr) -> Union[TcrExpr, _Marked]:
        if isinstance(e, oc.Name):
            if e.id == self.schema.table_name:
                return FrameRef(span=e.loc)
            if e.id in self.env:
                return VarRef(e.id, span=e.loc)
            raise UnknownName(e.id, e.loc)
        if isinstance(e, oc.NumberLit):
            return Literal(e.value, span=e.loc)
        if isinstance(e, oc.StringLit):
            return Literal(e.value, span=e.loc)
        if isinstance(e, oc.BoolLit):
            return Literal(e.value, span=e.loc)
        if isinstance(e, oc.ListLit):
            values = []
            for el in e.elements:
                lit = self._const(el)
                values.append(lit)
            return LiteralList(tuple(values), span=e.loc)
        if isinstance(e, oc.Unary):
            if e.op == "-":
                if isinstance(e.operand, oc.NumberLit):
                    return Literal(-e.operand.value, span=e.loc)
                raise UnsupportedApi("unary minus on an expression", e.loc)
            operand = self.expr(e.operand)
            return NotExpr(operand, span=e.loc)
        if isinstance(e, oc.BinOp):
            if e.op == "//":
                raise UnsupportedApi("floor division", e.loc)
            op = {"+": ArithOp.ADD, "-": ArithOp.SUB, "*": ArithOp.MUL, "/": ArithOp.DIV}[e.op]
            node = BinArith(op, self.expr(e.left), self.expr(e.right), span=e.loc)
            self.ty(node)
            return node
        if isinstance(e, oc.Compare):
            op = {c.value: c for c in CmpOp}[e.op]
            node = CompareExpr(op, self.expr(e.left), self.expr(e.right), span=e.loc)
            self.ty(node)
            return node
        if isinstance(e, oc.BoolOp):
            operands: List[TcrExpr] = []
            for o in e.operands:
                t = self.expr(o)
                # Flatten nested chains so masks stay n-ary.
                if e.op == "&" and isinstance(t, AndExpr):
                    operands.extend(t.operands)
                elif e.op == "|" and isinstance(t, OrExpr):
                    operands.extend(t.operands)
                else:
                    operands.append(t)
            cls = AndExpr if e.op == "&" else OrExpr
            node = cls(tuple(operands), span=e.loc)
            self.ty(node)
            return node
        if isinstance(e, oc.Attribute):
            return self.attribute(e)
        if isinstance(e, oc.Subscript):
            return self.subscript(e)
        if isinstance(e, oc.Call):
            return self.call(e)
        raise UnsupportedApi(type(e).__name__, getattr(e, "loc", oc.Loc()))

    def _const(self, e: oc.ObjectExpr) -> object:
        if isinstance(e, oc.NumberLit):
            return e.value
        if isinstance(e, oc.StringLit):
            return e.value
        if isinstance(e, oc.BoolLit):
            return e.value
        if isinstance(e, oc.Unary) and e.op == "-" and isinstance(e.operand, oc.NumberLit):
            return -e.operand.value
        raise UnsupportedApi("list of non-literal values", e.loc)

    def attribute(self, e: oc.Attribute) -> Union[TcrExpr, _Marked]:
        if e.name in ("str", "dt", "loc", "iloc"):
            base = self._expr(e.base)
            if isinstance(base, _Marked):
                raise UnsupportedApi(f"stacked accessor .{e.name}", e.loc)
            # Library plumbing: the accessor itself means nothing, the
            # following subscript/method resolves against the base type.
            return _Marked(base, _Accessor(e.name))
        base = self._expr(e.base)
        if isinstance(base, _Marked):
            base = base.expr
        t = self.ty(base)
        if e.name == "shape":
            if not isinstance(t, FrameType):
                raise TypeMismatch("frame", str(t), e.loc)
            return Shape(base, span=e.loc)
        if e.name == "T":
            if not isinstance(t, FrameType):
                raise TypeMismatch("frame", str(t), e.loc)
            return Transpose(base, span=e.loc)
        if e.name == "year":
            node = DateYear(base, span=e.loc)
            self.ty(node)
            return node
        raise UnsupportedApi(f".{e.name}", e.loc)

    def subscript(self, e: oc.Subscript) -> TcrExpr:
        base = self._expr(e.base)
        accessor = None
        if isinstance(base, _Marked):
            accessor = base.accessor
            base = base.expr
        t = self.ty(base)

        if isinstance(e.index, oc.Slice):
            if not isinstance(t, FrameType):
                raise UnsupportedApi("slice on a non-table value", e.loc)
            lo = self._int_index(e.index.lo, 0)
            hi = self._int_index(e.index.hi, None)
            return SliceRows(base, lo, hi, span=e.loc)

        if isinstance(t, FrameType):
            if isinstance(e.index, oc.StringLit):
                name = e.index.value
                if self.schema.column_type(name) is None:
                    raise UnknownColumn(name, e.index.loc)
                return ColProject(base, name, span=e.loc)
            if isinstance(e.index, oc.ListLit):
                raise UnsupportedApi("multi-column projection", e.loc)
            if isinstance(e.index, oc.NumberLit):
                raise AmbiguousSubscript("integer subscript on the table", e.loc)
            mask = self.expr(e.index)
            mt = self.ty(mask)
            if isinstance(mt, SeriesType) and mt.elem is CellType.BOOL:
                return RowFilter(base, mask, span=e.loc)
            raise AmbiguousSubscript(f"table subscript of type {mt}", e.loc)

        if isinstance(t, TupleType):
            idx = self._literal_int(e.index)
            if idx is None:
                raise AmbiguousSubscript("non-constant tuple index", e.loc)
            if not (0 <= idx < len(t.labels)):
                raise TypeMismatch("tuple field index", str(idx), e.loc)
            # Row count of a filtered table is an operation of its own,
            # not tuple-field plumbing.
            if idx == 0 and isinstance(base, Shape) and isinstance(base.frame, RowFilter):
                return Agg(AggOp.ROW_COUNT, base.frame, span=e.loc)
            return ElemIndex(base, idx, IndexKind.TUPLE_FIELD, label=t.labels[idx], span=e.loc)

        if isinstance(t, (SeriesType, ScalarType)):
            idx = self._literal_int(e.index)
            if idx is None:
                raise AmbiguousSubscript("non-constant element index", e.loc)
            if accessor is _Accessor.ILOC:
                if not isinstance(t, SeriesType):
                    raise TypeMismatch("series", str(t), e.loc)
                kind = IndexKind.ELEMENT_OF_SERIES
            elif t.elem is CellType.TEXT:
                kind = IndexKind.CHAR_OF_TEXT
            elif isinstance(t.elem, ListOf):
                kind = IndexKind.WORD_OF_LIST
            elif isinstance(t, SeriesType):
                kind = IndexKind.ELEMENT_OF_SERIES
            else:
                raise AmbiguousSubscript(f"index into {t}", e.loc)
            node = ElemIndex(base, idx, kind, span=e.loc)
            self.ty(node)
            return node

        raise AmbiguousSubscript(f"subscript on {t}", e.loc)

    def _literal_int(self, e) -> Optional[int]:
        if isinstance(e, oc.NumberLit) and isinstance(e.value, int):
            return e.value
        if isinstance(e, oc.Unary) and e.op == "-" and isinstance(e.operand, oc.NumberLit) \
                and isinstance(e.operand.value, int):
            return -e.operand.value
        return None

    def _int_index(self, e, default):
        if e is None:
            return default
        v = self._literal_int(e)
        if v is None:
            raise UnsupportedApi("non-constant slice bound", oc.Loc())
        return v

    def call(self, e: oc.Call) -> TcrExpr:
        if not isinstance(e.callee, oc.Attribute):
            name = e.callee.id if isinstance(e.callee, oc.Name) else "call"
            raise UnsupportedApi(f"function call {name}()", e.loc)
        method = e.callee.name
        base = self._expr(e.callee.base)
        if isinstance(base, _Marked):
            base = base.expr
        t = self.ty(base)

        if isinstance(t, FrameType):
            if method == "groupby":
                keys = self._group_keys(e)
                node = GroupBy(base, keys, span=e.loc)
                self.ty(node)
                return node
            if method == "transpose" and not e.args:
                return Transpose(base, span=e.loc)
            if method == "count" and not e.args:
                return Agg(AggOp.COUNT, base, span=e.loc)
            raise UnsupportedApi(method, e.loc)

        if isinstance(t, GroupedType):
            if method == "size" and not e.args:
                return GroupSize(base, span=e.loc)
            raise UnsupportedApi(method, e.loc)

        if isinstance(t, (SeriesType, ScalarType)):
            if method == "count" and len(e.args) == 1:
                node = CountOccurrences(base, self._str_arg(e, 0), span=e.loc)
            elif method == "count" and not e.args:
                node = Agg(AggOp.COUNT, base, span=e.loc)
            elif method == "contains" and len(e.args) == 1:
                node = Contains(base, self._str_arg(e, 0), span=e.loc)
            elif method == "split" and len(e.args) <= 1:
                delim = self._str_arg(e, 0) if e.args else None
                node = Split(base, delim, span=e.loc)
            elif method == "replace" and len(e.args) == 2:
                node = Replace(base, self._str_arg(e, 0), self._str_arg(e, 1), span=e.loc)
            elif method == "lower" and not e.args:
                node = Lower(base, span=e.loc)
            elif method == "strip" and not e.args:
                node = Strip(base, span=e.loc)
            elif method == "len" and not e.args:
                node = Len(base, span=e.loc)
            elif method == "ceil" and len(e.args) == 1:
                node = DateCeil(base, self._str_arg(e, 0), span=e.loc)
            elif method in _AGG_METHODS and not e.args:
                node = Agg(_AGG_METHODS[method], base, span=e.loc)
            else:
                raise UnsupportedApi(method, e.loc)
            self.ty(node)
            return node

        raise UnsupportedApi(method, e.loc)

    def _str_arg(self, e: oc.Call, i: int) -> str:
        arg = e.args[i]
        if not isinstance(arg, oc.StringLit):
            raise UnsupportedApi("non-literal string argument", e.loc)
        return arg.value

    def _group_keys(self, e: oc.Call) -> Tuple[str, ...]:
        if len(e.args) != 1:
            raise UnsupportedApi("groupby arguments", e.loc)
        arg = e.args[0]
        if isinstance(arg, oc.StringLit):
            return (arg.value,)
        if isinstance(arg, oc.ListLit) and all(isinstance(x, oc.StringLit) for x in arg.elements):
            return tuple(x.value for x in arg.elements)
        raise UnsupportedApi("groupby key", e.loc)


def translate(ast: oc.ObjectAst, schema: Schema) -> TcrProgram:
    """Type-directed translation of parsed object code into the DSL."""
    return _Translator(schema).run(ast)


# ---------------------------------------------------------------------------
# Canonical code rendering
# ---------------------------------------------------------------------------

class _Renderer:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.env: Dict[str, TcrType] = {}

    def ty(self, expr: TcrExpr) -> TcrType:
        return infer_type(expr, self.schema, self.env)

    def _series(self, e: TcrExpr) -> bool:
        return isinstance(self.ty(e), SeriesType)

    def _str_method(self, subject: TcrExpr, method: str, args: List[oc.ObjectExpr]) -> oc.ObjectExpr:
        base = self.expr(subject)
        if self._series(subject):
            base = oc.Attribute(base, "str")
        return oc.Call(oc.Attribute(base, method), tuple(args))

    def expr(self, e: TcrExpr) -> oc.ObjectExpr:
        if isinstance(e, FrameRef):
            return oc.Name(self.schema.table_name)
        if isinstance(e, VarRef):
            return oc.Name(e.name)
        if isinstance(e, Literal):
            if isinstance(e.value, bool):
                return oc.BoolLit(e.value)
            if isinstance(e.value, str):
                return oc.StringLit(e.value)
            if isinstance(e.value, int) or (isinstance(e.value, float) and e.value >= 0):
                return oc.NumberLit(e.value)
            return oc.Unary("-", oc.NumberLit(-e.value))
        if isinstance(e, LiteralList):
            elems = []
            for v in e.values:
                if isinstance(v, bool):
                    elems.append(oc.BoolLit(v))
                elif isinstance(v, str):
                    elems.append(oc.StringLit(v))
                elif v < 0:
                    elems.append(oc.Unary("-", oc.NumberLit(-v)))
                else:
                    elems.append(oc.NumberLit(v))
            return oc.ListLit(tuple(elems))
        if isinstance(e, ColProject):
            return oc.Subscript(self.expr(e.frame), oc.StringLit(e.name))
        if isinstance(e, RowFilter):
            return oc.Subscript(self.expr(e.frame), self.expr(e.mask))
        if isinstance(e, SliceRows):
            lo = None if e.lo == 0 else oc.NumberLit(e.lo)
            hi = None if e.hi is None else oc.NumberLit(e.hi)
            return oc.Subscript(oc.Attribute(self.expr(e.frame), "iloc"), oc.Slice(lo, hi))
        if isinstance(e, CompareExpr):
            return oc.Compare(e.op.value, self.expr(e.left), self.expr(e.right))
        if isinstance(e, AndExpr):
            return oc.BoolOp("&", tuple(self.expr(o) for o in e.operands))
        if isinstance(e, OrExpr):
            return oc.BoolOp("|", tuple(self.expr(o) for o in e.operands))
        if isinstance(e, NotExpr):
            return oc.Unary("~", self.expr(e.operand))
        if isinstance(e, BinArith):
            return oc.BinOp(e.op.value, self.expr(e.left), self.expr(e.right))
        if isinstance(e, Split):
            args = [] if e.delim is None else [oc.StringLit(e.delim)]
            return self._str_method(e.subject, "split", args)
        if isinstance(e, Replace):
            return self._str_method(e.subject, "replace",
                                    [oc.StringLit(e.pattern), oc.StringLit(e.replacement)])
        if isinstance(e, Lower):
            return self._str_method(e.subject, "lower", [])
        if isinstance(e, Strip):
            return self._str_method(e.subject, "strip", [])
        if isinstance(e, CountOccurrences):
            return self._str_method(e.subject, "count", [oc.StringLit(e.pattern)])
        if isinstance(e, Contains):
            return self._str_method(e.subject, "contains", [oc.StringLit(e.pattern)])
        if isinstance(e, Len):
            return self._str_method(e.subject, "len", [])
        if isinstance(e, ElemIndex):
            idx = oc.NumberLit(e.index) if e.index >= 0 else oc.Unary("-", oc.NumberLit(-e.index))
            if e.kind is IndexKind.TUPLE_FIELD:
                return oc.Subscript(self.expr(e.subject), idx)
            if e.kind is IndexKind.ELEMENT_OF_SERIES:
                return oc.Subscript(oc.Attribute(self.expr(e.subject), "iloc"), idx)
            base = self.expr(e.subject)
            if self._series(e.subject):
                base = oc.Attribute(base, "str")
            return oc.Subscript(base, idx)
        if isinstance(e, Agg):
            if e.op is AggOp.ROW_COUNT:
                return oc.Subscript(oc.Attribute(self.expr(e.subject), "shape"), oc.NumberLit(0))
            return oc.Call(oc.Attribute(self.expr(e.subject), e.op.value), ())
        if isinstance(e, Shape):
            return oc.Attribute(self.expr(e.frame), "shape")
        if isinstance(e, GroupBy):
            if len(e.keys) == 1:
                arg: oc.ObjectExpr = oc.StringLit(e.keys[0])
            else:
                arg = oc.ListLit(tuple(oc.StringLit(k) for k in e.keys))
            return oc.Call(oc.Attribute(self.expr(e.frame), "groupby"), (arg,))
        if isinstance(e, GroupSize):
            return oc.Call(oc.Attribute(self.expr(e.grouped), "size"), ())
        if isinstance(e, Transpose):
            return oc.Call(oc.Attribute(self.expr(e.frame), "transpose"), ())
        if isinstance(e, DateYear):
            base = self.expr(e.subject)
            if self._series(e.subject):
                base = oc.Attribute(base, "dt")
            return oc.Attribute(base, "year")
        if isinstance(e, DateCeil):
            base = self.expr(e.subject)
            if self._series(e.subject):
                base = oc.Attribute(base, "dt")
            return oc.Call(oc.Attribute(base, "ceil"), (oc.StringLit(e.unit),))
        raise TypeError(f"cannot render {e!r}")

    def statement(self, stmt: TcrStatement) -> oc.ObjectStmt:
        if isinstance(stmt, CreateColumn):
            target = oc.Subscript(oc.Name(self.schema.table_name), oc.StringLit(stmt.name))
            node = oc.Assign(target, self.expr(stmt.expr))
            t = self.ty(stmt.expr)
            elem = t.elem if isinstance(t, (SeriesType, ScalarType)) else CellType.TEXT
            self.schema = self.schema.with_column(stmt.name, elem)
            return node
        if isinstance(stmt, BindVar):
            node = oc.Assign(oc.Name(stmt.name), self.expr(stmt.expr))
            self.env[stmt.name] = self.ty(stmt.expr)
            return node
        return oc.ExprStmt(self.expr(stmt.expr))


def render_code(program: TcrProgram, schema: Schema) -> str:
    """Emit canonical object code; translate(parse(render_code(p))) == p."""
    renderer = _Renderer(schema)
    ast = oc.ObjectAst(tuple(renderer.statement(s) for s in program.statements))
    return oc.emit_canonical(ast)


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------

def to_debug_json(program: TcrProgram) -> dict:
    """Stable JSON tree of a program (node kind + children), for golden tests."""

    def expr(e: TcrExpr) -> dict:
        kind = type(e).__name__
        if isinstance(e, FrameRef):
            return {"kind": "Frame"}
        if isinstance(e, VarRef):
            return {"kind": "Var", "name": e.name}
        if isinstance(e, Literal):
            return {"kind": "Literal", "value": e.value}
        if isinstance(e, LiteralList):
            return {"kind": "LiteralList", "values": list(e.values)}
        if isinstance(e, ColProject):
            return {"kind": "ColProject", "name": e.name, "frame": expr(e.frame)}
        if isinstance(e, RowFilter):
            return {"kind": "RowFilter", "frame": expr(e.frame), "mask": expr(e.mask)}
        if isinstance(e, CompareExpr):
            return {"kind": "Compare", "op": e.op.name, "left": expr(e.left), "right": expr(e.right)}
        if isinstance(e, (AndExpr, OrExpr)):
            return {"kind": kind[:-4], "operands": [expr(o) for o in e.operands]}
        if isinstance(e, NotExpr):
            return {"kind": "Not", "operand": expr(e.operand)}
        if isinstance(e, BinArith):
            return {"kind": "Arith", "op": e.op.name, "left": expr(e.left), "right": expr(e.right)}
        if isinstance(e, Split):
            return {"kind": "Split", "delim": e.delim, "subject": expr(e.subject)}
        if isinstance(e, Replace):
            return {"kind": "Replace", "pattern": e.pattern, "replacement": e.replacement,
                    "subject": expr(e.subject)}
        if isinstance(e, (Lower, Strip, Len)):
            return {"kind": kind, "subject": expr(e.subject)}
        if isinstance(e, (CountOccurrences, Contains)):
            return {"kind": kind, "pattern": e.pattern, "subject": expr(e.subject)}
        if isinstance(e, ElemIndex):
            out = {"kind": "ElemIndex", "index": e.index, "style": e.kind.name,
                   "subject": expr(e.subject)}
            if e.label:
                out["label"] = e.label
            return out
        if isinstance(e, SliceRows):
            return {"kind": "SliceRows", "lo": e.lo, "hi": e.hi, "frame": expr(e.frame)}
        if isinstance(e, Agg):
            return {"kind": "Agg", "op": e.op.name, "subject": expr(e.subject)}
        if isinstance(e, Shape):
            return {"kind": "Shape", "frame": expr(e.frame)}
        if isinstance(e, GroupBy):
            return {"kind": "GroupBy", "keys": list(e.keys), "frame": expr(e.frame)}
        if isinstance(e, GroupSize):
            return {"kind": "GroupSize", "grouped": expr(e.grouped)}
        if isinstance(e, Transpose):
            return {"kind": "Transpose", "frame": expr(e.frame)}
        if isinstance(e, DateYear):
            return {"kind": "Year", "subject": expr(e.subject)}
        if isinstance(e, DateCeil):
            return {"kind": "Ceil", "unit": e.unit, "subject": expr(e.subject)}
        raise TypeError(repr(e))

    def stmt(s: TcrStatement) -> dict:
        if isinstance(s, CreateColumn):
            return {"kind": "CreateColumn", "name": s.name,
                    "overwrite": s.overwrites_original, "expr": expr(s.expr)}
        if isinstance(s, BindVar):
            return {"kind": "BindVar", "name": s.name, "expr": expr(s.expr)}
        return {"kind": "Yield", "expr": expr(s.expr)}

    return {"statements": [stmt(s) for s in program.statements]}

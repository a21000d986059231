"""Grounded utterances: numbered steps rendered from a program and
parseable back into one.

Layout walks the program and picks between two styles:

* instructional — a linear chain of single-subject operations becomes a
  sequence of imperative steps, subject first ("select column Missions",
  "calculate count 'STS'");
* descriptive — an expression rooted at a binary operator, and every
  statement of a multi-statement program, becomes one inline phrase
  ("column Space Flight (hr) divided by count 'STS' from column
  Missions").

The same templates drive ``parse_grounded``, the inverse parser, so a
generated utterance (possibly edited by the user) round-trips back into
the DSL.  Indices are displayed one-based and converted back before
anything reaches the engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from . import tcr
from .table import CellType, format_value
from .tcr import (
    Agg, AggOp, AndExpr, ArithOp, BinArith, BindVar, CmpOp, ColProject,
    CompareExpr, Contains, CountOccurrences, CreateColumn, DateCeil, DateYear,
    ElemIndex, FrameRef, GroupBy, GroupSize, IndexKind, Len, Literal,
    LiteralList, Lower, NotExpr, OrExpr, Replace, RowFilter, Schema, Shape,
    SliceRows, Split, Strip, TcrExpr, TcrProgram, TcrStatement, Transpose,
    VarRef, Yield, check_program,
)


class ExplanationUnavailable(Exception):
    """No utterance template covers this program node."""

    def __init__(self, node_kind: str):
        super().__init__(f"no explanation available for {node_kind}")
        self.node_kind = node_kind


class GrammarMismatch(Exception):
    def __init__(self, step_index: int, detail: str):
        super().__init__(f"step {step_index + 1}: {detail}")
        self.step_index = step_index
        self.detail = detail


@dataclass(frozen=True)
class Step:
    text: str
    stmt_index: int
    node_kind: str


@dataclass(frozen=True)
class GroundedUtterance:
    steps: Tuple[Step, ...]

    @property
    def texts(self) -> List[str]:
        return [s.text for s in self.steps]

    def numbered(self) -> str:
        return concat_steps(self.texts)


@dataclass(frozen=True)
class ErNode:
    """One natural-language fragment in the explanation tree."""

    template_id: str
    text: str
    subject_arity: int  # 0, 1, or 2+ (multi-subject nodes stay descriptive)
    style: str  # "instructional" | "descriptive"


# ---------------------------------------------------------------------------
# Index display adjustment
# ---------------------------------------------------------------------------

def adjust_index_outbound(i: int) -> int:
    """Zero-based engine index -> one-based display index."""
    if i < 0:
        raise ValueError("outbound adjustment needs a non-negative index")
    return i + 1


def adjust_index_inbound(k: int) -> int:
    """One-based display index -> zero-based engine index."""
    if k < 1:
        raise ValueError("display indices start at 1")
    return k - 1


_INDEX_NOUN = {
    IndexKind.CHAR_OF_TEXT: ("character", "text"),
    IndexKind.WORD_OF_LIST: ("word", "list"),
    IndexKind.ELEMENT_OF_SERIES: ("element", "array"),
}

_ORDINAL_WORDS = {"first": 1, "second": 2, "third": 3}


def element_phrase(kind: IndexKind, index: int) -> str:
    """Display phrase for an element access, e.g. index 1 -> "element 2 of the array"."""
    noun, container = _INDEX_NOUN[kind]
    if index == -1:
        return f"the last {noun} of the {container}"
    return f"{noun} {adjust_index_outbound(index)} of the {container}"


def parse_display_index(phrase: str) -> int:
    """Invert the display templates: "element 2" -> 1, "position 1" -> 0."""
    m = re.fullmatch(r"(?:element|character|word|position) (\d+)", phrase)
    if m:
        return adjust_index_inbound(int(m.group(1)))
    m = re.fullmatch(r"the (first|second|third) (?:element|character|word)", phrase)
    if m:
        return adjust_index_inbound(_ORDINAL_WORDS[m.group(1)])
    raise ValueError(f"not a display index: {phrase!r}")


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

_CMP_PHRASE = {
    CmpOp.EQ: "is",
    CmpOp.NE: "NotEq",
    CmpOp.GT: "greater than",
    CmpOp.GE: "greater than or equal to",
    CmpOp.LT: "less than",
    CmpOp.LE: "less than or equal to",
}

_ARITH_PHRASE = {
    ArithOp.ADD: "+",
    ArithOp.SUB: "-",
    ArithOp.MUL: "*",
    ArithOp.DIV: "divided by",
}

_AGG_CHAIN = {
    AggOp.SUM: "sum",
    AggOp.MIN: "minimum",
    AggOp.MAX: "maximum",
    AggOp.MEAN: "average",
    AggOp.COUNT: "count",
    AggOp.ROW_COUNT: "return number of rows",
    AggOp.IDX_MAX: "position of the maximum",
}

_AGG_INLINE = {
    AggOp.SUM: "sum",
    AggOp.MIN: "minimum",
    AggOp.MAX: "maximum",
    AggOp.MEAN: "average",
    AggOp.COUNT: "count",
    AggOp.ROW_COUNT: "the number of rows",
    AggOp.IDX_MAX: "position of the maximum",
}

# Node kind -> (chain template, inline template).  {q} marks quoted slots.
TEMPLATE_TABLE = {
    "CreateColumn": ("create column {name}", "create column {name} from {expr}"),
    "BindVar": ("define variable {name}", "define variable {name} as {expr}"),
    "ColProject": ("select column {name}", "column {name}"),
    "RowFilter": ("select rows where {mask}", "rows where {mask}"),
    "SliceRows": ("take rows {lo} to {hi}", "rows {lo} to {hi}"),
    "Split": ("split the text on '{d}'", "the text split on '{d}' from {s}"),
    "Replace": ("replace '{a}' with '{b}'", "replace '{a}' with '{b}' from {s}"),
    "Lower": ("lower", "lower from {s}"),
    "Strip": ("strip", "strip from {s}"),
    "CountOccurrences": ("calculate count '{p}'", "count '{p}' from {s}"),
    "Contains": ("contains '{p}'", "contains '{p}' from {s}"),
    "Len": ("len", "len from {s}"),
    "ElemIndex": ("take {element}", "{element} from {s}"),
    "TupleField": ("take the {label}", "the {label} from {s}"),
    "Agg": ("{agg}", "{agg} from {s}"),
    "Shape": ("get the dimensions", "the dimensions"),
    "GroupBy": ("group by {keys}", "grouped by {keys}"),
    "GroupSize": ("size of each group", "the size of each group from {s}"),
    "Transpose": ("transpose the table", "the transpose"),
    "DateYear": ("year", "year from {s}"),
    "DateCeil": ("round up to '{u}'", "round up to '{u}' from {s}"),
    "Compare": ("{l} {op} {r}", "{l} {op} {r}"),
    "Arith": ("{l} {op} {r}", "{l} {op} {r}"),
}


def _quote(s: str) -> str:
    return f"'{s}'"


def _literal_text(value: object) -> str:
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, (int, float)):
        return format_value(float(value))
    return str(value)


def _group_phrase(keys: Sequence[str], inline: bool) -> str:
    word = "grouped by" if inline else "group by"
    if len(keys) == 1:
        return f"{word} column {keys[0]}"
    return f"{word} columns " + " and ".join(keys)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

_CHAIN_SUBJECT_ATTR = {
    ColProject: "frame",
    RowFilter: "frame",
    SliceRows: "frame",
    Split: "subject",
    Replace: "subject",
    Lower: "subject",
    Strip: "subject",
    CountOccurrences: "subject",
    Contains: "subject",
    Len: "subject",
    ElemIndex: "subject",
    Agg: "subject",
    Shape: "frame",
    GroupBy: "frame",
    GroupSize: "grouped",
    Transpose: "frame",
    DateYear: "subject",
    DateCeil: "subject",
}


def _chain_spine(expr: TcrExpr) -> Optional[List[TcrExpr]]:
    """Bottom-up operation spine of a linear single-subject chain, or None."""
    spine: List[TcrExpr] = []
    node = expr
    while True:
        if isinstance(node, FrameRef):
            spine.reverse()
            return spine
        if isinstance(node, VarRef):
            spine.append(node)
            spine.reverse()
            return spine
        attr = _CHAIN_SUBJECT_ATTR.get(type(node))
        if attr is None:
            return None
        spine.append(node)
        node = getattr(node, attr)


def _chain_step(node: TcrExpr) -> str:
    if isinstance(node, VarRef):
        return f"select variable {node.name}"
    if isinstance(node, ColProject):
        return f"select column {node.name}"
    if isinstance(node, RowFilter):
        return f"select rows where {_describe(node.mask)}"
    if isinstance(node, SliceRows):
        hi = "the end" if node.hi is None else str(node.hi)
        return f"take rows {adjust_index_outbound(node.lo)} to {hi}"
    if isinstance(node, Split):
        return "split the text" if node.delim is None else f"split the text on {_quote(node.delim)}"
    if isinstance(node, Replace):
        return f"replace {_quote(node.pattern)} with {_quote(node.replacement)}"
    if isinstance(node, Lower):
        return "lower"
    if isinstance(node, Strip):
        return "strip"
    if isinstance(node, CountOccurrences):
        return f"calculate count {_quote(node.pattern)}"
    if isinstance(node, Contains):
        return f"contains {_quote(node.pattern)}"
    if isinstance(node, Len):
        return "len"
    if isinstance(node, ElemIndex):
        if node.kind is IndexKind.TUPLE_FIELD:
            return f"take the {node.label}"
        if node.index < -1:
            raise ExplanationUnavailable("negative element index")
        return f"take {element_phrase(node.kind, node.index)}"
    if isinstance(node, Agg):
        return _AGG_CHAIN[node.op]
    if isinstance(node, Shape):
        return "get the dimensions"
    if isinstance(node, GroupBy):
        return _group_phrase(node.keys, inline=False)
    if isinstance(node, GroupSize):
        return "size of each group"
    if isinstance(node, Transpose):
        return "transpose the table"
    if isinstance(node, DateYear):
        return "year"
    if isinstance(node, DateCeil):
        return f"round up to {_quote(node.unit)}"
    raise ExplanationUnavailable(type(node).__name__)


def _from_clause(subject: TcrExpr) -> str:
    if isinstance(subject, FrameRef):
        return ""
    return f" from {_describe(subject)}"


def _describe(expr: TcrExpr) -> str:
    """Inline (descriptive) phrase for an expression."""
    if isinstance(expr, FrameRef):
        return "the table"
    if isinstance(expr, VarRef):
        return f"variable {expr.name}"
    if isinstance(expr, Literal):
        # Standalone text is quoted; comparison operands render it bare.
        if isinstance(expr.value, str):
            return _quote(expr.value)
        return _literal_text(expr.value)
    if isinstance(expr, LiteralList):
        raise ExplanationUnavailable("list of raw values")
    if isinstance(expr, ColProject):
        if not isinstance(expr.frame, FrameRef):
            return f"column {expr.name} from {_describe(expr.frame)}"
        return f"column {expr.name}"
    if isinstance(expr, BinArith):
        return f"{_describe(expr.left)} {_ARITH_PHRASE[expr.op]} {_describe(expr.right)}"
    if isinstance(expr, CompareExpr):
        left, right = (
            _literal_text(o.value) if isinstance(o, Literal) else _describe(o)
            for o in (expr.left, expr.right)
        )
        return f"{left} {_CMP_PHRASE[expr.op]} {right}"
    if isinstance(expr, AndExpr):
        return " and ".join(_describe(o) for o in expr.operands)
    if isinstance(expr, OrExpr):
        return " or ".join(_describe(o) for o in expr.operands)
    if isinstance(expr, NotExpr):
        inner = _describe(expr.operand)
        if isinstance(expr.operand, (AndExpr, OrExpr)):
            inner = f"({inner})"
        return f"not {inner}"
    if isinstance(expr, RowFilter):
        return f"rows where {_describe(expr.mask)}{_from_clause(expr.frame)}"
    if isinstance(expr, SliceRows):
        hi = "the end" if expr.hi is None else str(expr.hi)
        return f"rows {adjust_index_outbound(expr.lo)} to {hi}{_from_clause(expr.frame)}"
    if isinstance(expr, Split):
        if expr.delim is None:
            return f"the text split from {_describe(expr.subject)}"
        return f"the text split on {_quote(expr.delim)} from {_describe(expr.subject)}"
    if isinstance(expr, Replace):
        return (f"replace {_quote(expr.pattern)} with {_quote(expr.replacement)}"
                f" from {_describe(expr.subject)}")
    if isinstance(expr, Lower):
        return f"lower from {_describe(expr.subject)}"
    if isinstance(expr, Strip):
        return f"strip from {_describe(expr.subject)}"
    if isinstance(expr, CountOccurrences):
        return f"count {_quote(expr.pattern)} from {_describe(expr.subject)}"
    if isinstance(expr, Contains):
        return f"contains {_quote(expr.pattern)} from {_describe(expr.subject)}"
    if isinstance(expr, Len):
        return f"len from {_describe(expr.subject)}"
    if isinstance(expr, ElemIndex):
        if expr.kind is IndexKind.TUPLE_FIELD:
            return f"the {expr.label} from {_describe(expr.subject)}"
        if expr.index < -1:
            raise ExplanationUnavailable("negative element index")
        return f"{element_phrase(expr.kind, expr.index)} from {_describe(expr.subject)}"
    if isinstance(expr, Agg):
        if isinstance(expr.subject, FrameRef):
            return _AGG_INLINE[expr.op]
        return f"{_AGG_INLINE[expr.op]} from {_describe(expr.subject)}"
    if isinstance(expr, Shape):
        return f"the dimensions{_from_clause(expr.frame)}"
    if isinstance(expr, GroupBy):
        return f"{_group_phrase(expr.keys, inline=True)}{_from_clause(expr.frame)}"
    if isinstance(expr, GroupSize):
        return f"the size of each group from {_describe(expr.grouped)}"
    if isinstance(expr, Transpose):
        return f"the transpose{_from_clause(expr.frame)}"
    if isinstance(expr, DateYear):
        return f"year from {_describe(expr.subject)}"
    if isinstance(expr, DateCeil):
        return f"round up to {_quote(expr.unit)} from {_describe(expr.subject)}"
    raise ExplanationUnavailable(type(expr).__name__)


def explanation_nodes(program: TcrProgram) -> List[Tuple[int, ErNode]]:
    """Flatten a program into explanation fragments, one per future step.

    A single-statement chain expands instructionally (one fragment per
    operation, subject first); everything else renders descriptively.
    """
    if not program.statements:
        raise ExplanationUnavailable("empty program")
    nodes: List[Tuple[int, ErNode]] = []

    def instructional(i: int, node: TcrExpr) -> None:
        nodes.append((i, ErNode(type(node).__name__, _chain_step(node), 1, "instructional")))

    def descriptive(i: int, node, text: str) -> None:
        nodes.append((i, ErNode(type(node).__name__, text, 2, "descriptive")))

    if len(program.statements) == 1:
        stmt = program.statements[0]
        if isinstance(stmt, (CreateColumn, BindVar)):
            lead = (f"create column {stmt.name}" if isinstance(stmt, CreateColumn)
                    else f"define variable {stmt.name}")
            nodes.append((0, ErNode(type(stmt).__name__, lead, 1, "instructional")))
        expr = stmt.expr
        spine = _chain_spine(expr)
        if spine:
            for node in spine:
                instructional(0, node)
        else:
            descriptive(0, expr, _describe(expr))
    else:
        for i, stmt in enumerate(program.statements):
            if isinstance(stmt, CreateColumn):
                descriptive(i, stmt, f"create column {stmt.name} from {_describe(stmt.expr)}")
            elif isinstance(stmt, BindVar):
                descriptive(i, stmt, f"define variable {stmt.name} as {_describe(stmt.expr)}")
            else:
                descriptive(i, stmt, _describe(stmt.expr))
    return nodes


def generate_utterance(program: TcrProgram) -> GroundedUtterance:
    """Render a program as ordered steps (raises ExplanationUnavailable)."""
    steps = tuple(
        Step(er.text, i, er.template_id) for i, er in explanation_nodes(program)
    )
    return GroundedUtterance(steps)


def concat_steps(texts: Sequence[str]) -> str:
    """Join edited steps into the numbered inline query: "(1) …, (2) …"."""
    texts = [t.strip() for t in texts if t and t.strip()]
    if not texts:
        raise ValueError("no non-empty steps to concatenate")
    return ", ".join(f"({i + 1}) {t}" for i, t in enumerate(texts))


_STEP_SPLIT_RE = re.compile(r",\s*\(\d+\)\s+")


def split_query_steps(query: str) -> Optional[List[str]]:
    """Split a numbered query back into step texts; None when not numbered."""
    text = query.strip()
    m = re.match(r"^\(\d+\)\s+", text)
    if not m:
        return None
    return [s.strip() for s in _STEP_SPLIT_RE.split(text[m.end():])]


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

_QUOTE_TRANSLATION = {ord(c): "'" for c in "‘’“”`"}


def _collapse_spaces_outside_quotes(text: str) -> str:
    out = []
    in_quote = False
    pending_space = False
    for ch in text:
        if ch == "'":
            if pending_space:
                out.append(" ")
                pending_space = False
            in_quote = not in_quote
            out.append(ch)
        elif not in_quote and ch.isspace():
            pending_space = bool(out)
        else:
            if pending_space:
                out.append(" ")
                pending_space = False
            out.append(ch)
    return "".join(out)


def normalize_step(text: str) -> str:
    """Straighten curly quotes, drop one trailing period, tidy spaces.

    Whitespace inside quoted literals is preserved verbatim.
    """
    text = text.translate(_QUOTE_TRANSLATION).replace('"', "'")
    text = _collapse_spaces_outside_quotes(text)
    if text.endswith("."):
        text = text[:-1].rstrip()
    return text


def normalize_for_comparison(text: str) -> str:
    """Quote-insensitive form used by golden comparisons."""
    text = normalize_step(text)
    return re.sub(r"\s+", " ", text.replace("'", "")).strip()


def utterances_match(a: str, b: str) -> bool:
    return normalize_for_comparison(a) == normalize_for_comparison(b)


# ---------------------------------------------------------------------------
# Inverse parser: grounded steps -> program
# ---------------------------------------------------------------------------

class _Mismatch(Exception):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


def _split_top_level(text: str, keyword: str) -> List[str]:
    """Split on a spaced keyword outside quotes and parentheses."""
    needle = f" {keyword} "
    parts: List[str] = []
    depth = 0
    in_quote = False
    i = 0
    start = 0
    while i < len(text):
        ch = text[i]
        if ch == "'":
            in_quote = not in_quote
        elif not in_quote:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth = max(0, depth - 1)
            elif depth == 0 and text.startswith(needle, i):
                parts.append(text[start:i])
                i += len(needle)
                start = i
                continue
        i += 1
    parts.append(text[start:])
    return parts


def _find_top_level(text: str, needle: str) -> List[int]:
    positions = []
    depth = 0
    in_quote = False
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "'":
            in_quote = not in_quote
        elif not in_quote:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth = max(0, depth - 1)
            elif depth == 0 and text.startswith(needle, i):
                positions.append(i)
        i += 1
    return positions


_NUMBER_TEXT_RE = re.compile(r"^-?(\d+\.?\d*|\.\d+)$")

_ELEMENT_RE = re.compile(
    r"^(character|word|element) (\d+) of the (?:text|list|array)$")
_ELEMENT_ORDINAL_RE = re.compile(
    r"^the (first|second|third|last) (character|word|element) of the (?:text|list|array)$")
_ELEMENT_KIND = {
    "character": IndexKind.CHAR_OF_TEXT,
    "word": IndexKind.WORD_OF_LIST,
    "element": IndexKind.ELEMENT_OF_SERIES,
}

_AGG_WORDS = {
    "sum": AggOp.SUM,
    "minimum": AggOp.MIN,
    "min": AggOp.MIN,
    "maximum": AggOp.MAX,
    "max": AggOp.MAX,
    "average": AggOp.MEAN,
    "mean": AggOp.MEAN,
    "count": AggOp.COUNT,
    "position of the maximum": AggOp.IDX_MAX,
}

_TUPLE_LABELS = {"rows": 0, "columns": 1}


class _GroundedParser:
    """Parses step texts against the utterance grammar, schema-directed.

    Like the code translation, parsing is type-directed: a candidate
    reading that does not type-check is discarded and the next split
    point is tried.  The schema grows as statements create columns.
    """

    def __init__(self, schema: Schema):
        self.schema = schema
        self.vars: List[str] = []
        self.env_types: Dict[str, object] = {}

    # -- column/variable name resolution ------------------------------------

    def known_column(self, name: str) -> bool:
        return self.schema.column_type(name) is not None

    def checked(self, node: TcrExpr) -> TcrExpr:
        try:
            tcr.infer_type(node, self.schema, self.env_types)
        except tcr.TranslateError as exc:
            raise _Mismatch(str(exc))
        return node

    def bind_column(self, name: str, expr: TcrExpr) -> None:
        try:
            t = tcr.infer_type(expr, self.schema, self.env_types)
        except tcr.TranslateError as exc:
            raise _Mismatch(str(exc))
        if not isinstance(t, (tcr.SeriesType, tcr.ScalarType)):
            raise _Mismatch(f"{t} cannot fill a column")
        self.schema = self.schema.with_column(name, t.elem)

    def bind_variable(self, name: str, expr: TcrExpr) -> None:
        try:
            self.env_types[name] = tcr.infer_type(expr, self.schema, self.env_types)
        except tcr.TranslateError as exc:
            raise _Mismatch(str(exc))
        self.vars.append(name)

    # -- descriptive expressions ---------------------------------------------

    def desc(self, text: str) -> TcrExpr:
        text = text.strip()
        if not text:
            raise _Mismatch("empty expression")
        return self.desc_or(text)

    def desc_or(self, text: str) -> TcrExpr:
        # " or " inside "greater/less than or equal to" is not a connective.
        needle = " or "
        positions = [
            p for p in _find_top_level(text, needle)
            if not (text[:p].endswith(" than") and text[p:].startswith(" or equal to "))
        ]
        if positions:
            parts = []
            last = 0
            for p in positions:
                parts.append(text[last:p])
                last = p + len(needle)
            parts.append(text[last:])
            try:
                return self.checked(OrExpr(tuple(self.desc_and_level(p) for p in parts)))
            except _Mismatch:
                pass  # the connective belongs to a nested phrase
        return self.desc_and_level(text)

    def desc_and_level(self, text: str) -> TcrExpr:
        parts = _split_top_level(text, "and")
        if len(parts) > 1:
            try:
                return self.checked(AndExpr(tuple(self.desc_not(p) for p in parts)))
            except _Mismatch:
                pass
        return self.desc_not(text)

    def desc_not(self, text: str) -> TcrExpr:
        text = text.strip()
        if text.startswith("not "):
            return NotExpr(self.desc_not(text[4:]))
        return self.desc_compare(text)

    def desc_compare(self, text: str) -> TcrExpr:
        for op, phrase in [
            (CmpOp.GE, "greater than or equal to"),
            (CmpOp.LE, "less than or equal to"),
            (CmpOp.GT, "greater than"),
            (CmpOp.LT, "less than"),
            (CmpOp.NE, "NotEq"),
            (CmpOp.EQ, "is"),
        ]:
            needle = f" {phrase} "
            for pos in _find_top_level(text, needle):
                left, right = text[:pos], text[pos + len(needle):]
                # Bare text is a literal only opposite a structured operand,
                # so junk like "what is the average" stays unparsed.
                try:
                    lhs = self.desc_add(left)
                except _Mismatch:
                    try:
                        rhs = self.desc_add(right)
                    except _Mismatch:
                        continue
                    lhs = self._bare_literal(left)
                    if lhs is None:
                        continue
                    candidate = CompareExpr(op, self._coerce_literal(rhs, lhs), rhs)
                else:
                    try:
                        rhs = self.desc_add(right)
                    except _Mismatch:
                        rhs = self._bare_literal(right)
                        if rhs is None:
                            continue
                    candidate = CompareExpr(op, lhs, self._coerce_literal(lhs, rhs))
                try:
                    return self.checked(candidate)
                except _Mismatch:
                    continue
        return self.desc_add(text)

    _LITERAL_FORBIDDEN = (
        " or ", " and ", " from ", " is ", " NotEq ", " divided by ",
        " greater than", " less than", " + ", " - ", " * ",
    )

    @staticmethod
    def _bare_literal(text: str) -> Optional[Literal]:
        # A bare literal is a plain noun phrase; anything carrying grammar
        # keywords must parse structurally or not at all.
        text = text.strip()
        if not text or any(c in text for c in "()'"):
            return None
        if any(needle in text for needle in _GroundedParser._LITERAL_FORBIDDEN):
            return None
        if text.startswith(("not ", "column ", "variable ", "rows where ")):
            return None
        return Literal(text)

    def _coerce_literal(self, anchor: TcrExpr, side: TcrExpr) -> TcrExpr:
        # "column City is 1970" with a text column means the text "1970".
        if not (isinstance(side, Literal) and isinstance(side.value, (int, float))
                and not isinstance(side.value, bool)):
            return side
        if isinstance(anchor, ColProject):
            t = self.schema.column_type(anchor.name)
            if t is CellType.TEXT:
                return Literal(format_value(side.value))
        return side

    @staticmethod
    def _rightmost_op(text: str, ops) -> Optional[Tuple[int, object, str]]:
        # Left associativity: split at the rightmost operator of the level.
        best = None
        for op, token in ops:
            for pos in _find_top_level(text, f" {token} "):
                if best is None or pos > best[0]:
                    best = (pos, op, token)
        return best

    def desc_add(self, text: str) -> TcrExpr:
        found = self._rightmost_op(text, [(ArithOp.ADD, "+"), (ArithOp.SUB, "-")])
        if found:
            pos, op, token = found
            left = self.desc_add(text[:pos])
            right = self.desc_mul(text[pos + len(token) + 2:])
            return BinArith(op, left, right)
        return self.desc_mul(text)

    def desc_mul(self, text: str) -> TcrExpr:
        found = self._rightmost_op(text, [(ArithOp.DIV, "divided by"), (ArithOp.MUL, "*")])
        if found:
            pos, op, token = found
            left = self.desc_mul(text[:pos])
            right = self.desc_atom(text[pos + len(token) + 2:])
            return BinArith(op, left, right)
        return self.desc_atom(text)

    def desc_atom(self, text: str) -> TcrExpr:
        text = text.strip()
        if not text:
            raise _Mismatch("empty expression")
        if text.startswith("(") and text.endswith(")") and self._balanced(text):
            return self.desc(text[1:-1])
        if text.startswith("column "):
            rest = text[len("column "):]
            if self.known_column(rest):
                return ColProject(FrameRef(), rest)
            # "column X from <frame phrase>": projection off a derived table.
            for pos in _find_top_level(rest, " from "):
                name = rest[:pos]
                if not self.known_column(name):
                    continue
                try:
                    frame = self.desc(rest[pos + len(" from "):])
                    return self.checked(ColProject(frame, name))
                except _Mismatch:
                    continue
            raise _Mismatch(f"unknown column {rest!r}")
        if text.startswith("variable "):
            name = text[len("variable "):]
            if name not in self.vars:
                raise _Mismatch(f"unknown variable {name!r}")
            return VarRef(name)
        if text == "the table":
            return FrameRef()
        node = self._inline_op(text)
        if node is not None:
            return self.checked(node)
        if text.startswith("'") and text.endswith("'") and len(text) >= 2:
            return Literal(text[1:-1])
        if _NUMBER_TEXT_RE.match(text):
            return Literal(int(text) if re.fullmatch(r"-?\d+", text) else float(text))
        if text == "TRUE":
            return Literal(True)
        if text == "FALSE":
            return Literal(False)
        raise _Mismatch(f"cannot read {text!r}")

    @staticmethod
    def _balanced(text: str) -> bool:
        depth = 0
        for i, ch in enumerate(text):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0 and i != len(text) - 1:
                    return False
        return depth == 0

    def _subject_of(self, rest: str) -> TcrExpr:
        return self.desc(rest)

    def _inline_op(self, text: str) -> Optional[TcrExpr]:
        m = re.match(r"^count '([^']*)' from (.+)$", text)
        if m:
            return CountOccurrences(self._subject_of(m.group(2)), m.group(1))
        m = re.match(r"^contains '([^']*)' from (.+)$", text)
        if m:
            return Contains(self._subject_of(m.group(2)), m.group(1))
        m = re.match(r"^replace '([^']*)' with '([^']*)' from (.+)$", text)
        if m:
            return Replace(self._subject_of(m.group(3)), m.group(1), m.group(2))
        m = re.match(r"^the text split on '([^']*)' from (.+)$", text)
        if m:
            return Split(self._subject_of(m.group(2)), m.group(1))
        m = re.match(r"^the text split from (.+)$", text)
        if m:
            return Split(self._subject_of(m.group(1)), None)
        m = re.match(r"^(len|lower|strip) from (.+)$", text)
        if m:
            cls = {"len": Len, "lower": Lower, "strip": Strip}[m.group(1)]
            return cls(self._subject_of(m.group(2)))
        m = re.match(r"^year from (.+)$", text)
        if m:
            return DateYear(self._subject_of(m.group(1)))
        m = re.match(r"^round up to '([^']*)' from (.+)$", text)
        if m:
            return DateCeil(self._subject_of(m.group(2)), m.group(1))
        m = re.match(r"^position of the maximum from (.+)$", text)
        if m:
            return Agg(AggOp.IDX_MAX, self._subject_of(m.group(1)))
        m = re.match(r"^(sum|minimum|min|maximum|max|average|mean|count) from (.+)$", text)
        if m:
            return Agg(_AGG_WORDS[m.group(1)], self._subject_of(m.group(2)))
        m = re.match(r"^the number of rows(?: from (.+))?$", text)
        if m:
            subject = self._subject_of(m.group(1)) if m.group(1) else FrameRef()
            return Agg(AggOp.ROW_COUNT, subject)
        m = re.match(r"^the dimensions(?: from (.+))?$", text)
        if m:
            subject = self._subject_of(m.group(1)) if m.group(1) else FrameRef()
            return Shape(subject)
        m = re.match(r"^the (rows|columns) from (.+)$", text)
        if m:
            idx = _TUPLE_LABELS[m.group(1)]
            return ElemIndex(self._subject_of(m.group(2)), idx,
                             IndexKind.TUPLE_FIELD, label=m.group(1))
        m = re.match(r"^(character|word|element) (\d+) of the (?:text|list|array) from (.+)$", text)
        if m:
            kind = _ELEMENT_KIND[m.group(1)]
            return ElemIndex(self._subject_of(m.group(3)),
                             adjust_index_inbound(int(m.group(2))), kind)
        m = re.match(
            r"^the (first|second|third|last) (character|word|element)"
            r" of the (?:text|list|array) from (.+)$", text)
        if m:
            kind = _ELEMENT_KIND[m.group(2)]
            idx = -1 if m.group(1) == "last" else adjust_index_inbound(_ORDINAL_WORDS[m.group(1)])
            return ElemIndex(self._subject_of(m.group(3)), idx, kind)
        m = re.match(r"^rows where (.+)$", text)
        if m:
            rest = m.group(1)
            try:
                return self.checked(RowFilter(FrameRef(), self.desc(rest)))
            except _Mismatch:
                pass
            froms = _find_top_level(rest, " from ")
            for pos in reversed(froms):
                try:
                    mask = self.desc(rest[:pos])
                    frame = self.desc(rest[pos + len(" from "):])
                    return self.checked(RowFilter(frame, mask))
                except _Mismatch:
                    continue
            raise _Mismatch(f"cannot read filter {rest!r}")
        m = re.match(r"^rows (\d+) to (\d+|the end)(?: from (.+))?$", text)
        if m:
            frame = self._subject_of(m.group(3)) if m.group(3) else FrameRef()
            hi = None if m.group(2) == "the end" else int(m.group(2))
            return SliceRows(frame, adjust_index_inbound(int(m.group(1))), hi)
        m = re.match(r"^grouped by column[s]? (.+)$", text)
        if m:
            return GroupBy(FrameRef(), self._group_keys(m.group(1)))
        m = re.match(r"^the size of each group from (.+)$", text)
        if m:
            return GroupSize(self._subject_of(m.group(1)))
        m = re.match(r"^the transpose(?: from (.+))?$", text)
        if m:
            frame = self._subject_of(m.group(1)) if m.group(1) else FrameRef()
            return Transpose(frame)
        return None

    def _group_keys(self, text: str) -> Tuple[str, ...]:
        if self.known_column(text):
            return (text,)
        parts = [p.strip() for p in _split_top_level(text, "and")]
        for p in parts:
            if not self.known_column(p):
                raise _Mismatch(f"unknown column {p!r}")
        return tuple(parts)

    # -- chain steps ----------------------------------------------------------

    def chain_step(self, text: str, subject: Optional[TcrExpr]) -> TcrExpr:
        base = subject if subject is not None else FrameRef()
        if text.startswith("select column "):
            name = text[len("select column "):]
            if not self.known_column(name):
                raise _Mismatch(f"unknown column {name!r}")
            return ColProject(base, name)
        if text.startswith("select variable "):
            name = text[len("select variable "):]
            if subject is not None or name not in self.vars:
                raise _Mismatch(f"unknown variable {name!r}")
            return VarRef(name)
        if text.startswith("select rows where "):
            return RowFilter(base, self.desc(text[len("select rows where "):]))
        m = re.match(r"^take rows (\d+) to (\d+|the end)$", text)
        if m:
            hi = None if m.group(2) == "the end" else int(m.group(2))
            return SliceRows(base, adjust_index_inbound(int(m.group(1))), hi)
        if subject is None:
            # Remaining templates transform a prior result.
            for template, build in [
                ("return number of rows", lambda: Agg(AggOp.ROW_COUNT, base)),
                ("get the dimensions", lambda: Shape(base)),
                ("transpose the table", lambda: Transpose(base)),
                ("count", lambda: Agg(AggOp.COUNT, base)),  # per-column counts
            ]:
                if text == template:
                    return build()
            m = re.match(r"^group by column[s]? (.+)$", text)
            if m:
                return GroupBy(base, self._group_keys(m.group(1)))
            raise _Mismatch(f"no starting template matches {text!r}")
        m = re.match(r"^split the text on '([^']*)'$", text)
        if m:
            return Split(subject, m.group(1))
        if text == "split the text":
            return Split(subject, None)
        m = re.match(r"^calculate count '([^']*)'$", text)
        if m:
            return CountOccurrences(subject, m.group(1))
        m = re.match(r"^contains '([^']*)'$", text)
        if m:
            return Contains(subject, m.group(1))
        m = re.match(r"^replace '([^']*)' with '([^']*)'$", text)
        if m:
            return Replace(subject, m.group(1), m.group(2))
        if text == "len":
            return Len(subject)
        if text == "lower":
            return Lower(subject)
        if text == "strip":
            return Strip(subject)
        if text == "year":
            return DateYear(subject)
        m = re.match(r"^round up to '([^']*)'$", text)
        if m:
            return DateCeil(subject, m.group(1))
        if text == "return number of rows":
            return Agg(AggOp.ROW_COUNT, subject)
        if text == "position of the maximum":
            return Agg(AggOp.IDX_MAX, subject)
        if text in _AGG_WORDS:
            return Agg(_AGG_WORDS[text], subject)
        if text == "get the dimensions":
            return Shape(subject)
        m = re.match(r"^take the (rows|columns)$", text)
        if m:
            idx = _TUPLE_LABELS[m.group(1)]
            return ElemIndex(subject, idx, IndexKind.TUPLE_FIELD, label=m.group(1))
        m = re.match(r"^take (character|word|element) (\d+) of the (?:text|list|array)$", text)
        if m:
            kind = _ELEMENT_KIND[m.group(1)]
            return ElemIndex(subject, adjust_index_inbound(int(m.group(2))), kind)
        m = re.match(
            r"^take the (first|second|third|last) (character|word|element)"
            r" of the (?:text|list|array)$", text)
        if m:
            kind = _ELEMENT_KIND[m.group(2)]
            idx = -1 if m.group(1) == "last" else adjust_index_inbound(_ORDINAL_WORDS[m.group(1)])
            return ElemIndex(subject, idx, kind)
        m = re.match(r"^group by column[s]? (.+)$", text)
        if m:
            return GroupBy(subject, self._group_keys(m.group(1)))
        if text == "size of each group":
            return GroupSize(subject)
        if text == "transpose the table":
            return Transpose(subject)
        raise _Mismatch(f"no step template matches {text!r}")

    def chain_or_desc(self, texts: List[str]) -> TcrExpr:
        try:
            subject: Optional[TcrExpr] = None
            for text in texts:
                subject = self.checked(self.chain_step(text, subject))
            assert subject is not None
            return subject
        except _Mismatch:
            if len(texts) == 1:
                return self.desc(texts[0])
            raise


def parse_grounded(steps: Sequence[str], schema: Schema) -> TcrProgram:
    """Parse grounded step texts back into a program.

    Raises :class:`GrammarMismatch` when a step falls outside the step
    grammar; callers treat the whole utterance as a free-form query then.
    """
    texts = [normalize_step(s) for s in steps if normalize_step(s)]
    if not texts:
        raise GrammarMismatch(0, "no steps")
    parser = _GroundedParser(schema)
    statements: List[TcrStatement] = []
    i = 0

    def opener(text: str) -> Optional[Tuple[str, str, str]]:
        for prefix, sep in (("create column ", " from "), ("define variable ", " as ")):
            if text.startswith(prefix):
                rest = text[len(prefix):]
                name, _, inline = rest.partition(sep)
                return prefix.strip(), name.strip(), inline.strip()
        return None

    while i < len(texts):
        head = opener(texts[i])
        try:
            if head is not None:
                kind, name, inline = head
                if not name:
                    raise _Mismatch("missing name")
                if inline:
                    expr = parser.desc(inline)
                    i += 1
                else:
                    j = i + 1
                    while j < len(texts) and opener(texts[j]) is None:
                        j += 1
                    if j == i + 1:
                        raise _Mismatch(f"{kind} step has no expression")
                    expr = parser.chain_or_desc(texts[i + 1:j])
                    i = j
                if kind == "create column":
                    overwrite = schema.column_type(name) is not None
                    parser.bind_column(name, expr)
                    statements.append(CreateColumn(name, expr, overwrites_original=overwrite))
                else:
                    parser.bind_variable(name, expr)
                    statements.append(BindVar(name, expr))
            else:
                j = i + 1
                while j < len(texts) and opener(texts[j]) is None:
                    j += 1
                if j != len(texts):
                    raise _Mismatch("result steps must come last")
                statements.append(Yield(parser.chain_or_desc(texts[i:j])))
                i = j
        except _Mismatch as exc:
            raise GrammarMismatch(min(i, len(texts) - 1), exc.detail) from exc

    try:
        program = TcrProgram(tuple(statements))
        check_program(program, schema)
    except (ValueError, tcr.TranslateError) as exc:
        raise GrammarMismatch(len(texts) - 1, str(exc)) from exc
    return program

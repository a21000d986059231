"""Parser and canonical printer for the generated-code language.

The generated code is a small Python/Pandas subset and is treated purely
as data here: we parse it into a tiny AST and can re-emit it in one
deterministic format (single quotes, single spaces, one statement per
line).  Function definitions, comprehensions, control flow, lambdas, and
imports are outside the subset and produce :class:`UnsupportedConstruct`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union


class CodeError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


class ObjectSyntaxError(CodeError):
    pass


class UnsupportedConstruct(CodeError):
    def __init__(self, kind: str, line: int, col: int):
        super().__init__(f"unsupported construct: {kind}", line, col)
        self.kind = kind


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Loc:
    line: int = 0
    col: int = 0


def _loc_field():
    return field(default=Loc(), compare=False, repr=False)


@dataclass(frozen=True)
class Name:
    id: str
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class StringLit:
    value: str
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class NumberLit:
    value: Union[int, float]
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class ListLit:
    elements: Tuple["ObjectExpr", ...]
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class Slice:
    lo: Optional["ObjectExpr"]
    hi: Optional["ObjectExpr"]
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class Subscript:
    base: "ObjectExpr"
    index: Union["ObjectExpr", Slice]
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class Attribute:
    base: "ObjectExpr"
    name: str
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class Call:
    callee: "ObjectExpr"
    args: Tuple["ObjectExpr", ...]
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / //
    left: "ObjectExpr"
    right: "ObjectExpr"
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class Compare:
    op: str  # == != > >= < <=
    left: "ObjectExpr"
    right: "ObjectExpr"
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class BoolOp:
    op: str  # & |
    operands: Tuple["ObjectExpr", ...]
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class Unary:
    op: str  # ~ -
    operand: "ObjectExpr"
    loc: Loc = _loc_field()


ObjectExpr = Union[
    Name, StringLit, NumberLit, BoolLit, ListLit, Subscript, Attribute, Call,
    BinOp, Compare, BoolOp, Unary,
]


@dataclass(frozen=True)
class Assign:
    target: ObjectExpr  # Name or Subscript
    expr: ObjectExpr
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class ExprStmt:
    expr: ObjectExpr
    loc: Loc = _loc_field()


ObjectStmt = Union[Assign, ExprStmt]


@dataclass(frozen=True)
class ObjectAst:
    statements: Tuple[ObjectStmt, ...]


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

class TokKind(enum.Enum):
    NAME = "name"
    NUMBER = "number"
    STRING = "string"
    OP = "op"
    NEWLINE = "newline"
    END = "end"


@dataclass
class Token:
    kind: TokKind
    text: str
    value: object
    line: int
    col: int


_UNSUPPORTED_KEYWORDS = {
    "def": "function declaration",
    "lambda": "lambda",
    "for": "for loop",
    "while": "while loop",
    "if": "if statement",
    "elif": "if statement",
    "else": "if statement",
    "import": "import",
    "from": "import",
    "return": "return statement",
    "class": "class definition",
    "with": "with statement",
    "try": "try statement",
    "yield": "yield",
    "del": "del statement",
    "global": "global statement",
    "assert": "assert statement",
}

_TWO_CHAR_OPS = ("==", "!=", ">=", "<=", "//")
_ONE_CHAR_OPS = "=<>+-*/&|~()[],:."


def _read_string(src: str, i: int, line: int, col: int, raw: bool) -> Tuple[str, int]:
    quote = src[i]
    i += 1
    out = []
    while i < len(src):
        ch = src[i]
        if ch == "\\" and i + 1 < len(src):
            nxt = src[i + 1]
            if raw:
                out.append(ch)
                out.append(nxt)
            elif nxt == "\\":
                out.append("\\")
            elif nxt in ("'", '"'):
                out.append(nxt)
            elif nxt == "n":
                out.append("\n")
            elif nxt == "t":
                out.append("\t")
            else:
                # Unknown escape: keep both characters (regex patterns like \b\w+).
                out.append(ch)
                out.append(nxt)
            i += 2
            continue
        if ch == quote:
            return "".join(out), i + 1
        if ch == "\n":
            break
        out.append(ch)
        i += 1
    raise ObjectSyntaxError("unterminated string literal", line, col)


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    i = 0
    line, line_start = 1, 0
    depth = 0  # bracket depth: newlines inside brackets are whitespace
    n = len(source)
    while i < n:
        ch = source[i]
        col = i - line_start + 1
        if ch == "\n":
            if depth == 0:
                tokens.append(Token(TokKind.NEWLINE, "\n", None, line, col))
            line += 1
            line_start = i + 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == ";":
            if depth == 0:
                tokens.append(Token(TokKind.NEWLINE, ";", None, line, col))
            i += 1
            continue
        if ch in "'\"":
            value, j = _read_string(source, i, line, col, raw=False)
            tokens.append(Token(TokKind.STRING, source[i:j], value, line, col))
            i = j
            continue
        if (ch in "rR") and i + 1 < n and source[i + 1] in "'\"":
            value, j = _read_string(source, i + 1, line, col, raw=True)
            tokens.append(Token(TokKind.STRING, source[i:j], value, line, col))
            i = j
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                c = source[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif c in "eE" and not seen_exp and j > i:
                    seen_exp = True
                    j += 1
                    if j < n and source[j] in "+-":
                        j += 1
                else:
                    break
            text = source[i:j]
            value = float(text) if (seen_dot or seen_exp) else int(text)
            tokens.append(Token(TokKind.NUMBER, text, value, line, col))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token(TokKind.NAME, source[i:j], None, line, col))
            i = j
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(TokKind.OP, two, None, line, col))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            if ch in "([":
                depth += 1
            elif ch in ")]":
                depth = max(0, depth - 1)
            tokens.append(Token(TokKind.OP, ch, None, line, col))
            i += 1
            continue
        raise ObjectSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token(TokKind.END, "", None, line, n - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser
#
# Precedence (loose to tight), matching the object language:
#   or  and  not  comparison  |  &  + -  * / //  unary(- ~)  postfix
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at_op(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind is TokKind.OP and tok.text in texts

    def at_name(self, *names: str) -> bool:
        tok = self.peek()
        return tok.kind is TokKind.NAME and tok.text in names

    def expect_op(self, text: str) -> Token:
        tok = self.next()
        if tok.kind is TokKind.NAME and tok.text in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(_UNSUPPORTED_KEYWORDS[tok.text], tok.line, tok.col)
        if tok.kind is not TokKind.OP or tok.text != text:
            raise ObjectSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def _loc(self, tok: Token) -> Loc:
        return Loc(tok.line, tok.col)

    def parse_program(self) -> ObjectAst:
        statements: List[ObjectStmt] = []
        while self.peek().kind is not TokKind.END:
            if self.peek().kind is TokKind.NEWLINE:
                self.next()
                continue
            statements.append(self.parse_statement())
        return ObjectAst(tuple(statements))

    def parse_statement(self) -> ObjectStmt:
        tok = self.peek()
        if tok.kind is TokKind.NAME and tok.text in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(_UNSUPPORTED_KEYWORDS[tok.text], tok.line, tok.col)
        expr = self.parse_expr()
        if self.at_op("="):
            eq = self.next()
            if not isinstance(expr, (Name, Subscript)):
                raise ObjectSyntaxError("invalid assignment target", eq.line, eq.col)
            value = self.parse_expr()
            self._end_statement()
            return Assign(expr, value, self._loc(tok))
        self._end_statement()
        return ExprStmt(expr, self._loc(tok))

    def _end_statement(self):
        tok = self.peek()
        if tok.kind is TokKind.NEWLINE:
            self.next()
        elif tok.kind is not TokKind.END:
            if tok.kind is TokKind.NAME and tok.text in _UNSUPPORTED_KEYWORDS:
                raise UnsupportedConstruct(_UNSUPPORTED_KEYWORDS[tok.text], tok.line, tok.col)
            if tok.kind is TokKind.OP and tok.text == "=":
                raise ObjectSyntaxError("multiple assignment targets", tok.line, tok.col)
            raise ObjectSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    def parse_expr(self) -> ObjectExpr:
        return self.parse_or()

    def parse_or(self) -> ObjectExpr:
        left = self.parse_and()
        if self.at_name("or"):
            operands = [left]
            while self.at_name("or"):
                self.next()
                operands.append(self.parse_and())
            return BoolOp("|", tuple(operands), left.loc)
        return left

    def parse_and(self) -> ObjectExpr:
        left = self.parse_not()
        if self.at_name("and"):
            operands = [left]
            while self.at_name("and"):
                self.next()
                operands.append(self.parse_not())
            return BoolOp("&", tuple(operands), left.loc)
        return left

    def parse_not(self) -> ObjectExpr:
        if self.at_name("not"):
            tok = self.next()
            return Unary("~", self.parse_not(), self._loc(tok))
        return self.parse_comparison()

    def parse_comparison(self) -> ObjectExpr:
        left = self.parse_bitor()
        if self.at_op("==", "!=", ">", ">=", "<", "<="):
            op = self.next()
            right = self.parse_bitor()
            if self.at_op("==", "!=", ">", ">=", "<", "<="):
                nxt = self.peek()
                raise UnsupportedConstruct("chained comparison", nxt.line, nxt.col)
            return Compare(op.text, left, right, left.loc)
        return left

    def parse_bitor(self) -> ObjectExpr:
        left = self.parse_bitand()
        if self.at_op("|"):
            operands = [left]
            while self.at_op("|"):
                self.next()
                operands.append(self.parse_bitand())
            return BoolOp("|", tuple(operands), left.loc)
        return left

    def parse_bitand(self) -> ObjectExpr:
        left = self.parse_arith()
        if self.at_op("&"):
            operands = [left]
            while self.at_op("&"):
                self.next()
                operands.append(self.parse_arith())
            return BoolOp("&", tuple(operands), left.loc)
        return left

    def parse_arith(self) -> ObjectExpr:
        left = self.parse_term()
        while self.at_op("+", "-"):
            op = self.next()
            left = BinOp(op.text, left, self.parse_term(), left.loc)
        return left

    def parse_term(self) -> ObjectExpr:
        left = self.parse_unary()
        while self.at_op("*", "/", "//"):
            op = self.next()
            left = BinOp(op.text, left, self.parse_unary(), left.loc)
        return left

    def parse_unary(self) -> ObjectExpr:
        if self.at_op("-", "~"):
            tok = self.next()
            return Unary(tok.text, self.parse_unary(), self._loc(tok))
        return self.parse_postfix()

    def parse_postfix(self) -> ObjectExpr:
        expr = self.parse_atom()
        while True:
            if self.at_op("."):
                self.next()
                tok = self.next()
                if tok.kind is not TokKind.NAME:
                    raise ObjectSyntaxError("expected attribute name", tok.line, tok.col)
                expr = Attribute(expr, tok.text, expr.loc)
            elif self.at_op("["):
                self.next()
                index = self.parse_subscript_index()
                self.expect_op("]")
                expr = Subscript(expr, index, expr.loc)
            elif self.at_op("("):
                self.next()
                args: List[ObjectExpr] = []
                if not self.at_op(")"):
                    args.append(self.parse_expr())
                    while self.at_op(","):
                        self.next()
                        args.append(self.parse_expr())
                self.expect_op(")")
                expr = Call(expr, tuple(args), expr.loc)
            else:
                return expr

    def parse_subscript_index(self) -> Union[ObjectExpr, Slice]:
        tok = self.peek()
        if self.at_op(":"):
            self.next()
            hi = None if self.at_op("]") else self.parse_expr()
            return Slice(None, hi, self._loc(tok))
        lo = self.parse_expr()
        if self.at_op(":"):
            self.next()
            hi = None if self.at_op("]") else self.parse_expr()
            return Slice(lo, hi, lo.loc)
        return lo

    def parse_atom(self) -> ObjectExpr:
        tok = self.next()
        loc = self._loc(tok)
        if tok.kind is TokKind.NAME:
            if tok.text in _UNSUPPORTED_KEYWORDS:
                raise UnsupportedConstruct(_UNSUPPORTED_KEYWORDS[tok.text], tok.line, tok.col)
            if tok.text == "True":
                return BoolLit(True, loc)
            if tok.text == "False":
                return BoolLit(False, loc)
            if tok.text == "None":
                raise UnsupportedConstruct("None literal", tok.line, tok.col)
            return Name(tok.text, loc)
        if tok.kind is TokKind.NUMBER:
            return NumberLit(tok.value, loc)
        if tok.kind is TokKind.STRING:
            return StringLit(tok.value, loc)
        if tok.kind is TokKind.OP and tok.text == "(":
            expr = self.parse_expr()
            self.expect_op(")")
            return expr
        if tok.kind is TokKind.OP and tok.text == "[":
            elements: List[ObjectExpr] = []
            if not self.at_op("]"):
                elements.append(self.parse_expr())
                while self.at_op(","):
                    self.next()
                    if self.at_op("]"):
                        break
                    elements.append(self.parse_expr())
            self.expect_op("]")
            return ListLit(tuple(elements), loc)
        raise ObjectSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)


def parse_object_code(source: str) -> ObjectAst:
    """Parse generated code into an :class:`ObjectAst`.

    Comments and blank lines are dropped; ``print(...)`` statements are
    kept as plain expression statements (normalization decides their
    fate later).
    """
    return _Parser(tokenize(source)).parse_program()


# ---------------------------------------------------------------------------
# Canonical emission
# ---------------------------------------------------------------------------

# Higher binds tighter.  Comparison sits *below* & and | in the object
# language, which is why generated masks are parenthesized.
_PREC_BOOL_OR = 1
_PREC_COMPARE = 2
_PREC_BITOR = 3
_PREC_BITAND = 4
_PREC_ADD = 5
_PREC_MUL = 6
_PREC_UNARY = 7
_PREC_POSTFIX = 8

_BINOP_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "//": _PREC_MUL}


def _escape(value: str) -> str:
    out = []
    for ch in value:
        if ch == "\\":
            out.append("\\\\")
        elif ch == "'":
            out.append("\\'")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        else:
            out.append(ch)
    return "'" + "".join(out) + "'"


def _emit(expr: ObjectExpr, parent_prec: int) -> str:
    if isinstance(expr, Name):
        return expr.id
    if isinstance(expr, StringLit):
        return _escape(expr.value)
    if isinstance(expr, NumberLit):
        return repr(expr.value)
    if isinstance(expr, BoolLit):
        return "True" if expr.value else "False"
    if isinstance(expr, ListLit):
        return "[" + ", ".join(_emit(e, 0) for e in expr.elements) + "]"
    if isinstance(expr, Subscript):
        index = expr.index
        if isinstance(index, Slice):
            lo = "" if index.lo is None else _emit(index.lo, 0)
            hi = "" if index.hi is None else _emit(index.hi, 0)
            inner = f"{lo}:{hi}"
        else:
            inner = _emit(index, 0)
        return f"{_emit(expr.base, _PREC_POSTFIX)}[{inner}]"
    if isinstance(expr, Attribute):
        return f"{_emit(expr.base, _PREC_POSTFIX)}.{expr.name}"
    if isinstance(expr, Call):
        args = ", ".join(_emit(a, 0) for a in expr.args)
        return f"{_emit(expr.callee, _PREC_POSTFIX)}({args})"
    if isinstance(expr, BinOp):
        prec = _BINOP_PREC[expr.op]
        text = f"{_emit(expr.left, prec)} {expr.op} {_emit(expr.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(expr, Compare):
        text = f"{_emit(expr.left, _PREC_COMPARE + 1)} {expr.op} {_emit(expr.right, _PREC_COMPARE + 1)}"
        return f"({text})" if _PREC_COMPARE < parent_prec else text
    if isinstance(expr, BoolOp):
        prec = _PREC_BITAND if expr.op == "&" else _PREC_BITOR
        text = f" {expr.op} ".join(_emit(o, prec + 1) for o in expr.operands)
        return f"({text})" if prec < parent_prec else text
    if isinstance(expr, Unary):
        text = f"{expr.op}{_emit(expr.operand, _PREC_UNARY)}"
        return f"({text})" if _PREC_UNARY < parent_prec else text
    raise TypeError(f"not an object expression: {expr!r}")


def emit_canonical(ast: ObjectAst) -> str:
    """Deterministic single-quote, single-space re-emission of an AST.

    ``parse_object_code(emit_canonical(a))`` is structurally equal to
    ``a`` for every parseable AST.
    """
    lines = []
    for stmt in ast.statements:
        if isinstance(stmt, Assign):
            lines.append(f"{_emit(stmt.target, 0)} = {_emit(stmt.expr, 0)}")
        else:
            lines.append(_emit(stmt.expr, 0))
    return "\n".join(lines)


def is_print_statement(stmt: ObjectStmt) -> bool:
    return (
        isinstance(stmt, ExprStmt)
        and isinstance(stmt.expr, Call)
        and isinstance(stmt.expr.callee, Name)
        and stmt.expr.callee.id == "print"
    )


def strip_print_statements(ast: ObjectAst) -> ObjectAst:
    return ObjectAst(tuple(s for s in ast.statements if not is_print_statement(s)))

import pytest
from hypothesis import given, settings

from nl2grid import objcode
from nl2grid.table import CellType
from nl2grid.tcr import (
    Agg, AggOp, AmbiguousSubscript, BinArith, ArithOp, ColProject,
    CompareExpr, CountOccurrences, CreateColumn, ElemIndex, FrameRef,
    IndexKind, Literal, RowFilter, ScalarType, SeriesType, Shape,
    TcrProgram, TupleType, TypeMismatch, UnknownColumn, UnsupportedApi, Yield,
    check_program, infer_type, render_code, to_debug_json, translate,
)
from .strategies import PROPERTY_SCHEMA, programs

CODE_1 = "df['Mission Length'] = df['Space Flight (hr)'] / df['Missions'].str.count('STS')"


def _translate(code, schema):
    return translate(objcode.parse_object_code(code), schema)


class TestInferType:
    def test_count_over_text_column(self, astronauts_schema):
        expr = CountOccurrences(ColProject(FrameRef(), "Missions"), "STS")
        assert infer_type(expr, astronauts_schema) == SeriesType(CellType.NUMBER)

    def test_shape_is_labeled_tuple(self, astronauts_schema):
        t = infer_type(Shape(FrameRef()), astronauts_schema)
        assert t == TupleType(("rows", "columns"), (CellType.NUMBER, CellType.NUMBER))

    def test_unknown_column(self, astronauts_schema):
        with pytest.raises(UnknownColumn):
            infer_type(ColProject(FrameRef(), "NoSuchCol"), astronauts_schema)

    def test_division_typing(self, astronauts_schema):
        series = ColProject(FrameRef(), "Space Flight (hr)")
        div = BinArith(ArithOp.DIV, series, Literal(2))
        assert infer_type(div, astronauts_schema) == SeriesType(CellType.NUMBER)
        assert infer_type(Literal(2), astronauts_schema) == ScalarType(CellType.NUMBER)

    def test_mixed_arithmetic_rejected(self, astronauts_schema):
        bad = BinArith(ArithOp.ADD, ColProject(FrameRef(), "Name"), Literal(1))
        with pytest.raises(TypeMismatch):
            infer_type(bad, astronauts_schema)

    def test_text_arithmetic_expressible_but_not_runnable(self, superbowl_schema):
        # Generated code does subtract text columns; the explainer keeps
        # working and only evaluation refuses.
        sub = BinArith(ArithOp.SUB, ColProject(FrameRef(), "Winner"),
                       ColProject(FrameRef(), "Loser"))
        assert infer_type(sub, superbowl_schema) == SeriesType(CellType.TEXT)


class TestTranslate:
    def test_code_1_structure(self, astronauts_schema):
        program = _translate(CODE_1, astronauts_schema)
        assert len(program.statements) == 1
        stmt = program.statements[0]
        assert isinstance(stmt, CreateColumn)
        assert stmt.name == "Mission Length"
        assert not stmt.overwrites_original
        expr = stmt.expr
        assert isinstance(expr, BinArith) and expr.op is ArithOp.DIV
        assert expr.left == ColProject(FrameRef(), "Space Flight (hr)")
        assert expr.right == CountOccurrences(ColProject(FrameRef(), "Missions"), "STS")

    def test_string_index_is_character_access(self, astronauts_schema):
        program = _translate("df['Missions'].str[0]", astronauts_schema)
        expr = program.statements[0].expr
        assert isinstance(expr, ElemIndex)
        assert expr.kind is IndexKind.CHAR_OF_TEXT

    def test_filtered_shape_is_row_count(self, superbowl_schema):
        program = _translate("df[df['Host City'] == 'New Orleans'].shape[0]",
                             superbowl_schema)
        expr = program.statements[0].expr
        assert isinstance(expr, Agg) and expr.op is AggOp.ROW_COUNT
        assert isinstance(expr.subject, RowFilter)
        mask = expr.subject.mask
        assert isinstance(mask, CompareExpr)
        assert mask.right == Literal("New Orleans")

    def test_unfiltered_shape_is_tuple_field(self, superbowl_schema):
        program = _translate("df.shape[0]", superbowl_schema)
        expr = program.statements[0].expr
        assert isinstance(expr, ElemIndex)
        assert expr.kind is IndexKind.TUPLE_FIELD and expr.label == "rows"

    def test_trailing_print_dropped_with_flag(self, superbowl_schema):
        program = _translate("df['x'] = df['Winner Pts'] * 2\nprint(df)", superbowl_schema)
        assert len(program.statements) == 1
        assert program.dropped_noops

    def test_overwrite_flagged(self, astronauts_schema):
        program = _translate("df['Missions'] = df['Missions'].str.lower()",
                             astronauts_schema)
        assert program.statements[0].overwrites_original

    def test_created_column_usable_downstream(self, astronauts_schema):
        code = ("df['mission_count'] = df['Missions'].str.split(',').str.len()\n"
                "df['avg'] = df['Space Flight (hr)'] / df['mission_count']")
        program = _translate(code, astronauts_schema)
        assert len(program.statements) == 2

    @pytest.mark.parametrize("code,error", [
        ("df['Name'].value_counts()", UnsupportedApi),
        ("df['Winner Pts'] // 2", UnsupportedApi),
        ("df[['a', 'b']]", UnsupportedApi),
        ("df['nope'].sum()", UnknownColumn),
        ("df[0]", AmbiguousSubscript),
        ("df = df['Name']", UnsupportedApi),
    ])
    def test_rejections(self, code, error, superbowl_schema, astronauts_schema):
        schema = astronauts_schema if "Name" in code or "Missions" in code else superbowl_schema
        with pytest.raises(error):
            _translate(code, schema)

    def test_loc_iloc_normalized(self, superbowl_schema):
        bare = _translate("df[df['Winner Pts'] > 30]", superbowl_schema)
        via_loc = _translate("df.loc[df['Winner Pts'] > 30]", superbowl_schema)
        assert bare == via_loc
        sliced = _translate("df.iloc[0:3]", superbowl_schema)
        assert sliced == _translate("df[0:3]", superbowl_schema)

    def test_nested_masks_flattened(self, houses_schema):
        nested = _translate(
            "df[((df['yr_built'] >= 1970) & (df['sqft_basement'] != 0)) & (df['yr_renovated'] != 0)]",
            houses_schema)
        flat = _translate(
            "df[(df['yr_built'] >= 1970) & (df['sqft_basement'] != 0) & (df['yr_renovated'] != 0)]",
            houses_schema)
        assert nested == flat

    def test_yield_must_be_final(self):
        with pytest.raises(ValueError):
            TcrProgram((Yield(Literal(1)), Yield(Literal(2))))


class TestRenderCode:
    def test_code_1_exact(self, astronauts_schema):
        program = _translate(CODE_1, astronauts_schema)
        assert render_code(program, astronauts_schema) == CODE_1

    def test_bare_literal(self, astronauts_schema):
        program = TcrProgram((Yield(Literal(3)),))
        assert render_code(program, astronauts_schema) == "3"

    def test_comma_count_plus_one(self, astronauts_schema):
        code = "df['Mission Count'] = df['Missions'].str.count(',') + 1"
        program = _translate(code, astronauts_schema)
        assert render_code(program, astronauts_schema) == code

    def test_accessors_reinstated(self, superbowl_schema):
        for code in ["df['Date'].dt.year",
                     "df['Winner'].str.split(',')",
                     "df['Winner Pts'].iloc[0]"]:
            program = _translate(code, superbowl_schema)
            assert render_code(program, superbowl_schema) == code


class TestDebugDump:
    def test_stable_tree(self, astronauts_schema):
        program = _translate(CODE_1, astronauts_schema)
        tree = to_debug_json(program)
        assert tree == {
            "statements": [{
                "kind": "CreateColumn",
                "name": "Mission Length",
                "overwrite": False,
                "expr": {
                    "kind": "Arith",
                    "op": "DIV",
                    "left": {"kind": "ColProject", "name": "Space Flight (hr)",
                             "frame": {"kind": "Frame"}},
                    "right": {"kind": "CountOccurrences", "pattern": "STS",
                              "subject": {"kind": "ColProject", "name": "Missions",
                                          "frame": {"kind": "Frame"}}},
                },
            }]
        }


@settings(max_examples=150, deadline=None)
@given(programs())
def test_canonicalization_fixpoint(program):
    source = render_code(program, PROPERTY_SCHEMA)
    back = translate(objcode.parse_object_code(source), PROPERTY_SCHEMA)
    assert back == program


@settings(max_examples=100, deadline=None)
@given(programs())
def test_generated_programs_type_check(program):
    check_program(program, PROPERTY_SCHEMA)

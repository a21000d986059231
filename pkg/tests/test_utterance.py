import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nl2grid import objcode
from nl2grid.table import CellType
from nl2grid.tcr import (
    Agg, AggOp, ArithOp, BinArith, ColProject, CompareExpr, CmpOp,
    CountOccurrences, CreateColumn, FrameRef, IndexKind, Literal, LiteralList,
    TcrProgram, Yield, to_debug_json, translate,
)
from nl2grid.utterance import (
    TEMPLATE_TABLE, ExplanationUnavailable, GrammarMismatch,
    adjust_index_inbound, adjust_index_outbound, concat_steps, element_phrase,
    generate_utterance, normalize_for_comparison, parse_display_index,
    parse_grounded, split_query_steps, utterances_match,
)
from nl2grid.utterance import _CHAIN_SUBJECT_ATTR
from .goldens import GOLDEN_PAIRS
from .strategies import PROPERTY_SCHEMA, programs


def golden_schema(key, superbowl_schema, astronauts_schema, houses_schema):
    base = {
        "superbowl": superbowl_schema,
        "astronauts": astronauts_schema,
        "houses": houses_schema,
    }
    name, _, extra = key.partition("+")
    schema = base[name]
    if extra:
        schema = schema.with_column(extra, CellType.NUMBER if extra == "Mission Count"
                                    else CellType.TEXT)
    return schema


class TestGoldens:
    @pytest.mark.parametrize("key,code,expected", GOLDEN_PAIRS,
                             ids=[f"g{i:02d}" for i in range(len(GOLDEN_PAIRS))])
    def test_pair(self, key, code, expected, superbowl_schema, astronauts_schema,
                  houses_schema):
        schema = golden_schema(key, superbowl_schema, astronauts_schema, houses_schema)
        program = translate(objcode.parse_object_code(code), schema)
        rendered = generate_utterance(program).numbered()
        assert utterances_match(rendered, expected), (
            f"\nrendered: {rendered}\nexpected: {expected}")


class TestLayout:
    def test_step_count_law(self, astronauts_schema):
        # assignment + n chained operations -> n + 1 steps
        code = "df['mission_count'] = df['Missions'].str.split(',').str.len()"
        program = translate(objcode.parse_object_code(code), astronauts_schema)
        assert len(generate_utterance(program).steps) == 1 + 3

    def test_binary_rooted_is_one_descriptive_step(self, astronauts_schema):
        code = "df['Space Flight (hr)'] / df['Missions'].str.count('STS')"
        program = translate(objcode.parse_object_code(code), astronauts_schema)
        assert len(generate_utterance(program).steps) == 1

    def test_multi_statement_descriptive(self, astronauts_schema):
        code = ("df['a'] = df['Missions'].str.count(',')\n"
                "df['b'] = df['Space Flight (hr)'] / df['a']")
        program = translate(objcode.parse_object_code(code), astronauts_schema)
        steps = generate_utterance(program).texts
        assert len(steps) == 2
        assert steps[0].startswith("create column a from ")

    def test_mask_renders_inline(self, superbowl_schema):
        code = "df[df['Winner Pts'] > 30]"
        program = translate(objcode.parse_object_code(code), superbowl_schema)
        steps = generate_utterance(program).texts
        assert steps == ["select rows where column Winner Pts greater than 30"]

    def test_no_accessor_artifacts(self, astronauts_schema):
        code = "df['x'] = df['Missions'].str.split(',').str.len()\nprint(df)"
        program = translate(objcode.parse_object_code(code), astronauts_schema)
        text = generate_utterance(program).numbered()
        for token in (".str", ".dt", "df["):
            assert token not in text

    def test_raw_list_has_no_explanation(self):
        program = TcrProgram((CreateColumn("n", LiteralList((2.0, 1.0))),))
        with pytest.raises(ExplanationUnavailable):
            generate_utterance(program)


class TestTemplateTable:
    def test_every_chain_operation_has_both_templates(self):
        documented = set(TEMPLATE_TABLE)
        for node_type in _CHAIN_SUBJECT_ATTR:
            name = node_type.__name__
            if name == "ElemIndex":
                continue  # split across ElemIndex / TupleField entries
            assert name in documented, f"missing templates for {name}"
        assert {"ElemIndex", "TupleField", "CreateColumn", "BindVar",
                "Compare", "Arith"} <= documented
        for kind, entry in TEMPLATE_TABLE.items():
            assert len(entry) == 2, f"{kind} needs a chain and an inline template"


class TestIndexAdjustment:
    def test_outbound_examples(self):
        assert adjust_index_outbound(1) == 2
        assert adjust_index_outbound(0) == 1
        assert adjust_index_outbound(41) == 42

    def test_inbound_examples(self):
        assert adjust_index_inbound(2) == 1
        assert adjust_index_inbound(1) == 0
        with pytest.raises(ValueError):
            adjust_index_inbound(0)

    def test_element_phrase(self):
        assert element_phrase(IndexKind.ELEMENT_OF_SERIES, 1) == "element 2 of the array"
        assert element_phrase(IndexKind.CHAR_OF_TEXT, 0) == "character 1 of the text"
        assert element_phrase(IndexKind.WORD_OF_LIST, -1) == "the last word of the list"

    def test_display_index_templates(self):
        assert parse_display_index("element 2") == 1
        assert parse_display_index("position 1") == 0
        assert parse_display_index("the first word") == 0
        assert parse_display_index("the third element") == 2

    @given(st.integers(min_value=1, max_value=100))
    def test_mutual_inverse(self, k):
        assert adjust_index_outbound(adjust_index_inbound(k)) == k
        assert adjust_index_inbound(adjust_index_outbound(k - 1)) == k - 1


class TestParseGrounded:
    def test_filter_then_count(self, superbowl_schema):
        program = parse_grounded(
            ["select rows where column Winner is New Orleans Saints", "count"],
            superbowl_schema)
        tree = to_debug_json(program)["statements"][0]["expr"]
        assert tree["kind"] == "Agg" and tree["op"] == "COUNT"
        assert tree["subject"]["kind"] == "RowFilter"

    def test_create_with_inline_arithmetic(self, astronauts_schema):
        program = parse_grounded(
            ["create column Mission Count", "count ',' from column Missions + 1"],
            astronauts_schema)
        stmt = program.statements[0]
        assert isinstance(stmt, CreateColumn)
        expr = stmt.expr
        assert isinstance(expr, BinArith) and expr.op is ArithOp.ADD
        assert isinstance(expr.left, CountOccurrences)
        assert expr.right == Literal(1)

    def test_out_of_grammar(self, superbowl_schema):
        with pytest.raises(GrammarMismatch):
            parse_grounded(["please do magic"], superbowl_schema)

    def test_unknown_column_rejected(self, superbowl_schema):
        with pytest.raises(GrammarMismatch):
            parse_grounded(["select column Banana"], superbowl_schema)

    def test_numbered_texts_accepted_after_split(self, superbowl_schema):
        query = "(1) select rows where column Host City is New Orleans, (2) return number of rows"
        steps = split_query_steps(query)
        assert steps == ["select rows where column Host City is New Orleans",
                         "return number of rows"]
        program = parse_grounded(steps, superbowl_schema)
        assert isinstance(program.statements[0], Yield)

    def test_parenthesized_grouping(self, astronauts_schema):
        program = parse_grounded(
            ["create column Mission Length",
             "column Space Flight (hr) divided by (count ',' from column Missions + 1)"],
            astronauts_schema)
        expr = program.statements[0].expr
        assert expr.op is ArithOp.DIV
        assert isinstance(expr.right, BinArith) and expr.right.op is ArithOp.ADD

    def test_average_and_mean_both_accepted(self, superbowl_schema):
        for word in ("average", "mean"):
            program = parse_grounded(["select column Winner Pts", word], superbowl_schema)
            assert program.statements[0].expr.op is AggOp.MEAN

    def test_trailing_period_and_curly_quotes(self, superbowl_schema):
        program = parse_grounded(
            ["select rows where contains ‘Patriots’ from column Winner.",
             "return number of rows."],
            superbowl_schema)
        assert isinstance(program.statements[0].expr, Agg)

    def test_free_edit_changes_filter(self, superbowl_schema):
        # An edited step reparses into the corrected program.
        program = parse_grounded(
            ["select rows where column Winner is New Orleans Saints",
             "return number of rows"], superbowl_schema)
        mask = program.statements[0].expr.subject.mask
        assert mask == CompareExpr(CmpOp.EQ, ColProject(FrameRef(), "Winner"),
                                   Literal("New Orleans Saints"))


class TestConcatSteps:
    def test_two_steps(self):
        assert concat_steps(["select rows where column Winner is New Orleans Saints",
                             "count"]) == \
            "(1) select rows where column Winner is New Orleans Saints, (2) count"

    def test_singleton(self):
        assert concat_steps(["x"]) == "(1) x"

    def test_all_empty_rejected(self):
        with pytest.raises(ValueError):
            concat_steps(["", "  "])

    def test_table18_edited_steps(self, astronauts_schema):
        code = ("df['mission_count'] = df['Missions'].str.split(',').str.len()\n"
                "df['avg'] = df['Space Flight (hr)'] / df['mission_count']")
        program = translate(objcode.parse_object_code(code), astronauts_schema)
        query = concat_steps(generate_utterance(program).texts)
        assert query == (
            "(1) create column mission_count from len from the text split on ',' "
            "from column Missions, (2) create column avg from column "
            "Space Flight (hr) divided by column mission_count")
        assert split_query_steps(query) == generate_utterance(program).texts


class TestNormalization:
    def test_quote_insensitive(self):
        assert utterances_match("select column “Missions”",
                                "select column 'Missions'")
        assert utterances_match("count.", "count")
        assert not utterances_match("count", "sum")

    def test_normalize_keeps_words(self):
        assert normalize_for_comparison("(1) len,  (2) count.") == "(1) len, (2) count"


@settings(max_examples=200, deadline=None)
@given(programs())
def test_utterance_round_trip(program):
    utter = generate_utterance(program)
    back = parse_grounded(utter.texts, PROPERTY_SCHEMA)
    assert back == program
    assert generate_utterance(back).texts == utter.texts


@settings(max_examples=100, deadline=None)
@given(programs())
def test_no_code_tokens_in_steps(program):
    text = generate_utterance(program).numbered()
    for token in (".str", ".dt", "df["):
        assert token not in text

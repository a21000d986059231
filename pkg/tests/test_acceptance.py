"""Acceptance suite: one test per release criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -s` to see the checklist.
"""

import io
import json
import time

import httpx
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from nl2grid.bench import (
    BenchCase, FailureMode, RoundTripRecord, Termination, classify_failure,
    render_report, report, run_round_trip, _run_code,
)
from nl2grid.cli import main as cli_main
from nl2grid.codegen import BackendConfig, Completion, GenParams, HttpBackend
from nl2grid.interp import EvalError, evaluate
from nl2grid.objcode import UnsupportedConstruct, parse_object_code
from nl2grid.service import Engine, create_app
from nl2grid.table import OutputShape
from nl2grid.tcr import IndexKind, Schema, translate
from nl2grid.utterance import (
    adjust_index_inbound, adjust_index_outbound, element_phrase,
    generate_utterance, utterances_match,
)
from .conftest import fixture_text
from .goldens import GOLDEN_PAIRS
from .test_utterance import golden_schema


def _ok(label):
    print(f"[PASS] {label}")


class TestAcceptance:
    def test_golden_utterance_suite(self, superbowl_schema, astronauts_schema,
                                    houses_schema):
        """Transcribed code/utterance pairs reproduce byte-for-byte after
        quote and trailing-period normalization, in under a second."""
        assert len(GOLDEN_PAIRS) >= 8
        start = time.perf_counter()
        mismatches = []
        for key, code, expected in GOLDEN_PAIRS:
            schema = golden_schema(key, superbowl_schema, astronauts_schema,
                                   houses_schema)
            program = translate(parse_object_code(code), schema)
            rendered = generate_utterance(program).numbered()
            if not utterances_match(rendered, expected):
                mismatches.append((code, rendered, expected))
        elapsed = time.perf_counter() - start
        assert mismatches == []
        assert elapsed < 1.0
        _ok(f"golden utterance suite: {len(GOLDEN_PAIRS)} pairs, "
            f"0 mismatches, {elapsed:.3f}s")

    def test_round_trip_closure_under_mock(self, corpus_dir, tmp_path):
        """Grounded-grammar corpus: 100% output equivalence and 100%
        normalized code equality through the bench CLI, in under 10 s."""
        start = time.perf_counter()
        out = tmp_path / "report.json"
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "bench", "--corpus", corpus_dir, "--backend", "mock",
            "--json", str(out),
        ])
        elapsed = time.perf_counter() - start
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["n"] >= 30
        assert payload["code_generation_equality_normalized_pct"] == 100.0
        assert payload["output_equivalence_pct"] == 100.0
        assert elapsed < 10.0
        _ok(f"round-trip closure: {payload['n']} cases, normalized code "
            f"equality 100.0%, output equivalence 100.0%, {elapsed:.2f}s")

    def test_report_shape_and_denominators(self, superbowl):
        """The harness emits the fixed report shape from canned records,
        denominators stay conditioned on utterance existence, and the
        HTTP backend drives the same path against a live endpoint."""
        from nl2grid.utterance import GroundedUtterance, Step

        def full(i, code_equal, out_equal):
            from nl2grid.interp import EvalOutput
            from nl2grid.table import TabularOutput
            c1 = Completion("df['a'] = 1", "x")
            c2 = c1 if code_equal else Completion("df['a'] = 2", "x")
            o1 = EvalOutput(TabularOutput(OutputShape.SINGLE_VALUE, 1.0), "side_pane_only")
            o2 = o1 if out_equal else EvalOutput(
                TabularOutput(OutputShape.SINGLE_VALUE, 2.0), "side_pane_only")
            return RoundTripRecord(f"r{i}", c1=c1, o1=o1,
                                   g1=GroundedUtterance((Step("s", 0, "Yield"),)),
                                   c2=c2, o2=o2)

        canned = [full(i, i < 74, i < 108) for i in range(126)]
        metrics = report(canned, dataset="Stack Overflow dataset")
        rendered = render_report([metrics])
        assert "126 | 58.7% | 85.7%" in rendered

        injected = canned + [
            RoundTripRecord("gen", c1=Completion("", "x"),
                            termination=Termination.GEN_FAIL),
            RoundTripRecord("nou", c1=Completion("df['v'] = [1]", "x"),
                            termination=Termination.NO_UTTERANCE),
        ]
        metrics2 = report(injected, dataset="Stack Overflow dataset")
        assert metrics2.n == 126
        assert "126 | 58.7% | 85.7%" in render_report([metrics2])

        # A live-endpoint stand-in: completion server reachable over HTTP.
        def handler(request):
            return httpx.Response(
                200, json={"choices": [{"text": "df[df['Host City'] == 'New Orleans'].shape[0]"}]})

        backend = HttpBackend(BackendConfig("http", endpoint="http://live/v1"),
                              transport=httpx.MockTransport(handler))
        case = BenchCase("live1", superbowl, "how many in New Orleans")
        record = run_round_trip(case, BackendConfig("http", endpoint="http://live/v1"),
                                GenParams(), http_backend=backend)
        live = report([record], dataset="live endpoint")
        assert "live endpoint" in render_report([live])
        assert live.n == 1
        _ok("report shape: canned row '126 | 58.7% | 85.7%' reproduced, "
            "N unchanged by injected failures, HTTP backend drives the harness")

    def test_interpreter_oracle_suite(self, superbowl, astronauts, houses):
        """Task fixtures: filter counts 3 and 1, corrected average 1653.5,
        missing cells without 'STS', three qualifying houses."""
        start = time.perf_counter()
        schema = Schema.of_table(superbowl)

        def run(code, table):
            program = translate(parse_object_code(code), Schema.of_table(table))
            result = evaluate(program, table)
            assert not isinstance(result, EvalError), result
            return result

        r1 = run("df[df['Host City'] == 'New Orleans'].shape[0]", superbowl)
        assert r1.output.payload == pytest.approx(3, abs=1e-9)
        r2 = run("df[df['Winner'] == 'New Orleans Saints'].shape[0]", superbowl)
        assert r2.output.payload == pytest.approx(1, abs=1e-9)

        corrected = run(
            "df['Mission Length'] = df['Space Flight (hr)'] / (df['Missions'].str.count(',') + 1)",
            astronauts)
        names = astronauts.column("Name").cells
        acaba = corrected.output.payload[0].cells[names.index("Joseph M. Acaba")]
        assert acaba == pytest.approx(1653.5, abs=1e-9)

        sts = run(
            "df['Mission Length'] = df['Space Flight (hr)'] / df['Missions'].str.count('STS')",
            astronauts)
        for missions, value in zip(astronauts.column("Missions").cells,
                                   sts.output.payload[0].cells):
            assert (value is None) == ("STS" not in missions)

        r3 = run(
            "df[(df['yr_built'] >= 1970) & (df['sqft_basement'] > 0) & (df['yr_renovated'] > 0)]",
            houses)
        assert r3.output.payload.num_rows == 3
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        _ok(f"interpreter oracles: counts 3/1, Acaba 1653.5, missing cells "
            f"track 'STS', 3 qualifying houses, {elapsed:.3f}s")

    def test_index_symmetry_and_phrasing(self):
        """One-based display indices: phrasing and mutual inverses."""
        assert element_phrase(IndexKind.ELEMENT_OF_SERIES,
                              adjust_index_outbound(1) - 1) == "element 2 of the array"
        assert element_phrase(IndexKind.ELEMENT_OF_SERIES, 1) == "element 2 of the array"
        for k in range(1, 101):
            assert adjust_index_outbound(adjust_index_inbound(k)) == k
        _ok("index symmetry: 'element 2 of the array' and outbound/inbound "
            "inverse for k in 1..100")

    def test_failure_classifier(self, astronauts):
        """Literal-list assignment, original-column overwrite, and empty
        completion classify to their modes with zero misclassifications."""
        raw_list = ("df['Number of Missions'] = [2, 1, 2, 4, 2, 3, 2, 4, 1, 3, 2, "
                    "2, 2, 4, 2, 1, 3, 2, 3, 4, 2, 2, 1]")
        record = RoundTripRecord("raw", c1=Completion(raw_list, "x"))
        program, result = _run_code(raw_list, astronauts)
        record.program1 = program
        from nl2grid.interp import EvalOutput
        if isinstance(result, EvalOutput):
            record.o1 = result
        assert classify_failure(record) is FailureMode.RAW_DATA_OUTPUT

        overwrite = "df['Missions'] = df['Missions'].str.split(',')"
        record2 = RoundTripRecord("ow", c1=Completion(overwrite, "x"))
        program2, result2 = _run_code(overwrite, astronauts)
        record2.program1 = program2
        assert isinstance(result2, EvalError)
        record2.eval_error1 = result2
        record2.termination = Termination.EXEC_FAIL
        assert classify_failure(record2) is FailureMode.OVERWRITE_ATTEMPT

        record3 = RoundTripRecord("gen", c1=Completion("", "x"),
                                  termination=Termination.GEN_FAIL)
        assert classify_failure(record3) is FailureMode.GENERATION_FAILURE
        _ok("failure classifier: raw data output, overwrite attempt, "
            "generation failure — 3/3")

    def test_unsupported_construct_path(self, tmp_path):
        """A function definition is rejected at parse, and the session
        surfaces a result without grounded steps instead of crashing."""
        with pytest.raises(UnsupportedConstruct):
            parse_object_code("def review(row):\n    return 1")

        rules = [{"pattern": "(?i)^do the thing$", "code": "def f(x):\n    return x"}]
        path = tmp_path / "rules.json"
        path.write_text(json.dumps(rules))
        engine = Engine(BackendConfig.mock(rules_path=str(path)))
        client = TestClient(create_app(engine))
        created = client.post(
            "/sessions",
            files={"file": ("t.csv", io.BytesIO(fixture_text("astronauts.csv").encode()),
                            "text/csv")})
        sid = created.json()["id"]
        view = client.post(f"/sessions/{sid}/query",
                           json={"query": "do the thing"})
        assert view.status_code == 200
        body = view.json()
        assert body["steps"] is None
        assert body["failure"] == "execution_failure"
        _ok("unsupported constructs: parse error surfaced, session answers "
            "with no steps and no crash")

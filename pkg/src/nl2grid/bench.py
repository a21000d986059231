"""Round-trip stability benchmark and failure-mode classification.

Each case simulates five interactions: (1) submit the query, (2)
generate code C1 and output O1, (3) derive the grounded utterance G1 —
or end the interaction, (4) resubmit G1 unedited, (5) generate C2 and
output O2.  Two metrics follow, both conditioned on G1 existing:

* code generation equality — C2 equals C1 (raw bytes, and normalized
  with no-op print statements dropped),
* output equivalence — O2 equals O1 modulo column names.
"""

from __future__ import annotations

import enum
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import codegen, interp, objcode, tcr, utterance
from .codegen import BackendConfig, Completion, GenParams
from .interp import EvalError, EvalOutput
from .table import Table, TabularOutput, OutputShape, outputs_equivalent, parse_csv
from .tcr import CreateColumn, LiteralList, Schema, TcrProgram
from .utterance import GroundedUtterance


@dataclass(frozen=True)
class BenchCase:
    id: str
    table: Table
    query: str
    expected_output: Optional[TabularOutput] = None


class Termination(enum.Enum):
    FULL = "full"
    NO_UTTERANCE = "no_utterance"
    GEN_FAIL = "gen_fail"
    EXEC_FAIL = "exec_fail"


class FailureMode(enum.Enum):
    GENERATION_FAILURE = "generation_failure"
    EXECUTION_FAILURE = "execution_failure"
    OUTPUT_TYPE_FAILURE = "output_type_failure"
    RAW_DATA_OUTPUT = "raw_data_output"
    OVERWRITE_ATTEMPT = "overwrite_attempt"
    OUTPUT_MISMATCH = "output_mismatch"
    SUCCESS = "success"


@dataclass
class RoundTripRecord:
    case_id: str
    c1: Optional[Completion] = None
    program1: Optional[TcrProgram] = None
    o1: Optional[EvalOutput] = None
    eval_error1: Optional[EvalError] = None
    g1: Optional[GroundedUtterance] = None
    c2: Optional[Completion] = None
    o2: Optional[EvalOutput] = None
    termination: Termination = Termination.FULL
    error: Optional[str] = None


def _run_code(code: str, table: Table) -> Tuple[Optional[TcrProgram], object]:
    """Parse, translate, and evaluate; returns (program, EvalOutput|EvalError|str)."""
    schema = Schema.of_table(table)
    try:
        ast = objcode.parse_object_code(code)
        program = tcr.translate(ast, schema)
    except (objcode.CodeError, tcr.TranslateError) as exc:
        return None, str(exc)
    return program, interp.evaluate(program, table)


def run_round_trip(
    case: BenchCase,
    backend: BackendConfig,
    params: GenParams = GenParams(),
    http_backend=None,
) -> RoundTripRecord:
    """Simulate the five interactions; every failure lands in the record."""
    record = RoundTripRecord(case.id)

    prompt = codegen.build_prompt(case.table, case.query)
    try:
        record.c1 = codegen.generate(backend, prompt, params, http_backend=http_backend)
    except (codegen.TransportError, codegen.AuthError) as exc:
        record.termination = Termination.GEN_FAIL
        record.error = str(exc)
        return record
    if record.c1.is_empty:
        record.termination = Termination.GEN_FAIL
        return record

    program, result = _run_code(record.c1.text, case.table)
    record.program1 = program
    if isinstance(result, str):
        record.termination = Termination.EXEC_FAIL
        record.error = result
        return record
    if isinstance(result, EvalError):
        record.termination = Termination.EXEC_FAIL
        record.eval_error1 = result
        return record
    record.o1 = result

    try:
        record.g1 = utterance.generate_utterance(program)
    except utterance.ExplanationUnavailable as exc:
        record.termination = Termination.NO_UTTERANCE
        record.error = str(exc)
        return record

    requery = utterance.concat_steps(record.g1.texts)
    prompt2 = codegen.build_prompt(case.table, requery)
    try:
        record.c2 = codegen.generate(backend, prompt2, params, http_backend=http_backend)
    except (codegen.TransportError, codegen.AuthError) as exc:
        record.error = str(exc)
        return record
    if record.c2.is_empty:
        return record
    _, result2 = _run_code(record.c2.text, case.table)
    if isinstance(result2, EvalOutput):
        record.o2 = result2
    return record


def code_generation_equality(c1: Completion, c2: Completion) -> Dict[str, bool]:
    """Raw byte equality plus a normalized variant (print noise dropped)."""
    raw = c1.text.strip() == c2.text.strip()

    def normal(text: str) -> Optional[str]:
        try:
            ast = objcode.parse_object_code(text)
        except objcode.CodeError:
            return None
        return objcode.emit_canonical(objcode.strip_print_statements(ast))

    n1, n2 = normal(c1.text), normal(c2.text)
    normalized = n1 is not None and n1 == n2
    return {"raw": raw, "normalized": normalized}


def _program_assigns_raw_list(program: Optional[TcrProgram]) -> bool:
    if program is None:
        return False
    return any(
        isinstance(s, CreateColumn) and isinstance(s.expr, LiteralList)
        for s in program.statements
    )


def classify_failure(
    record: RoundTripRecord,
    expected: Optional[TabularOutput] = None,
) -> FailureMode:
    """Map a record to exactly one failure mode (precedence order fixed)."""
    if record.c1 is None or record.c1.is_empty:
        return FailureMode.GENERATION_FAILURE
    exec_error = record.error if record.o1 is None else None
    eval_error = record.eval_error1
    if record.o1 is None and eval_error is None and record.termination is Termination.EXEC_FAIL:
        return FailureMode.EXECUTION_FAILURE
    if eval_error is not None and eval_error.kind in (
        EvalError.RUNTIME_FAULT, EvalError.UNSUPPORTED,
    ):
        return FailureMode.EXECUTION_FAILURE
    if eval_error is not None and eval_error.kind == EvalError.NO_OUTPUT:
        return FailureMode.OUTPUT_TYPE_FAILURE
    if _program_assigns_raw_list(record.program1):
        return FailureMode.RAW_DATA_OUTPUT
    if eval_error is not None and eval_error.kind == EvalError.OVERWRITE_REFUSED:
        return FailureMode.OVERWRITE_ATTEMPT
    if exec_error is not None:
        return FailureMode.EXECUTION_FAILURE
    if expected is not None and record.o1 is not None \
            and not outputs_equivalent(record.o1.output, expected):
        return FailureMode.OUTPUT_MISMATCH
    return FailureMode.SUCCESS


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    dataset: str
    total_records: int
    n: int  # records that passed all five simulated interactions
    code_eq_raw: Optional[float]
    code_eq_normalized: Optional[float]
    output_eq: Optional[float]
    failures: Dict[str, int] = field(default_factory=dict)


def report(
    records: Sequence[RoundTripRecord],
    expected: Optional[Dict[str, TabularOutput]] = None,
    dataset: str = "corpus",
) -> MetricsReport:
    """Aggregate records; percentages are conditioned on utterance existence."""
    if not records:
        raise ValueError("no records to report on")
    expected = expected or {}
    full = [r for r in records if r.termination is Termination.FULL and r.g1 is not None]
    n = len(full)
    raw_hits = norm_hits = out_hits = 0
    for r in full:
        if r.c2 is not None and not r.c2.is_empty:
            eq = code_generation_equality(r.c1, r.c2)
            raw_hits += eq["raw"]
            norm_hits += eq["normalized"]
        if r.o2 is not None and r.o1 is not None \
                and outputs_equivalent(r.o1.output, r.o2.output):
            out_hits += 1
    failures: Dict[str, int] = {}
    for r in records:
        mode = classify_failure(r, expected.get(r.case_id))
        failures[mode.value] = failures.get(mode.value, 0) + 1

    def pct(hits: int) -> Optional[float]:
        return None if n == 0 else 100.0 * hits / n

    return MetricsReport(dataset, len(records), n,
                         pct(raw_hits), pct(norm_hits), pct(out_hits), failures)


def _fmt_pct(value: Optional[float]) -> str:
    return "—" if value is None else f"{value:.1f}%"


def render_report(reports: Sequence[MetricsReport]) -> str:
    """Fixed-width text table: Dataset | N | Code generation equality | Output equivalence."""
    width = max([len("Dataset")] + [len(r.dataset) for r in reports])
    lines = [f"{'Dataset':<{width}} | N | Code generation equality | Output equivalence"]
    for r in reports:
        lines.append(
            f"{r.dataset:<{width}} | {r.n} | {_fmt_pct(r.code_eq_raw)} | {_fmt_pct(r.output_eq)}"
        )
    for r in reports:
        lines.append(
            f"{r.dataset}: normalized code generation equality {_fmt_pct(r.code_eq_normalized)}"
        )
        parts = ", ".join(f"{k}={v}" for k, v in sorted(r.failures.items()))
        lines.append(f"{r.dataset}: failure modes: {parts}")
    return "\n".join(lines)


def report_to_json(r: MetricsReport) -> dict:
    return {
        "dataset": r.dataset,
        "total_records": r.total_records,
        "n": r.n,
        "code_generation_equality_raw_pct": r.code_eq_raw,
        "code_generation_equality_normalized_pct": r.code_eq_normalized,
        "output_equivalence_pct": r.output_eq,
        "failure_modes": r.failures,
    }


def record_to_json(record: RoundTripRecord,
                   expected: Optional[TabularOutput] = None) -> dict:
    eq = None
    if record.c1 and record.c2 and not record.c1.is_empty and not record.c2.is_empty:
        eq = code_generation_equality(record.c1, record.c2)
    return {
        "id": record.case_id,
        "termination": record.termination.value,
        "failure": classify_failure(record, expected).value,
        "c1": record.c1.text if record.c1 else None,
        "c2": record.c2.text if record.c2 else None,
        "code_equality": eq,
        "outputs_equivalent": (
            None if record.o1 is None or record.o2 is None
            else outputs_equivalent(record.o1.output, record.o2.output)
        ),
        "error": record.error,
    }


# ---------------------------------------------------------------------------
# Corpus on disk: one directory per case
# ---------------------------------------------------------------------------

def _load_expected(case_dir: str) -> Optional[TabularOutput]:
    single = os.path.join(case_dir, "expected.json")
    if os.path.exists(single):
        with open(single, encoding="utf-8") as f:
            payload = json.load(f)
        value = payload.get("value")
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value)
        return TabularOutput(OutputShape.SINGLE_VALUE, value)
    columns_csv = os.path.join(case_dir, "expected_columns.csv")
    if os.path.exists(columns_csv):
        with open(columns_csv, encoding="utf-8") as f:
            table = parse_csv(f.read())
        return TabularOutput(OutputShape.NEW_COLUMNS, table.columns)
    table_csv = os.path.join(case_dir, "expected.csv")
    if os.path.exists(table_csv):
        with open(table_csv, encoding="utf-8") as f:
            return TabularOutput(OutputShape.NEW_TABLE, parse_csv(f.read()))
    return None


def load_corpus(corpus_dir: str) -> List[BenchCase]:
    """Read cases from <dir>/<case>/{table.csv,query.txt,expected.*}."""
    cases = []
    for name in sorted(os.listdir(corpus_dir)):
        case_dir = os.path.join(corpus_dir, name)
        if not os.path.isdir(case_dir):
            continue
        table_path = os.path.join(case_dir, "table.csv")
        query_path = os.path.join(case_dir, "query.txt")
        if not (os.path.exists(table_path) and os.path.exists(query_path)):
            continue
        with open(table_path, encoding="utf-8") as f:
            table = parse_csv(f.read())
        with open(query_path, encoding="utf-8") as f:
            query = f.read().strip()
        cases.append(BenchCase(name, table, query, _load_expected(case_dir)))
    if not cases:
        raise ValueError(f"no cases found under {corpus_dir!r}")
    return cases


def run_corpus(
    cases: Sequence[BenchCase],
    backend: BackendConfig,
    workers: int = 1,
    params: GenParams = GenParams(),
) -> List[RoundTripRecord]:
    if workers <= 1:
        return [run_round_trip(c, backend, params) for c in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: run_round_trip(c, backend, params), cases))

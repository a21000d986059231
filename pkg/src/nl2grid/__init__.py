"""nl2grid: natural-language table computation with grounded, editable steps."""

from .table import (
    CellType, Column, CsvError, ListOf, OutputShape, Table, TabularOutput,
    infer_column_type, outputs_equivalent, parse_csv, serialize_csv,
)
from .objcode import ObjectAst, UnsupportedConstruct, emit_canonical, parse_object_code
from .tcr import Schema, TcrProgram, infer_type, render_code, translate
from .utterance import (
    ExplanationUnavailable, GrammarMismatch, GroundedUtterance,
    adjust_index_inbound, adjust_index_outbound, concat_steps,
    generate_utterance, parse_grounded,
)
from .interp import EvalError, EvalOutput, classify_output, evaluate
from .codegen import BackendConfig, Completion, GenParams, Prompt, build_prompt, generate
from .bench import (
    BenchCase, FailureMode, MetricsReport, RoundTripRecord, classify_failure,
    code_generation_equality, load_corpus, report, run_round_trip,
)

__version__ = "0.1.0"

"""Prompt construction and the pluggable code-generation backend.

A prompt is four parts in a fixed order: language header, library
header, a dataframe literal carrying the user's table, and the query as
a trailing ``#`` comment.  Two backends produce completions from it: an
HTTP client for any completion-style endpoint, and a deterministic
offline mock.  The mock first tries to read the query as grounded
steps; failing that it falls back to a small rules file (which includes
deliberately imperfect rules so known model failure modes can be
reproduced offline); failing that it returns an empty completion.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Optional

import httpx

from . import tcr as tcr_mod
from . import utterance as ut
from .table import Table, format_value
from .tcr import Schema

FRAME_LITERAL_ROW_CAP = 30
_SAMPLE_ROWS = 5


class EmptyQuery(ValueError):
    pass


class TransportError(RuntimeError):
    """The endpoint could not be reached (distinct from an empty completion)."""


class AuthError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenParams:
    temperature: float = 0.0
    stop_sequence: str = "\n#"
    max_tokens: int = 256


@dataclass(frozen=True)
class Prompt:
    language_header: str
    library_header: str
    frame_literal: str
    query_comment: str
    assembled: str
    query: str
    schema: Schema


@dataclass(frozen=True)
class Completion:
    text: str
    backend_id: str
    latency: float = 0.0

    @property
    def is_empty(self) -> bool:
        return not self.text.strip()


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # "mock" | "http"
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key: Optional[str] = None
    rules_path: Optional[str] = None

    def __post_init__(self):
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http backend needs an endpoint")

    @staticmethod
    def mock(rules_path: Optional[str] = None) -> "BackendConfig":
        return BackendConfig("mock", rules_path=rules_path)

    @staticmethod
    def http_from_env() -> "BackendConfig":
        endpoint = os.environ.get("NL2GRID_API_URL")
        if not endpoint:
            raise ValueError("NL2GRID_API_URL is not set")
        return BackendConfig(
            "http",
            endpoint=endpoint,
            model=os.environ.get("NL2GRID_MODEL", "code-davinci-002"),
            api_key=os.environ.get("NL2GRID_API_KEY"),
        )


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------

def _literal_for_prompt(v) -> str:
    if v is None:
        return "None"
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, (int, float)):
        return format_value(v)
    text = format_value(v)
    escaped = text.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def frame_literal(table: Table) -> str:
    """Dataframe literal for the prompt; big tables fall back to a sample."""
    n = table.num_rows
    rows = n if n <= FRAME_LITERAL_ROW_CAP else _SAMPLE_ROWS
    lines = ["df = pd.DataFrame({"]
    for column in table.columns:
        cells = ", ".join(_literal_for_prompt(c) for c in column.cells[:rows])
        lines.append(f"    '{column.name}': [{cells}],")
    lines.append("})")
    if rows < n:
        lines.append(f"# ({n} rows total; first {rows} shown)")
    return "\n".join(lines)


def build_prompt(table: Table, query: str) -> Prompt:
    """Assemble the four prompt sections around a user query."""
    if not query or not query.strip():
        raise EmptyQuery("query must be non-empty")
    flat_query = " ".join(query.split())  # comments are single-line
    language = "# Python 3"
    library = "import pandas as pd"
    literal = frame_literal(table)
    comment = f"# {flat_query}"
    assembled = "\n".join([language, library, literal, comment]) + "\n"
    return Prompt(language, library, literal, comment, assembled,
                  flat_query, Schema.of_table(table))


def truncate_at_stop(text: str, stop_sequence: str) -> str:
    pos = text.find(stop_sequence)
    return text if pos < 0 else text[:pos]


# ---------------------------------------------------------------------------
# Mock backend
# ---------------------------------------------------------------------------

def _load_rules(path: Optional[str]) -> List[dict]:
    if path:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    data = resources.files("nl2grid.data").joinpath("mock_rules.json").read_text("utf-8")
    return json.loads(data)


def _normalize_name(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", " ", name.lower()).strip()


def fuzzy_column(wanted: str, schema: Schema) -> Optional[str]:
    """Best schema column for a free-form mention, or None."""
    target = _normalize_name(wanted)
    if not target:
        return None
    best, best_score = None, 0.0
    for name in schema.column_names():
        norm = _normalize_name(name)
        if norm == target:
            return name
        a, b = set(target.split()), set(norm.split())
        overlap = len(a & b)
        if norm and (target in norm or norm in target):
            overlap = max(overlap, min(len(a), len(b)))
        if overlap == 0:
            continue
        score = overlap / max(len(a | b), 1)
        if score > best_score:
            best, best_score = name, score
    return best


class MockBackend:
    """Deterministic offline completion source."""

    def __init__(self, rules_path: Optional[str] = None):
        self.rules = _load_rules(rules_path)

    def complete(self, query: str, schema: Schema) -> str:
        steps = ut.split_query_steps(query)
        candidates = [steps] if steps else [[query]]
        for step_texts in candidates:
            try:
                program = ut.parse_grounded(step_texts, schema)
                return tcr_mod.render_code(program, schema)
            except ut.GrammarMismatch:
                continue
        columns = set(schema.column_names())
        for rule in self.rules:
            if not re.search(rule["pattern"], query.strip()):
                continue
            if not set(rule.get("requires", ())) <= columns:
                continue
            code = rule["code"]
            ok = True
            m = re.search(rule["pattern"], query.strip())
            for group in rule.get("fuzzy", ()):
                resolved = fuzzy_column(m.group(group) or "", schema)
                if resolved is None:
                    ok = False
                    break
                code = code.replace("{" + group + "}", resolved)
            if ok:
                return code
        return ""


def mock_generate(query: str, schema: Schema,
                  rules_path: Optional[str] = None) -> Completion:
    text = MockBackend(rules_path).complete(query, schema)
    return Completion(text, backend_id="mock")


# ---------------------------------------------------------------------------
# HTTP backend
# ---------------------------------------------------------------------------

_COMPLETION_FIELDS = ("text", "completion", "generated_text")


def _extract_completion(payload: dict) -> str:
    choices = payload.get("choices")
    if isinstance(choices, list) and choices:
        choice = choices[0]
        for key in _COMPLETION_FIELDS:
            if isinstance(choice.get(key), str):
                return choice[key]
        message = choice.get("message")
        if isinstance(message, dict) and isinstance(message.get("content"), str):
            return message["content"]
    for key in _COMPLETION_FIELDS:
        if isinstance(payload.get(key), str):
            return payload[key]
    return ""


class HttpBackend:
    """Client for a completion-style JSON endpoint.

    Request body: {model, prompt, temperature, max_tokens, stop}.  The
    response may carry the completion in ``choices[0].text`` or a
    top-level text field.
    """

    MAX_ATTEMPTS = 3

    def __init__(self, config: BackendConfig, retry_delay: float = 0.5,
                 transport: Optional[httpx.BaseTransport] = None,
                 timeout: float = 60.0):
        self.config = config
        self.retry_delay = retry_delay
        self.client = httpx.Client(transport=transport, timeout=timeout)

    def complete(self, prompt: Prompt, params: GenParams) -> str:
        body = {
            "model": self.config.model,
            "prompt": prompt.assembled,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "stop": [params.stop_sequence],
        }
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        last_error: Optional[Exception] = None
        for attempt in range(self.MAX_ATTEMPTS):
            try:
                response = self.client.post(self.config.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt + 1 < self.MAX_ATTEMPTS:
                    time.sleep(self.retry_delay * (2 ** attempt))
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials ({response.status_code})")
            if response.status_code >= 500:
                last_error = TransportError(f"server error {response.status_code}")
                if attempt + 1 < self.MAX_ATTEMPTS:
                    time.sleep(self.retry_delay * (2 ** attempt))
                continue
            if response.status_code != 200:
                raise TransportError(f"unexpected status {response.status_code}")
            text = _extract_completion(response.json())
            return truncate_at_stop(text, params.stop_sequence).strip("\n")
        raise TransportError(f"gave up after {self.MAX_ATTEMPTS} attempts: {last_error}")


def generate(
    cfg: BackendConfig,
    prompt: Prompt,
    params: GenParams = GenParams(),
    http_backend: Optional[HttpBackend] = None,
) -> Completion:
    """Produce a completion for a prompt via the configured backend."""
    start = time.perf_counter()
    if cfg.kind == "mock":
        text = MockBackend(cfg.rules_path).complete(prompt.query, prompt.schema)
        backend_id = "mock"
    else:
        backend = http_backend or HttpBackend(cfg)
        text = backend.complete(prompt, params)
        backend_id = f"http:{cfg.model}"
    return Completion(text, backend_id, latency=time.perf_counter() - start)

"""Session engine and HTTP JSON API for the interaction loop.

One session per uploaded table.  A query runs the full pipeline
(prompt, completion, translation, evaluation, grounded steps); new
columns join the session's working table, original columns stay
immutable.  "Update & Go" concatenates the edited steps into a new
query and reruns the same path, echoing the concatenated query back.
The generated code never appears in a response unless debug is on.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import bench, codegen, interp, objcode, tcr, utterance
from .bench import FailureMode, RoundTripRecord, Termination
from .codegen import BackendConfig, GenParams
from .interp import EvalError, EvalOutput, Placement
from .table import CsvError, Table, format_value, parse_csv, serialize_csv
from .tcr import Schema

_GENERIC_ERROR = "Sorry, that didn't work. Try rephrasing your query."


@dataclass
class HistoryEntry:
    query: str
    code: Optional[str]
    steps: Optional[List[str]]
    failure: Optional[str]
    output_summary: Optional[str]


@dataclass
class Session:
    id: str
    original: Table
    working: Table
    history: List[HistoryEntry] = dc_field(default_factory=list)
    lock: threading.Lock = dc_field(default_factory=threading.Lock)

    @property
    def protected(self) -> frozenset:
        return frozenset(self.original.column_names())

    @property
    def created_columns(self) -> List[str]:
        originals = set(self.original.column_names())
        return [n for n in self.working.column_names() if n not in originals]


def _merge_columns(table: Table, new_columns) -> Table:
    columns = list(table.columns)
    names = [c.name for c in columns]
    for col in new_columns:
        if col.name in names:
            columns[names.index(col.name)] = col
        else:
            columns.append(col)
            names.append(col.name)
    return Table(table.name, tuple(columns))


def table_to_json(session: Session) -> dict:
    created = set(session.created_columns)
    return {
        "name": session.working.name,
        "num_rows": session.working.num_rows,
        "columns": [
            {
                "name": c.name,
                "type": str(c.cell_type.value) if hasattr(c.cell_type, "value") else "list",
                "created": c.name in created,
                "cells": [format_value(v) for v in c.cells],
            }
            for c in session.working.columns
        ],
    }


class Engine:
    """Owns sessions and runs the query pipeline against one backend."""

    def __init__(self, backend: BackendConfig, debug: bool = False,
                 http_backend=None):
        self.backend = backend
        self.debug = debug
        self.http_backend = http_backend
        self.sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    # -- session management ---------------------------------------------------

    def create_session(self, csv_text: str) -> Session:
        table = parse_csv(csv_text)
        session = Session(uuid.uuid4().hex[:12], table, table)
        with self._lock:
            self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def drop(self, session_id: str) -> None:
        with self._lock:
            self.sessions.pop(session_id, None)

    # -- pipeline ---------------------------------------------------------------

    def handle_query(self, session: Session, query: str,
                     debug: Optional[bool] = None) -> dict:
        if not query or not query.strip():
            raise ValueError("query must be non-empty")
        debug = self.debug if debug is None else debug
        with session.lock:
            view = self._run_pipeline(session, query, debug)
            session.history.append(HistoryEntry(
                query=query,
                code=view.pop("_code", None),
                steps=view.get("steps"),
                failure=view.get("failure"),
                output_summary=view.get("message"),
            ))
            if debug and session.history[-1].code is not None:
                view["code"] = session.history[-1].code
            view["table"] = table_to_json(session)
            return view

    def handle_update_and_go(self, session: Session, steps: List[str],
                             debug: Optional[bool] = None) -> dict:
        texts = [s for s in steps if s and s.strip()]
        if not texts:
            raise ValueError("at least one non-empty step is required")
        query = utterance.concat_steps(texts)
        return self.handle_query(session, query, debug)

    def _run_pipeline(self, session: Session, query: str, debug: bool) -> dict:
        view: dict = {
            "query_echo": query,
            "steps": None,
            "failure": None,
            "message": None,
            "output": None,
            "created_columns": [],
        }
        prompt = codegen.build_prompt(session.working, query)
        try:
            completion = codegen.generate(
                self.backend, prompt, GenParams(), http_backend=self.http_backend)
        except (codegen.TransportError, codegen.AuthError) as exc:
            view["failure"] = "backend_unreachable"
            view["message"] = f"The code generation backend failed: {exc}"
            return view
        view["_code"] = completion.text or None

        record = RoundTripRecord(session.id, c1=completion)
        if completion.is_empty:
            record.termination = Termination.GEN_FAIL
            view["failure"] = FailureMode.GENERATION_FAILURE.value
            view["message"] = _GENERIC_ERROR
            return view

        schema = Schema.of_table(session.working)
        try:
            ast = objcode.parse_object_code(completion.text)
            program = tcr.translate(ast, schema)
        except (objcode.CodeError, tcr.TranslateError) as exc:
            record.termination = Termination.EXEC_FAIL
            record.error = str(exc)
            view["failure"] = bench.classify_failure(record).value
            view["message"] = _GENERIC_ERROR
            return view
        record.program1 = program

        result = interp.evaluate(program, session.working,
                                 protected_columns=session.protected)
        try:
            grounded = utterance.generate_utterance(program)
            view["steps"] = grounded.texts
        except utterance.ExplanationUnavailable:
            grounded = None  # results still shown, just without steps

        if isinstance(result, EvalError):
            record.eval_error1 = result
            record.termination = Termination.EXEC_FAIL
            view["failure"] = bench.classify_failure(record).value
            if result.kind == EvalError.OVERWRITE_REFUSED:
                view["message"] = (
                    f"Refused to overwrite the original column {result.description!r}.")
            else:
                view["message"] = _GENERIC_ERROR
            return view

        record.o1 = result
        failure = bench.classify_failure(record)
        if failure is not FailureMode.SUCCESS:
            view["failure"] = failure.value
        view["output"] = interp.eval_output_to_json(result)
        view["created_columns"] = list(result.created_column_names)
        if result.placement == Placement.APPEND_TO_GRID:
            session.working = _merge_columns(session.working, result.output.payload)
        view["message"] = _describe_output(result)
        return view


def _describe_output(result: EvalOutput) -> str:
    shape = result.output.shape.value
    if shape == "single_value":
        return f"Result: {format_value(result.output.payload)}"
    if shape == "new_columns":
        names = ", ".join(c.name for c in result.output.payload)
        return f"Added column(s): {names}"
    if shape == "new_table":
        t = result.output.payload
        return f"New table with {t.num_rows} row(s) and {len(t.columns)} column(s)"
    return "New rows"


# ---------------------------------------------------------------------------
# Snapshot persistence
# ---------------------------------------------------------------------------

def save_snapshot(engine: Engine, path: str) -> None:
    payload = []
    for session in engine.sessions.values():
        payload.append({
            "id": session.id,
            "original_csv": serialize_csv(session.original),
            "working_csv": serialize_csv(session.working),
            "history": [vars(h) for h in session.history],
        })
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def load_snapshot(engine: Engine, path: str) -> int:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    for item in payload:
        session = Session(item["id"], parse_csv(item["original_csv"]),
                          parse_csv(item["working_csv"]))
        session.history = [HistoryEntry(**h) for h in item["history"]]
        engine.sessions[session.id] = session
    return len(payload)


# ---------------------------------------------------------------------------
# HTTP API
# ---------------------------------------------------------------------------

class QueryBody(BaseModel):
    query: str
    debug: Optional[bool] = None


class StepsBody(BaseModel):
    steps: List[str]
    debug: Optional[bool] = None


def create_app(engine: Optional[Engine] = None,
               backend: Optional[BackendConfig] = None,
               debug: bool = False) -> FastAPI:
    engine = engine or Engine(backend or BackendConfig.mock(), debug=debug)
    app = FastAPI(title="nl2grid")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.engine = engine

    def session_or_404(session_id: str) -> Session:
        try:
            return engine.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.get("/health")
    def health():
        return {"status": "ok", "backend": engine.backend.kind}

    @app.post("/sessions")
    async def create_session(file: UploadFile = File(...)):
        raw = await file.read()
        try:
            session = engine.create_session(raw.decode("utf-8-sig"))
        except (CsvError, ValueError, UnicodeDecodeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        schema = Schema.of_table(session.working)
        return {
            "id": session.id,
            "schema": {n: (t.value if hasattr(t, "value") else "list")
                       for n, t in schema.columns},
            "table": table_to_json(session),
        }

    @app.post("/sessions/{session_id}/query")
    def post_query(session_id: str, body: QueryBody):
        session = session_or_404(session_id)
        try:
            return engine.handle_query(session, body.query, body.debug)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/sessions/{session_id}/steps")
    def post_steps(session_id: str, body: StepsBody):
        session = session_or_404(session_id)
        try:
            return engine.handle_update_and_go(session, body.steps, body.debug)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = session_or_404(session_id)
        return {
            "id": session.id,
            "table": table_to_json(session),
            "history": [vars(h) for h in session.history],
        }

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        session_or_404(session_id)
        engine.drop(session_id)
        return {"deleted": True}

    return app

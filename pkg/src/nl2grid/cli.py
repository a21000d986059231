"""Command-line front door: serve, ask, explain, bench."""

from __future__ import annotations

import json
import sys
from typing import Optional

import click

from . import bench as bench_mod
from . import objcode, service, tcr, utterance
from .codegen import BackendConfig
from .table import parse_csv
from .tcr import Schema


def _backend_config(backend: str, rules: Optional[str]) -> BackendConfig:
    if backend == "mock":
        return BackendConfig.mock(rules_path=rules)
    return BackendConfig.http_from_env()


@click.group()
def main():
    """Natural-language table assistant with grounded, editable steps."""


@main.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True)
@click.option("--rules", type=click.Path(exists=True), default=None,
              help="Alternative mock rules file.")
@click.option("--debug", is_flag=True, help="Include generated code in responses.")
@click.option("--snapshot", type=click.Path(), default=None,
              help="JSON file to restore sessions from and save them to on shutdown.")
@click.option("--static", "static_dir", type=click.Path(exists=True), default=None,
              help="Directory with a built web UI to serve at /ui.")
def serve(port, host, backend, rules, debug, snapshot, static_dir):
    """Run the HTTP JSON API."""
    import os

    import uvicorn

    engine = service.Engine(_backend_config(backend, rules), debug=debug)
    if snapshot and os.path.exists(snapshot):
        count = service.load_snapshot(engine, snapshot)
        click.echo(f"restored {count} session(s) from {snapshot}")
    app = service.create_app(engine)
    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        if snapshot:
            service.save_snapshot(engine, snapshot)
            click.echo(f"saved sessions to {snapshot}")


@main.command()
@click.option("--table", "table_path", type=click.Path(exists=True), required=True)
@click.option("--query", required=True)
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True)
@click.option("--rules", type=click.Path(exists=True), default=None)
@click.option("--debug", is_flag=True)
def ask(table_path, query, backend, rules, debug):
    """One-shot query against a CSV table."""
    engine = service.Engine(_backend_config(backend, rules), debug=debug)
    with open(table_path, encoding="utf-8") as f:
        session = engine.create_session(f.read())
    view = engine.handle_query(session, query)
    click.echo(f"query: {view['query_echo']}")
    if view.get("failure"):
        click.echo(f"failure: {view['failure']}")
    if view.get("message"):
        click.echo(view["message"])
    if debug and view.get("code"):
        click.echo("code:\n" + view["code"])
    if view.get("steps"):
        click.echo("steps:")
        for i, s in enumerate(view["steps"], start=1):
            click.echo(f"  ({i}) {s}")
    output = view.get("output")
    if output and output["shape"] == "new_columns":
        for col in output["columns"]:
            click.echo(f"column {col['name']}: {', '.join(col['cells'])}")
    elif output and output["shape"] == "new_table":
        cols = output["table"]["columns"]
        click.echo(" | ".join(c["name"] for c in cols))
        for i in range(len(cols[0]["cells"]) if cols else 0):
            click.echo(" | ".join(c["cells"][i] for c in cols))


@main.command()
@click.option("--code", "code_path", type=click.Path(exists=True, allow_dash=True),
              required=True, help="File with generated code ('-' for stdin).")
@click.option("--table", "table_path", type=click.Path(exists=True), required=True)
def explain(code_path, table_path):
    """Print the grounded utterance for a code snippet, nothing else."""
    if code_path == "-":
        source = sys.stdin.read()
    else:
        with open(code_path, encoding="utf-8") as f:
            source = f.read()
    with open(table_path, encoding="utf-8") as f:
        table = parse_csv(f.read())
    schema = Schema.of_table(table)
    try:
        program = tcr.translate(objcode.parse_object_code(source), schema)
        grounded = utterance.generate_utterance(program)
    except (objcode.CodeError, tcr.TranslateError,
            utterance.ExplanationUnavailable) as exc:
        click.echo(f"no grounded utterance: {exc}", err=True)
        sys.exit(1)
    click.echo(grounded.numbered())


@main.command(name="bench")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True)
@click.option("--rules", type=click.Path(exists=True), default=None)
@click.option("--workers", default=1, show_default=True)
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="Write the full report (records included) to this file.")
@click.option("--dataset", default=None, help="Dataset label for the report.")
def bench_cmd(corpus_dir, backend, rules, workers, json_out, dataset):
    """Run the round-trip stability benchmark over a corpus directory."""
    import os

    cases = bench_mod.load_corpus(corpus_dir)
    config = _backend_config(backend, rules)
    records = bench_mod.run_corpus(cases, config, workers=workers)
    expected = {c.id: c.expected_output for c in cases if c.expected_output is not None}
    label = dataset or os.path.basename(os.path.normpath(corpus_dir))
    metrics = bench_mod.report(records, expected=expected, dataset=label)
    click.echo(bench_mod.render_report([metrics]))
    if json_out:
        payload = bench_mod.report_to_json(metrics)
        payload["records"] = [
            bench_mod.record_to_json(r, expected.get(r.case_id)) for r in records
        ]
        with open(json_out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
        click.echo(f"wrote {json_out}")


if __name__ == "__main__":
    main()

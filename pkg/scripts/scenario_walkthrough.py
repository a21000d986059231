#!/usr/bin/env python3
"""Walk the full interaction loop on the astronauts table, stage by stage.

Shows: query -> generated code -> grounded steps -> grid column with
empty cells -> user edit of step 2 -> Update & Go -> corrected column.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from nl2grid.codegen import BackendConfig
from nl2grid.service import Engine

FIXTURE = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures",
                       "astronauts.csv")


def show(view, label):
    print(f"--- {label}")
    print(f"query: {view['query_echo']}")
    if view.get("code"):
        print(f"code (debug): {view['code']}")
    if view.get("steps"):
        for i, step in enumerate(view["steps"], start=1):
            print(f"  ({i}) {step}")
    if view.get("failure"):
        print(f"failure: {view['failure']}")
    col = next((c for c in view["table"]["columns"] if c["name"] == "Mission Length"), None)
    if col:
        cells = ", ".join(c if c else "(empty)" for c in col["cells"][:6])
        print(f"Mission Length: {cells}, ...")
    print()


def main():
    engine = Engine(BackendConfig.mock(), debug=True)
    with open(FIXTURE, encoding="utf-8") as f:
        session = engine.create_session(f.read())
    print(f"session {session.id}: {session.working.num_rows} rows\n")

    first = engine.handle_query(session, "calculate average mission length")
    show(first, "Go")

    steps = list(first["steps"])
    steps[1] = "column Space Flight (hr) divided by (count ',' from column Missions + 1)"
    print(f"user edits step 2 -> {steps[1]}\n")

    second = engine.handle_update_and_go(session, steps)
    show(second, "Update & Go")


if __name__ == "__main__":
    main()

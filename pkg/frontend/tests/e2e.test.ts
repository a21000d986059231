// End-to-end: the real UI logic against the real service (mock backend).
//
// Spawns `nl2grid serve`, uploads the astronauts table, submits the
// mission-length query, observes the highlighted new column and the
// steps panel, edits step 2 to the comma-count logic, presses
// Update & Go, and checks the corrected column plus the concatenated
// query echoed into the query box.

import { spawn, ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { createServer } from "node:net";
import { dirname, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { highlightedColumns } from "../src/grid.js";
import { PAGE } from "./helpers.js";

const ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");
const CSV_PATH = resolve(ROOT, "tests", "fixtures", "astronauts.csv");

let service: ChildProcess;
let base: string;

async function freePort(): Promise<number> {
  return new Promise((resolvePort, reject) => {
    const server = createServer();
    server.on("error", reject);
    server.listen(0, "127.0.0.1", () => {
      const port = (server.address() as { port: number }).port;
      server.close(() => resolvePort(port));
    });
  });
}

async function waitForHealth(url: string, attempts = 100): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      const response = await fetch(`${url}/health`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service at ${url} never became healthy`);
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  service = spawn("python3", ["-m", "nl2grid.cli", "serve", "--port", String(port),
                              "--backend", "mock"],
                  { cwd: ROOT, stdio: "ignore" });
  await waitForHealth(base);
});

afterAll(() => {
  service?.kill();
});

describe("full interaction loop against the live service", () => {
  it("upload, query, edit step 2, Update & Go", async () => {
    document.body.innerHTML = PAGE;
    const app = new App(document, new ApiClient(base));

    const csv = readFileSync(CSV_PATH, "utf-8");
    await app.uploadCsv(new Blob([csv], { type: "text/csv" }), "astronauts.csv");
    expect(app.state.sessionId).toBeTruthy();
    expect(app.state.table?.num_rows).toBe(23);

    // Go
    app.state = { ...app.state, queryText: "calculate average mission length" };
    await app.submitQuery();

    const grid = document.getElementById("grid")!;
    expect(highlightedColumns(grid)).toEqual(["Mission Length"]);
    const inputs = app.stepInputs();
    expect(inputs.length).toBe(2);
    expect(inputs[0]!.value).toBe("create column Mission Length");
    expect(inputs[1]!.value).toBe(
      "column Space Flight (hr) divided by count 'STS' from column Missions");

    // The faulty heuristic leaves empty cells (rows with no 'STS').
    const before = app.state.table!.columns.find((c) => c.name === "Mission Length")!;
    expect(before.cells).toContain("");

    // Edit step 2 to the comma-count logic and press Update & Go.
    inputs[1]!.value =
      "column Space Flight (hr) divided by (count ',' from column Missions + 1)";
    inputs[1]!.dispatchEvent(new Event("input"));
    (document.getElementById("update-go") as HTMLButtonElement).click();
    await waitUntil(() => !app.state.busy && app.state.queryText.startsWith("(1)"));

    const queryBox = document.getElementById("query-box") as HTMLTextAreaElement;
    expect(queryBox.value).toBe(
      "(1) create column Mission Length, (2) column Space Flight (hr) divided by "
      + "(count ',' from column Missions + 1)");

    const corrected = app.state.table!.columns.find((c) => c.name === "Mission Length")!;
    expect(corrected.cells[0]).toBe("1653.5");
    expect(corrected.cells).not.toContain("");
    expect(highlightedColumns(grid)).toEqual(["Mission Length"]);
    expect(app.state.failure).toBeNull();
  });

  it("adding a step grows the echoed query by one segment", async () => {
    document.body.innerHTML = PAGE;
    const app = new App(document, new ApiClient(base));
    const csv = readFileSync(CSV_PATH, "utf-8");
    await app.uploadCsv(new Blob([csv], { type: "text/csv" }), "astronauts.csv");

    app.state = {
      ...app.state,
      queryText: "(1) select rows where column Status is Active, (2) return number of rows",
    };
    await app.submitQuery();
    expect(app.stepInputs().length).toBe(2);

    (document.getElementById("add-step") as HTMLButtonElement).click();
    const inputs = app.stepInputs();
    inputs[1]!.value = "select column Name";
    inputs[1]!.dispatchEvent(new Event("input"));
    inputs[2]!.value = "count";
    inputs[2]!.dispatchEvent(new Event("input"));
    await app.updateAndGo();

    const echoed = app.state.queryText;
    expect(echoed.match(/\(\d+\)/g)?.length).toBe(3);
    expect(app.state.failure).toBeNull();
  });
});

async function waitUntil(check: () => boolean, timeoutMs = 10000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) throw new Error("condition never became true");
    await new Promise((r) => setTimeout(r, 50));
  }
}

// Wires the interaction surface: CSV drop zone, query box with Go,
// results pane, editable numbered steps, Update & Go.

import { ApiClient, ApiError, ResultView } from "./api.js";
import { renderGrid } from "./grid.js";
import {
  ViewState, addStep, applyResult, applySession, deleteStep, editStep,
  initialState, nonEmptySteps,
} from "./state.js";

interface Elements {
  dropZone: HTMLElement;
  dropHint: HTMLElement;
  grid: HTMLElement;
  queryBox: HTMLTextAreaElement;
  goButton: HTMLButtonElement;
  resultPane: HTMLElement;
  failureBanner: HTMLElement;
  stepsList: HTMLElement;
  addStepButton: HTMLButtonElement;
  updateGoButton: HTMLButtonElement;
}

const FAILURE_TEXT: Record<string, string> = {
  generation_failure: "No code was generated for this query.",
  execution_failure: "The generated code could not be executed.",
  output_type_failure: "The result could not be displayed.",
  raw_data_output: "The model wrote raw values instead of a computation.",
  overwrite_attempt: "Refused to overwrite an original column.",
  output_mismatch: "The result does not match the expected output.",
  backend_unreachable: "The code generation backend is unreachable.",
};

export class App {
  state: ViewState = initialState();
  private readonly el: Elements;

  constructor(private readonly doc: Document, private readonly api: ApiClient) {
    const get = <T extends HTMLElement>(id: string): T => {
      const node = doc.getElementById(id);
      if (!node) throw new Error(`missing element #${id}`);
      return node as T;
    };
    this.el = {
      dropZone: get("grid-area"),
      dropHint: get("drop-hint"),
      grid: get("grid"),
      queryBox: get<HTMLTextAreaElement>("query-box"),
      goButton: get<HTMLButtonElement>("go-button"),
      resultPane: get("result-pane"),
      failureBanner: get("failure-banner"),
      stepsList: get("steps-list"),
      addStepButton: get<HTMLButtonElement>("add-step"),
      updateGoButton: get<HTMLButtonElement>("update-go"),
    };
    this.bind();
    this.render();
  }

  private bind(): void {
    this.el.dropZone.addEventListener("dragover", (e) => e.preventDefault());
    this.el.dropZone.addEventListener("drop", (e) => {
      e.preventDefault();
      const file = (e as DragEvent).dataTransfer?.files?.[0];
      if (file) void this.uploadCsv(file, file.name);
    });
    this.el.goButton.addEventListener("click", () => void this.submitQuery());
    this.el.queryBox.addEventListener("input", () => {
      this.state = { ...this.state, queryText: this.el.queryBox.value };
      this.syncButtons();
    });
    this.el.addStepButton.addEventListener("click", () => {
      this.state = addStep(this.state);
      this.render();
    });
    this.el.updateGoButton.addEventListener("click", () => void this.updateAndGo());
  }

  // -- actions (also the test surface) --------------------------------------

  async uploadCsv(file: Blob, name = "table.csv"): Promise<void> {
    await this.whileBusy(async () => {
      const created = await this.api.createSession(file, name);
      this.state = applySession(this.state, created);
    });
  }

  async submitQuery(): Promise<void> {
    const query = this.state.queryText.trim();
    if (!this.state.sessionId || !query) {
      this.showNotice("Type a query first.");
      return;
    }
    await this.whileBusy(async () => {
      const view = await this.api.query(this.state.sessionId!, query);
      this.state = applyResult(this.state, view);
    });
  }

  async updateAndGo(): Promise<void> {
    const steps = nonEmptySteps(this.state);
    if (!this.state.sessionId) return;
    if (steps.length === 0) {
      this.showNotice("Add at least one step before resubmitting.");
      return;
    }
    await this.whileBusy(async () => {
      const view = await this.api.steps(this.state.sessionId!, steps);
      this.state = applyResult(this.state, view);
    });
  }

  // -- plumbing ---------------------------------------------------------------

  private async whileBusy(work: () => Promise<void>): Promise<void> {
    if (this.state.busy) return; // one request in flight
    this.state = { ...this.state, busy: true };
    this.syncButtons();
    try {
      await work();
    } catch (error) {
      const message =
        error instanceof ApiError ? error.message : `Request failed: ${String(error)}`;
      this.state = { ...this.state, busy: false };
      this.showNotice(message);
    }
    this.state = { ...this.state, busy: false };
    this.render();
  }

  private showNotice(text: string): void {
    this.el.failureBanner.hidden = false;
    this.el.failureBanner.textContent = text;
    this.syncButtons();
  }

  render(): void {
    renderGrid(this.el.grid, this.state.table, this.state.highlights);
    this.el.dropHint.hidden = this.state.table !== null;
    this.el.queryBox.value = this.state.queryText;
    this.el.resultPane.textContent = this.state.resultMessage;
    if (this.state.failure) {
      this.el.failureBanner.hidden = false;
      this.el.failureBanner.textContent =
        FAILURE_TEXT[this.state.failure] ?? this.state.failure;
    } else {
      this.el.failureBanner.hidden = true;
      this.el.failureBanner.textContent = "";
    }
    this.renderSteps();
    this.syncButtons();
  }

  private renderSteps(): void {
    this.el.stepsList.textContent = "";
    this.state.steps.forEach((step, i) => {
      const item = this.doc.createElement("li");
      const input = this.doc.createElement("input");
      input.type = "text";
      input.value = step;
      input.className = "step-input";
      input.addEventListener("input", () => {
        this.state = editStep(this.state, i, input.value);
        this.syncButtons();
      });
      const remove = this.doc.createElement("button");
      remove.textContent = "×";
      remove.className = "step-delete";
      remove.addEventListener("click", () => {
        this.state = deleteStep(this.state, i);
        this.render();
      });
      item.appendChild(input);
      item.appendChild(remove);
      this.el.stepsList.appendChild(item);
    });
  }

  private syncButtons(): void {
    const ready = this.state.sessionId !== null && !this.state.busy;
    this.el.goButton.disabled = !ready || !this.state.queryText.trim();
    this.el.updateGoButton.disabled = !ready || nonEmptySteps(this.state).length === 0;
    this.el.addStepButton.disabled = this.state.busy;
  }

  stepInputs(): HTMLInputElement[] {
    return Array.from(this.el.stepsList.querySelectorAll("input.step-input"));
  }
}

export function createApp(doc: Document, api: ApiClient): App {
  return new App(doc, api);
}

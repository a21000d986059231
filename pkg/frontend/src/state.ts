// View state: the engine's responses are the source of truth, the only
// client-side state is in-progress step edits and the busy flag.

import type { ResultView, SessionCreated, TableView } from "./api.js";

export interface ViewState {
  sessionId: string | null;
  table: TableView | null;
  queryText: string;
  steps: string[];
  resultMessage: string;
  failure: string | null;
  highlights: ReadonlySet<string>;
  busy: boolean;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    table: null,
    queryText: "",
    steps: [],
    resultMessage: "",
    failure: null,
    highlights: new Set(),
    busy: false,
  };
}

export function applySession(state: ViewState, created: SessionCreated): ViewState {
  return {
    ...initialState(),
    sessionId: created.id,
    table: created.table,
    queryText: state.queryText,
  };
}

export function applyResult(state: ViewState, view: ResultView): ViewState {
  return {
    ...state,
    table: view.table,
    queryText: view.query_echo,
    steps: view.steps ? [...view.steps] : [],
    resultMessage: view.message ?? "",
    failure: view.failure,
    // Only columns created by this result get the highlight treatment.
    highlights: new Set(view.created_columns),
    busy: false,
  };
}

export function editStep(state: ViewState, index: number, text: string): ViewState {
  const steps = [...state.steps];
  if (index < 0 || index >= steps.length) return state;
  steps[index] = text;
  return { ...state, steps };
}

export function addStep(state: ViewState): ViewState {
  return { ...state, steps: [...state.steps, ""] };
}

export function deleteStep(state: ViewState, index: number): ViewState {
  return { ...state, steps: state.steps.filter((_, i) => i !== index) };
}

export function nonEmptySteps(state: ViewState): string[] {
  return state.steps.map((s) => s.trim()).filter((s) => s.length > 0);
}

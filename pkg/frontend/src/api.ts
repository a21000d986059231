// Thin typed client over the session HTTP API.

export interface ColumnView {
  name: string;
  type: string;
  created: boolean;
  cells: string[];
}

export interface TableView {
  name: string;
  num_rows: number;
  columns: ColumnView[];
}

export interface OutputView {
  shape: "single_value" | "new_columns" | "new_table" | "new_rows";
  placement: string;
  created_columns: string[];
  value?: string;
  columns?: { name: string; cells: string[] }[];
  table?: { columns: { name: string; cells: string[] }[] };
}

export interface ResultView {
  query_echo: string;
  steps: string[] | null;
  failure: string | null;
  message: string | null;
  output: OutputView | null;
  created_columns: string[];
  table: TableView;
  code?: string;
}

export interface SessionCreated {
  id: string;
  schema: Record<string, string>;
  table: TableView;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(readonly base: string, fetchImpl?: FetchLike) {
    const impl = fetchImpl ?? (globalThis.fetch as FetchLike);
    this.fetchImpl = (input, init) => impl.call(globalThis, input, init);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* keep the status text */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async createSession(file: Blob, name = "table.csv"): Promise<SessionCreated> {
    const form = new FormData();
    form.append("file", file, name);
    return this.request<SessionCreated>("/sessions", { method: "POST", body: form });
  }

  async query(sessionId: string, query: string): Promise<ResultView> {
    return this.request<ResultView>(`/sessions/${sessionId}/query`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ query }),
    });
  }

  async steps(sessionId: string, steps: string[]): Promise<ResultView> {
    return this.request<ResultView>(`/sessions/${sessionId}/steps`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ steps }),
    });
  }
}

import { ApiClient, ResultView, SessionCreated, TableView } from "../src/api.js";
import { App, createApp } from "../src/app.js";

export const PAGE = `
  <main>
    <section id="grid-area"><p id="drop-hint"></p><div id="grid"></div></section>
    <aside>
      <textarea id="query-box"></textarea>
      <button id="go-button"></button>
      <div id="failure-banner" hidden></div>
      <div id="result-pane"></div>
      <ol id="steps-list"></ol>
      <button id="add-step"></button>
      <button id="update-go"></button>
    </aside>
  </main>`;

export function table(columns: [string, string[], boolean?][]): TableView {
  return {
    name: "df",
    num_rows: columns[0]?.[1].length ?? 0,
    columns: columns.map(([name, cells, created]) => ({
      name,
      type: "text",
      created: created ?? false,
      cells,
    })),
  };
}

export function resultView(partial: Partial<ResultView> & { table: TableView }): ResultView {
  return {
    query_echo: "",
    steps: null,
    failure: null,
    message: null,
    output: null,
    created_columns: [],
    ...partial,
  };
}

export class StubApi extends ApiClient {
  created: SessionCreated;
  queries: string[] = [];
  stepPosts: string[][] = [];
  nextResult: ResultView;

  constructor(created: SessionCreated, first: ResultView) {
    super("stub://");
    this.created = created;
    this.nextResult = first;
  }

  override async createSession(): Promise<SessionCreated> {
    return this.created;
  }

  override async query(_id: string, query: string): Promise<ResultView> {
    this.queries.push(query);
    return this.nextResult;
  }

  override async steps(_id: string, steps: string[]): Promise<ResultView> {
    this.stepPosts.push(steps);
    return this.nextResult;
  }
}

export function mountApp(api: ApiClient): App {
  document.body.innerHTML = PAGE;
  return createApp(document, api);
}

// Table grid rendering; newly created columns get the green treatment.

import type { TableView } from "./api.js";

export function renderGrid(
  container: HTMLElement,
  table: TableView | null,
  highlights: ReadonlySet<string>,
): void {
  container.textContent = "";
  if (!table) return;
  const doc = container.ownerDocument;
  const el = doc.createElement("table");
  el.className = "grid";

  const head = doc.createElement("tr");
  for (const column of table.columns) {
    const th = doc.createElement("th");
    th.textContent = column.name;
    if (highlights.has(column.name)) th.classList.add("created");
    head.appendChild(th);
  }
  el.appendChild(head);

  for (let i = 0; i < table.num_rows; i++) {
    const row = doc.createElement("tr");
    for (const column of table.columns) {
      const td = doc.createElement("td");
      td.textContent = column.cells[i] ?? "";
      if (highlights.has(column.name)) td.classList.add("created");
      row.appendChild(td);
    }
    el.appendChild(row);
  }
  container.appendChild(el);
}

export function highlightedColumns(container: HTMLElement): string[] {
  return Array.from(container.querySelectorAll("th.created")).map(
    (th) => th.textContent ?? "",
  );
}

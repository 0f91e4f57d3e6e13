/** Element inspector: the full screen the element lives on, every element's
 * properties, and the "search for similar items" refinement action.
 */

import type { ResultCard } from "../api.js";
import { renderWireframe } from "../wireframe.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderNotFound(uid: string): HTMLElement {
  const root = el("section", "inspector-view not-found");
  root.appendChild(el("p", "", `No indexed element ${uid}.`));
  const back = el("button", "", "Back to results");
  back.dataset.action = "close-inspector";
  root.appendChild(back);
  return root;
}

export function renderInspectorView(card: ResultCard): HTMLElement {
  const root = el("section", "inspector-view");
  root.dataset.uid = card.uid;

  const bar = el("header", "inspector-bar");
  bar.appendChild(el("h2", "", card.uid));
  const similar = el("button", "similar-button", "Search for similar items");
  similar.dataset.action = "similar";
  similar.dataset.uid = card.uid;
  bar.appendChild(similar);
  const close = el("button", "", "Close");
  close.dataset.action = "close-inspector";
  bar.appendChild(close);
  root.appendChild(bar);

  root.appendChild(
    renderWireframe(card.screen, { highlight: new Set([card.element_id]) }),
  );

  // every element of the screen, selected row first
  const table = el("table", "element-table");
  const head = el("tr");
  for (const col of ["element", "category", "text", "bbox"]) {
    head.appendChild(el("th", "", col));
  }
  table.appendChild(head);
  const ordered = [...card.screen.elements].sort((a, b) =>
    (a.element_id === card.element_id ? 0 : 1) - (b.element_id === card.element_id ? 0 : 1),
  );
  for (const element of ordered) {
    const row = el("tr", element.element_id === card.element_id ? "selected" : "");
    row.appendChild(el("td", "", element.element_id));
    row.appendChild(el("td", "", element.category));
    row.appendChild(el("td", "", element.text ?? ""));
    row.appendChild(
      el("td", "bbox", element.bbox.map((v) => v.toFixed(3)).join(", ")),
    );
    table.appendChild(row);
  }
  root.appendChild(table);

  return root;
}

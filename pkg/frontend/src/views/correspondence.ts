/** Side-by-side correspondence viewer and annotation overlay preview.
 *
 * Renders exactly the pair set the service returned: matched elements get a
 * shared color class and a shared data-pair token (hover on either side
 * highlights both), unmatched elements render muted, and every score shown
 * is verbatim from the response.
 */

import type { CorrespondResponse, OverlayResponse, ScreenContext } from "../api.js";
import { renderWireframe } from "../wireframe.js";

export const PALETTE_SIZE = 12;

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

export function renderGateFailure(reason: string): HTMLElement {
  const root = el("div", "gate-failure");
  root.appendChild(el("p", "", `Declined: ${reason}`));
  return root;
}

export function renderCorrespondenceView(resp: CorrespondResponse): HTMLElement {
  const root = el("section", "correspondence-view");

  const header = el("header", "mapping-meta");
  header.appendChild(el("span", "", `${resp.source} ↔ ${resp.target}`));
  header.appendChild(el("span", "model-version", `model ${resp.model_version}`));
  root.appendChild(header);

  const classesA = new Map<string, string>();
  const classesB = new Map<string, string>();
  const tokensA = new Map<string, string>();
  const tokensB = new Map<string, string>();
  resp.pairs.forEach((pair, i) => {
    const color = `pair-c${i % PALETTE_SIZE}`;
    classesA.set(pair.a, color);
    classesB.set(pair.b, color);
    tokensA.set(pair.a, String(i));
    tokensB.set(pair.b, String(i));
  });
  const mutedA = new Set(
    resp.screens.a.elements.map((e) => e.element_id).filter((id) => !classesA.has(id)),
  );
  const mutedB = new Set(
    resp.screens.b.elements.map((e) => e.element_id).filter((id) => !classesB.has(id)),
  );

  const panes = el("div", "pane-pair");
  const left = el("div", "pane");
  left.appendChild(el("h3", "", resp.screens.a.screen_id));
  left.appendChild(
    renderWireframe(resp.screens.a, { classes: classesA, pairTokens: tokensA, muted: mutedA }),
  );
  const right = el("div", "pane");
  right.appendChild(el("h3", "", resp.screens.b.screen_id));
  right.appendChild(
    renderWireframe(resp.screens.b, { classes: classesB, pairTokens: tokensB, muted: mutedB }),
  );
  panes.appendChild(left);
  panes.appendChild(right);
  root.appendChild(panes);

  if (resp.pairs.length === 0) {
    root.appendChild(el("div", "empty-state", "No corresponding elements."));
    return root;
  }

  const table = el("table", "pair-table");
  const head = el("tr");
  for (const col of ["source", "target", "score"]) head.appendChild(el("th", "", col));
  table.appendChild(head);
  resp.pairs.forEach((pair, i) => {
    const row = el("tr", `pair-c${i % PALETTE_SIZE}`);
    row.dataset.pair = String(i);
    row.appendChild(el("td", "", pair.a));
    row.appendChild(el("td", "", pair.b));
    row.appendChild(el("td", "score", pair.score.toFixed(4)));
    table.appendChild(row);
  });
  root.appendChild(table);

  return root;
}

/** Hover linking: entering any node with data-pair highlights every node
 * carrying the same token (its partner and its table row). */
export function wirePairHover(root: HTMLElement): void {
  const tokenOf = (target: EventTarget | null): string | null => {
    if (!(target instanceof Element)) return null;
    const holder = target.closest("[data-pair]");
    return holder instanceof Element ? holder.getAttribute("data-pair") : null;
  };
  root.addEventListener("mouseover", (event) => {
    const token = tokenOf(event.target);
    if (token === null) return;
    for (const node of root.querySelectorAll(`[data-pair="${token}"]`)) {
      node.classList.add("hover");
    }
  });
  root.addEventListener("mouseout", (event) => {
    const token = tokenOf(event.target);
    if (token === null) return;
    for (const node of root.querySelectorAll(`[data-pair="${token}"]`)) {
      node.classList.remove("hover");
    }
  });
}

export function renderOverlayPreview(
  target: ScreenContext,
  resp: OverlayResponse,
): HTMLElement {
  const root = el("section", "overlay-view");

  if (resp.reason !== null) {
    root.appendChild(renderGateFailure(resp.reason));
    if (resp.screen_distance !== null) {
      root.appendChild(
        el("p", "screen-distance", `screen distance ${resp.screen_distance.toFixed(4)}`),
      );
    }
    return root;
  }

  const header = el("header", "mapping-meta");
  header.appendChild(
    el("span", "", `annotations from ${resp.source_screen_id ?? "?"} onto ${resp.target_screen_id}`),
  );
  root.appendChild(header);

  root.appendChild(
    renderWireframe(target, {
      callouts: resp.items.map((item) => ({ bbox: item.bbox, label: item.instruction })),
    }),
  );

  const list = el("ul", "overlay-items");
  for (const item of resp.items) {
    const entry = el("li");
    entry.appendChild(el("span", "instruction", item.instruction));
    entry.appendChild(
      el("span", "provenance",
         ` ${item.source_screen_id}/${item.source_element_id} → ${item.target_element_id}` +
         ` (score ${item.score.toFixed(4)})`),
    );
    list.appendChild(entry);
  }
  root.appendChild(list);

  return root;
}

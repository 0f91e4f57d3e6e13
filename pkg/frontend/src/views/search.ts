/** Search results view: one card per matching element, drawn as a wireframe
 * with the hit outlined. Pagination slices the returned result list
 * deterministically, so the same response and page always render the same
 * cards.
 */

import type { ResultCard } from "../api.js";
import { PAGE_SIZE, type SearchState } from "../state.js";
import { renderWireframe } from "../wireframe.js";

export interface ResultsData {
  results: ResultCard[];
  total: number;
  /** uid of the exemplar when these came from /similar, else null */
  exemplar: string | null;
}

export function pageCount(total: number): number {
  return Math.max(1, Math.ceil(total / PAGE_SIZE));
}

export function pageSlice<T>(items: readonly T[], page: number): T[] {
  return items.slice(page * PAGE_SIZE, (page + 1) * PAGE_SIZE);
}

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

export function renderEmptyQueryHint(): HTMLElement {
  const hint = el("div", "hint empty-query", "Enter tags or text to search.");
  return hint;
}

export function renderServiceDown(detail: string): HTMLElement {
  const banner = el("div", "banner service-down");
  banner.appendChild(el("span", "", `Service unreachable: ${detail}`));
  const retry = el("button", "", "Retry");
  retry.dataset.action = "retry";
  banner.appendChild(retry);
  return banner;
}

export function renderSearchView(state: SearchState, data: ResultsData): HTMLElement {
  const root = el("section", "search-view");

  if (data.exemplar !== null) {
    const crumb = el("div", "refinement-crumb");
    crumb.appendChild(
      el("span", "", `Similar to ${data.exemplar} (depth ${state.refinements.length})`),
    );
    const back = el("button", "", "Back");
    back.dataset.action = "back";
    crumb.appendChild(back);
    root.appendChild(crumb);
  }

  if (data.results.length === 0) {
    root.appendChild(el("div", "empty-state", "No matching elements."));
    return root;
  }

  const list = el("div", "result-grid");
  for (const card of pageSlice(data.results, state.page)) {
    list.appendChild(renderResultCard(card));
  }
  root.appendChild(list);

  const pages = pageCount(data.results.length);
  const pager = el("nav", "pager");
  const prev = el("button", "", "Prev");
  prev.dataset.action = "page-prev";
  if (state.page === 0) prev.disabled = true;
  const next = el("button", "", "Next");
  next.dataset.action = "page-next";
  if (state.page >= pages - 1) next.disabled = true;
  pager.appendChild(prev);
  pager.appendChild(el("span", "page-label", `page ${state.page + 1} / ${pages}`));
  pager.appendChild(next);
  root.appendChild(pager);

  return root;
}

function renderResultCard(card: ResultCard): HTMLElement {
  const node = el("article", "result-card");
  node.dataset.uid = card.uid;
  node.dataset.action = "inspect";

  node.appendChild(
    renderWireframe(card.screen, { highlight: new Set([card.element_id]) }),
  );

  const meta = el("div", "card-meta");
  meta.appendChild(el("div", "card-uid", card.uid));
  if (card.score !== null) {
    meta.appendChild(el("div", "card-score", `score ${card.score.toFixed(4)}`));
  }
  if (card.text) meta.appendChild(el("div", "card-text", JSON.stringify(card.text)));
  if (card.tags.length > 0) {
    const tags = el("div", "card-tags");
    for (const tag of card.tags) tags.appendChild(el("span", "tag", tag));
    meta.appendChild(tags);
  }
  node.appendChild(meta);
  return node;
}

/** Imperative shell: owns the SearchState, talks to the service, and mounts
 * the pure view functions into the page. URL fragment and state stay in
 * sync both ways, so reload reproduces the session.
 */

import {
  ApiClient,
  ApiError,
  documentToContext,
  type ResultCard,
  type ScreenDocument,
} from "./api.js";
import { RequestGate } from "./seq.js";
import {
  activeExemplar,
  decodeState,
  emptyQuery,
  encodeState,
  initialState,
  popRefinement,
  pushRefinement,
  withPage,
  withQuery,
  withSelection,
  type SearchState,
} from "./state.js";
import {
  renderGateFailure,
  renderCorrespondenceView,
  renderOverlayPreview,
  wirePairHover,
} from "./views/correspondence.js";
import { renderInspectorView, renderNotFound } from "./views/inspector.js";
import {
  renderEmptyQueryHint,
  renderSearchView,
  renderServiceDown,
  type ResultsData,
} from "./views/search.js";

type Tab = "search" | "correspond" | "overlay";
const TABS: Tab[] = ["search", "correspond", "overlay"];

export class App {
  state: SearchState = initialState();
  tab: Tab = "search";
  lastResults: ResultsData | null = null;
  private readonly gate = new RequestGate();
  private suppressHash = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  start(): void {
    this.readHash();
    window.addEventListener("hashchange", () => {
      if (this.suppressHash) return;
      this.readHash();
      void this.dispatch();
    });
    this.root.addEventListener("click", (event) => this.onClick(event));
    this.root.addEventListener("submit", (event) => this.onSubmit(event));
    this.renderShell();
    void this.dispatch();
  }

  private readHash(): void {
    const params = new URLSearchParams(window.location.hash.replace(/^#/, ""));
    const tab = params.get("view");
    this.tab = TABS.includes(tab as Tab) ? (tab as Tab) : "search";
    this.state = decodeState(window.location.hash);
  }

  private syncHash(): void {
    const fragment = new URLSearchParams(encodeState(this.state));
    if (this.tab !== "search") fragment.set("view", this.tab);
    this.suppressHash = true;
    window.location.hash = fragment.toString();
    // let the hashchange event fire before re-enabling
    setTimeout(() => {
      this.suppressHash = false;
    }, 0);
  }

  private setState(next: SearchState): void {
    this.state = next;
    this.syncHash();
  }

  // --- rendering --------------------------------------------------------

  private renderShell(): void {
    this.root.textContent = "";
    const nav = document.createElement("nav");
    nav.className = "tabs";
    for (const tab of TABS) {
      const button = document.createElement("button");
      button.textContent = tab;
      button.dataset.action = "tab";
      button.dataset.tab = tab;
      if (tab === this.tab) button.classList.add("active");
      nav.appendChild(button);
    }
    this.root.appendChild(nav);

    const form = this.renderForm();
    this.root.appendChild(form);

    const content = document.createElement("main");
    content.id = "content";
    this.root.appendChild(content);
  }

  private renderForm(): HTMLElement {
    const form = document.createElement("form");
    form.id = "controls";
    if (this.tab === "search") {
      form.innerHTML = `
        <input name="tags" placeholder="tags (comma separated)" value="${escapeAttr(this.state.query.tags.join(","))}">
        <input name="text" placeholder="text contains" value="${escapeAttr(this.state.query.text ?? "")}">
        <button type="submit">Search</button>`;
    } else if (this.tab === "correspond") {
      form.innerHTML = `
        <input name="screen_a" placeholder="screen_a id or JSON document">
        <input name="screen_b" placeholder="screen_b id or JSON document">
        <label><input type="checkbox" name="heuristic"> heuristic</label>
        <button type="submit">Correspond</button>`;
    } else {
      form.innerHTML = `
        <textarea name="screen" rows="6" placeholder="target screen JSON document"></textarea>
        <button type="submit">Preview overlay</button>`;
    }
    return form;
  }

  private content(): HTMLElement {
    return this.root.querySelector("#content") as HTMLElement;
  }

  private show(node: HTMLElement): void {
    const content = this.content();
    content.textContent = "";
    content.appendChild(node);
  }

  // --- search flow --------------------------------------------------------

  async dispatch(): Promise<void> {
    if (this.tab !== "search") return;
    const exemplar = activeExemplar(this.state);
    if (exemplar === null && emptyQuery(this.state.query)) {
      this.lastResults = null;
      this.show(renderEmptyQueryHint());
      return;
    }
    const ticket = this.gate.issue();
    try {
      const data: ResultsData =
        exemplar !== null
          ? toResults(await this.api.similar(exemplar), exemplar)
          : toResults(
              await this.api.search(this.state.query.tags, this.state.query.text),
              null,
            );
      if (!this.gate.current(ticket)) return;
      this.lastResults = data;
      this.renderResults();
    } catch (error) {
      if (!this.gate.current(ticket)) return;
      this.showError(error);
    }
  }

  private renderResults(): void {
    if (this.lastResults === null) return;
    const selected = this.state.selected;
    if (selected !== null) {
      const card = this.lastResults.results.find((r) => r.uid === selected);
      this.show(card ? renderInspectorView(card) : renderNotFound(selected));
      return;
    }
    this.show(renderSearchView(this.state, this.lastResults));
  }

  private showError(error: unknown): void {
    if (error instanceof ApiError && error.status === 0) {
      this.show(renderServiceDown(error.reason));
    } else if (error instanceof ApiError && error.status === 404) {
      this.show(renderNotFound(activeExemplar(this.state) ?? "?"));
    } else if (error instanceof ApiError) {
      this.show(renderGateFailure(error.reason));
    } else {
      this.show(renderGateFailure(String(error)));
    }
  }

  // --- events -------------------------------------------------------------

  private onClick(event: MouseEvent): void {
    const target = event.target;
    if (!(target instanceof Element)) return;
    const holder = target.closest("[data-action]");
    if (!(holder instanceof HTMLElement)) return;
    const action = holder.dataset.action;
    if (action === "tab") {
      this.tab = holder.dataset.tab as Tab;
      this.syncHash();
      this.renderShell();
      void this.dispatch();
    } else if (action === "inspect") {
      this.setState(withSelection(this.state, holder.dataset.uid ?? null));
      this.renderResults();
    } else if (action === "close-inspector") {
      this.setState(withSelection(this.state, null));
      this.renderResults();
    } else if (action === "similar") {
      const uid = holder.dataset.uid;
      if (uid) {
        this.setState(pushRefinement(this.state, uid));
        void this.dispatch();
      }
    } else if (action === "back") {
      this.setState(popRefinement(this.state));
      void this.dispatch();
    } else if (action === "page-prev") {
      this.setState(withPage(this.state, this.state.page - 1));
      this.renderResults();
    } else if (action === "page-next") {
      this.setState(withPage(this.state, this.state.page + 1));
      this.renderResults();
    } else if (action === "retry") {
      void this.dispatch();
    }
  }

  private onSubmit(event: Event): void {
    event.preventDefault();
    const form = event.target;
    if (!(form instanceof HTMLFormElement)) return;
    const data = new FormData(form);
    if (this.tab === "search") {
      const tags = String(data.get("tags") ?? "")
        .split(",")
        .map((t) => t.trim())
        .filter((t) => t.length > 0);
      const text = String(data.get("text") ?? "");
      this.setState(withQuery(this.state, { tags, text: text || null }));
      void this.dispatch();
    } else if (this.tab === "correspond") {
      void this.runCorrespond(
        String(data.get("screen_a") ?? ""),
        String(data.get("screen_b") ?? ""),
        data.get("heuristic") !== null,
      );
    } else {
      void this.runOverlay(String(data.get("screen") ?? ""));
    }
  }

  private async runCorrespond(rawA: string, rawB: string, heuristic: boolean): Promise<void> {
    const ticket = this.gate.issue();
    try {
      const resp = await this.api.correspond(
        parseRef(rawA),
        parseRef(rawB),
        heuristic ? { heuristic: true } : undefined,
      );
      if (!this.gate.current(ticket)) return;
      const view = renderCorrespondenceView(resp);
      wirePairHover(view);
      this.show(view);
    } catch (error) {
      if (!this.gate.current(ticket)) return;
      this.showError(error);
    }
  }

  private async runOverlay(raw: string): Promise<void> {
    let doc: ScreenDocument;
    try {
      doc = JSON.parse(raw) as ScreenDocument;
    } catch {
      this.show(renderGateFailure("target must be a JSON screen document"));
      return;
    }
    const ticket = this.gate.issue();
    try {
      const resp = await this.api.overlay(doc);
      if (!this.gate.current(ticket)) return;
      this.show(renderOverlayPreview(documentToContext(doc), resp));
    } catch (error) {
      if (!this.gate.current(ticket)) return;
      if (error instanceof ApiError && error.status === 422 && isOverlayBody(error.body)) {
        // gate refusals carry the full spec document; render it as the preview
        this.show(renderOverlayPreview(documentToContext(doc), error.body));
      } else {
        this.showError(error);
      }
    }
  }
}

function toResults(
  resp: { results: ResultCard[]; total: number },
  exemplar: string | null,
): ResultsData {
  return { results: resp.results, total: resp.total, exemplar };
}

function parseRef(raw: string): string | ScreenDocument {
  const trimmed = raw.trim();
  if (trimmed.startsWith("{")) return JSON.parse(trimmed) as ScreenDocument;
  return trimmed;
}

function isOverlayBody(body: unknown): body is import("./api.js").OverlayResponse {
  return (
    typeof body === "object" &&
    body !== null &&
    "items" in body &&
    "reason" in body
  );
}

function escapeAttr(value: string): string {
  return value.replace(/&/g, "&amp;").replace(/"/g, "&quot;").replace(/</g, "&lt;");
}

/** Client-side search state and its URL serialization.
 *
 * Views are pure functions of (SearchState, last service response), so the
 * whole session is reproducible from the URL fragment. The refinement
 * history is a stack of exemplar element uids: it grows only through
 * "search for similar items" and shrinks only through back-navigation.
 */

export interface Query {
  tags: string[];
  text: string | null;
}

export interface SearchState {
  query: Query;
  page: number;
  selected: string | null;
  refinements: string[];
}

export const PAGE_SIZE = 8;

export function initialState(): SearchState {
  return { query: { tags: [], text: null }, page: 0, selected: null, refinements: [] };
}

export function emptyQuery(query: Query): boolean {
  return query.tags.length === 0 && (query.text === null || query.text.trim() === "");
}

/** A new query starts a fresh session: page, selection and history reset. */
export function withQuery(state: SearchState, query: Query): SearchState {
  return { query: normalizeQuery(query), page: 0, selected: null, refinements: [] };
}

export function withPage(state: SearchState, page: number): SearchState {
  return { ...state, page: Math.max(0, Math.floor(page)) };
}

export function withSelection(state: SearchState, uid: string | null): SearchState {
  return { ...state, selected: uid };
}

/** The only transition that grows the refinement stack. */
export function pushRefinement(state: SearchState, exemplarUid: string): SearchState {
  return {
    ...state,
    page: 0,
    selected: null,
    refinements: [...state.refinements, exemplarUid],
  };
}

/** Back-navigation: pop the most recent refinement. No-op on an empty stack. */
export function popRefinement(state: SearchState): SearchState {
  if (state.refinements.length === 0) return state;
  return {
    ...state,
    page: 0,
    selected: null,
    refinements: state.refinements.slice(0, -1),
  };
}

/** The exemplar whose /similar results are currently shown, if any. */
export function activeExemplar(state: SearchState): string | null {
  return state.refinements.length > 0
    ? state.refinements[state.refinements.length - 1]!
    : null;
}

function normalizeQuery(query: Query): Query {
  const tags = query.tags.map((t) => t.trim()).filter((t) => t.length > 0);
  const text = query.text && query.text.trim() !== "" ? query.text.trim() : null;
  return { tags, text };
}

// Fragment keys. Uids may contain "::", which URLSearchParams escapes fine;
// the refinement stack is joined with "|" (not a legal uid character).
const REF_SEP = "|";

export function encodeState(state: SearchState): string {
  const params = new URLSearchParams();
  if (state.query.tags.length > 0) params.set("tags", state.query.tags.join(","));
  if (state.query.text !== null) params.set("text", state.query.text);
  if (state.page > 0) params.set("page", String(state.page));
  if (state.selected !== null) params.set("sel", state.selected);
  if (state.refinements.length > 0) params.set("ref", state.refinements.join(REF_SEP));
  return params.toString();
}

export function decodeState(fragment: string): SearchState {
  const params = new URLSearchParams(fragment.replace(/^#/, ""));
  const tags = (params.get("tags") ?? "")
    .split(",")
    .map((t) => t.trim())
    .filter((t) => t.length > 0);
  const text = params.get("text");
  const page = Number.parseInt(params.get("page") ?? "0", 10);
  const ref = params.get("ref");
  return {
    query: { tags, text: text === null || text === "" ? null : text },
    page: Number.isFinite(page) && page > 0 ? page : 0,
    selected: params.get("sel"),
    refinements: ref === null || ref === "" ? [] : ref.split(REF_SEP),
  };
}

/** Typed client for the screenmatch service HTTP API.
 *
 * Every score and pair the UI shows comes verbatim from these responses;
 * nothing here recomputes similarity.
 */

export interface ElementSummary {
  element_id: string;
  bbox: [number, number, number, number];
  category: string;
  text: string | null;
}

export interface ScreenContext {
  screen_id: string;
  screen_category: string;
  width_px: number;
  height_px: number;
  elements: ElementSummary[];
}

export interface ResultCard {
  uid: string;
  element_id: string;
  screen_id: string;
  tags: string[];
  text: string | null;
  bounds: [number, number, number, number];
  score: number | null;
  screen: ScreenContext;
}

export interface SearchResponse {
  query: { tags: string[]; text: string | null; k: number };
  total: number;
  results: ResultCard[];
}

export interface SimilarResponse {
  exemplar: string;
  total: number;
  results: ResultCard[];
}

export interface CorrespondPair {
  a: string;
  b: string;
  score: number;
}

export interface CorrespondResponse {
  source: string;
  target: string;
  params: Record<string, unknown>;
  model_version: string;
  pairs: CorrespondPair[];
  screens: { a: ScreenContext; b: ScreenContext };
}

export interface OverlayItem {
  bbox: [number, number, number, number];
  instruction: string;
  score: number;
  source_screen_id: string;
  source_element_id: string;
  target_element_id: string;
}

export interface OverlayResponse {
  target_screen_id: string;
  source_screen_id: string | null;
  screen_distance: number | null;
  items: OverlayItem[];
  reason: string | null;
}

/** Screen document as accepted by /v1/correspond and /v1/overlay inline. */
export type ScreenDocument = Record<string, unknown>;

/** Local wireframe context for a raw screen document (e.g. the overlay
 * target the user pasted, before the service has seen it). Handles both
 * normalized and pixel coordinate modes. */
export function documentToContext(doc: ScreenDocument): ScreenContext {
  const width = Number(doc.width_px ?? 0);
  const height = Number(doc.height_px ?? 0);
  const pixel = doc.coords === "pixel";
  const rawElements = Array.isArray(doc.elements) ? doc.elements : [];
  const elements: ElementSummary[] = rawElements.map((raw: Record<string, unknown>, i) => {
    const bbox = (Array.isArray(raw.bbox) ? raw.bbox : [0, 0, 0, 0]).map(Number);
    const [x1 = 0, y1 = 0, x2 = 0, y2 = 0] = bbox;
    return {
      element_id: String(raw.element_id ?? `element-${i}`),
      bbox: pixel && width > 0 && height > 0
        ? [x1 / width, y1 / height, x2 / width, y2 / height]
        : [x1, y1, x2, y2],
      category: String(raw.category ?? "unknown"),
      text: raw.text === undefined || raw.text === null ? null : String(raw.text),
    };
  });
  return {
    screen_id: String(doc.screen_id ?? "unnamed"),
    screen_category: String(doc.screen_category ?? ""),
    width_px: width,
    height_px: height,
    elements,
  };
}

export interface MatchParamsBody {
  k?: number;
  c?: number;
  assignment?: string;
  heuristic?: boolean;
}

/** status 0 means the service was unreachable (no HTTP response at all). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly reason: string,
    readonly body: unknown = null,
  ) {
    super(`${status || "network"}: ${reason}`);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  async search(tags: string[], text: string | null, k = 50): Promise<SearchResponse> {
    const params = new URLSearchParams();
    if (tags.length > 0) params.set("tags", tags.join(","));
    if (text) params.set("text", text);
    params.set("k", String(k));
    return this.request(`/v1/search?${params}`);
  }

  async similar(uid: string, k = 50): Promise<SimilarResponse> {
    const params = new URLSearchParams({ k: String(k) });
    return this.request(`/v1/elements/${encodeURIComponent(uid)}/similar?${params}`);
  }

  async correspond(
    screenA: string | ScreenDocument,
    screenB: string | ScreenDocument,
    params?: MatchParamsBody,
  ): Promise<CorrespondResponse> {
    const body: Record<string, unknown> = { screen_a: screenA, screen_b: screenB };
    if (params) body.params = params;
    return this.request("/v1/correspond", body);
  }

  async overlay(screen: ScreenDocument, params?: MatchParamsBody): Promise<OverlayResponse> {
    const body: Record<string, unknown> = { screen };
    if (params) body.params = params;
    return this.request("/v1/overlay", body);
  }

  private async request<T>(path: string, body?: Record<string, unknown>): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, body === undefined
        ? undefined
        : {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
          });
    } catch {
      throw new ApiError(0, "service unreachable");
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      // non-JSON body; keep payload null
    }
    if (!response.ok) {
      const reason =
        payload && typeof payload === "object" && "reason" in payload
          ? String((payload as { reason: unknown }).reason)
          : response.statusText;
      throw new ApiError(response.status, reason, payload);
    }
    return payload as T;
  }
}

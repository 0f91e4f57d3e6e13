/** Wireframe rendering: a screen document drawn from its bounding boxes and
 * category glyphs, so a corpus without raster screenshots is still fully
 * browsable. Coordinates are normalized [0,1]^2; the SVG canvas is a
 * portrait 100x160 viewBox.
 */

import type { ScreenContext } from "./api.js";

export const VIEW_W = 100;
export const VIEW_H = 160;

const SVG_NS = "http://www.w3.org/2000/svg";

const GLYPHS: Record<string, string> = {
  button: "BTN",
  text: "TXT",
  text_field: "INP",
  icon: "ICO",
  picture: "IMG",
  checkbox: "CHK",
  toggle: "TGL",
  slider: "SLD",
  container: "BOX",
  dialog: "DLG",
  segmented_control: "SEG",
  page_control: "DOT",
};

export function glyphFor(category: string): string {
  return GLYPHS[category] ?? category.slice(0, 3).toUpperCase();
}

export interface Callout {
  bbox: [number, number, number, number];
  label: string;
}

export interface WireframeOptions {
  /** element ids outlined as search hits */
  highlight?: ReadonlySet<string>;
  /** element ids rendered dimmed (e.g. unmatched in a correspondence) */
  muted?: ReadonlySet<string>;
  /** element id -> extra class (correspondence pair colors) */
  classes?: ReadonlyMap<string, string>;
  /** element id -> data-pair token for hover linking */
  pairTokens?: ReadonlyMap<string, string>;
  /** annotation callouts drawn on top (overlay preview) */
  callouts?: readonly Callout[];
}

function rect(
  bbox: readonly [number, number, number, number],
): { x: number; y: number; w: number; h: number } {
  const [x1, y1, x2, y2] = bbox;
  return {
    x: x1 * VIEW_W,
    y: y1 * VIEW_H,
    w: Math.max(0, (x2 - x1) * VIEW_W),
    h: Math.max(0, (y2 - y1) * VIEW_H),
  };
}

export function renderWireframe(
  screen: ScreenContext,
  options: WireframeOptions = {},
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${VIEW_W} ${VIEW_H}`);
  svg.classList.add("wireframe");
  svg.dataset.screenId = screen.screen_id;

  const frame = document.createElementNS(SVG_NS, "rect");
  frame.setAttribute("x", "0");
  frame.setAttribute("y", "0");
  frame.setAttribute("width", String(VIEW_W));
  frame.setAttribute("height", String(VIEW_H));
  frame.classList.add("screen-frame");
  svg.appendChild(frame);

  for (const el of screen.elements) {
    const { x, y, w, h } = rect(el.bbox);
    const group = document.createElementNS(SVG_NS, "g");
    group.classList.add("element");
    group.dataset.elementId = el.element_id;
    if (options.highlight?.has(el.element_id)) group.classList.add("hl");
    if (options.muted?.has(el.element_id)) group.classList.add("muted");
    const extra = options.classes?.get(el.element_id);
    if (extra) group.classList.add(extra);
    const token = options.pairTokens?.get(el.element_id);
    if (token !== undefined) group.dataset.pair = token;

    const box = document.createElementNS(SVG_NS, "rect");
    box.setAttribute("x", x.toFixed(2));
    box.setAttribute("y", y.toFixed(2));
    box.setAttribute("width", w.toFixed(2));
    box.setAttribute("height", h.toFixed(2));
    group.appendChild(box);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", (x + w / 2).toFixed(2));
    label.setAttribute("y", (y + h / 2).toFixed(2));
    label.textContent = el.text !== null && el.text !== ""
      ? truncate(el.text, 14)
      : glyphFor(el.category);
    group.appendChild(label);

    const tooltip = document.createElementNS(SVG_NS, "title");
    tooltip.textContent = `${el.element_id} (${el.category})`;
    group.appendChild(tooltip);

    svg.appendChild(group);
  }

  for (const callout of options.callouts ?? []) {
    const { x, y, w, h } = rect(callout.bbox);
    const group = document.createElementNS(SVG_NS, "g");
    group.classList.add("callout");

    const box = document.createElementNS(SVG_NS, "rect");
    box.setAttribute("x", x.toFixed(2));
    box.setAttribute("y", y.toFixed(2));
    box.setAttribute("width", w.toFixed(2));
    box.setAttribute("height", h.toFixed(2));
    group.appendChild(box);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", (x + w / 2).toFixed(2));
    label.setAttribute("y", Math.max(3, y - 1.5).toFixed(2));
    label.textContent = truncate(callout.label, 24);
    group.appendChild(label);

    svg.appendChild(group);
  }

  return svg;
}

function truncate(text: string, max: number): string {
  return text.length <= max ? text : text.slice(0, max - 1) + "…";
}

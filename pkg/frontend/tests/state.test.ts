import { describe, expect, it } from "vitest";

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
} from "../src/state.js";

describe("query transitions", () => {
  it("starts empty", () => {
    const state = initialState();
    expect(emptyQuery(state.query)).toBe(true);
    expect(state.refinements).toEqual([]);
    expect(activeExemplar(state)).toBeNull();
  });

  it("normalizes tags and blank text", () => {
    const state = withQuery(initialState(), {
      tags: [" icon ", "", "button"],
      text: "   ",
    });
    expect(state.query).toEqual({ tags: ["icon", "button"], text: null });
  });

  it("a new query resets page, selection and history", () => {
    let state = withQuery(initialState(), { tags: ["icon"], text: null });
    state = withPage(state, 3);
    state = withSelection(state, "s::e");
    state = pushRefinement(state, "s::e");
    state = withQuery(state, { tags: [], text: "password" });
    expect(state.page).toBe(0);
    expect(state.selected).toBeNull();
    expect(state.refinements).toEqual([]);
  });

  it("clamps pages at zero", () => {
    expect(withPage(initialState(), -2).page).toBe(0);
    expect(withPage(initialState(), 2.9).page).toBe(2);
  });
});

describe("refinement stack", () => {
  it("grows only through pushRefinement and pops via back", () => {
    let state = withQuery(initialState(), { tags: ["button"], text: null });
    state = pushRefinement(state, "a::x");
    state = pushRefinement(state, "b::y");
    expect(state.refinements).toEqual(["a::x", "b::y"]);
    expect(activeExemplar(state)).toBe("b::y");

    state = popRefinement(state);
    expect(state.refinements).toEqual(["a::x"]);
    state = popRefinement(state);
    expect(state.refinements).toEqual([]);
    // popping an empty stack is a no-op, not an error
    expect(popRefinement(state)).toEqual(state);
  });

  it("resets the page on push and pop", () => {
    let state = withPage(initialState(), 4);
    state = pushRefinement(state, "a::x");
    expect(state.page).toBe(0);
    state = withPage(state, 2);
    state = popRefinement(state);
    expect(state.page).toBe(0);
  });
});

describe("URL round trip", () => {
  // minimal LCG so the property loop is reproducible without a dependency
  let seed = 20260815;
  const rand = () => {
    seed = (seed * 1103515245 + 12345) % 2147483648;
    return seed / 2147483648;
  };
  const pick = <T>(items: T[]): T => items[Math.floor(rand() * items.length)]!;
  const uid = () => `${pick(["login-0", "popup_3", "a-b"])}::${pick(["ok_btn", "title_text", "e-7"])}`;

  it("encode/decode is the identity on random states", () => {
    for (let i = 0; i < 200; i++) {
      const tags = Array.from({ length: Math.floor(rand() * 3) }, () =>
        pick(["icon:add", "button", "text_field", "k-9"]),
      );
      const state: SearchState = {
        query: {
          tags,
          text: rand() < 0.5 ? null : pick(["password", "a&b=c#d", "Email or username", "??"]),
        },
        page: Math.floor(rand() * 5),
        selected: rand() < 0.5 ? null : uid(),
        refinements: Array.from({ length: Math.floor(rand() * 4) }, uid),
      };
      expect(decodeState(encodeState(state))).toEqual(state);
    }
  });

  it("tolerates garbage fragments", () => {
    expect(decodeState("")).toEqual(initialState());
    expect(decodeState("#")).toEqual(initialState());
    expect(decodeState("#page=-4&text=")).toEqual(initialState());
    expect(decodeState("page=notanumber&bogus=1")).toEqual(initialState());
  });

  it("keeps a leading # optional", () => {
    const state = withQuery(initialState(), { tags: ["icon"], text: "hi" });
    expect(decodeState("#" + encodeState(state))).toEqual(state);
  });
});

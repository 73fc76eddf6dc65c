import { describe, expect, it } from "vitest";

import { SpanEditor, snapToTokens, validateSpans } from "../src/model.js";
import { ENTITY_TYPES, type ProposedSpan, type Token } from "../src/types.js";

/** Tokens the way the server builds them: whitespace-separated words. */
function tokensFor(words: string[]): { text: string; tokens: Token[] } {
  const tokens: Token[] = [];
  let cursor = 0;
  const parts: string[] = [];
  for (const word of words) {
    tokens.push({ text: word, start: cursor, end: cursor + word.length });
    parts.push(word);
    cursor += word.length + 1;
  }
  return { text: parts.join(" "), tokens };
}

describe("snapToTokens", () => {
  const { tokens } = tokensFor(["Python", "and", "C++"]);

  it("snaps a partial selection outward to the token", () => {
    expect(snapToTokens(tokens, 1, 4)).toEqual({ start: 0, end: 6 });
  });

  it("keeps an aligned selection unchanged", () => {
    expect(snapToTokens(tokens, 7, 10)).toEqual({ start: 7, end: 10 });
  });

  it("spans multiple tokens", () => {
    expect(snapToTokens(tokens, 4, 12)).toEqual({ start: 0, end: 14 });
  });

  it("returns null for whitespace-only selections", () => {
    expect(snapToTokens(tokens, 6, 7)).toBeNull();
  });

  it("treats a click as selecting the token under the caret", () => {
    expect(snapToTokens(tokens, 8, 8)).toEqual({ start: 7, end: 10 });
  });

  it("normalizes backwards drags", () => {
    expect(snapToTokens(tokens, 10, 7)).toEqual({ start: 7, end: 10 });
  });
});

describe("validateSpans mirrors the server rules", () => {
  it("flags out-of-bounds ends", () => {
    const violations = validateSpans([{ start: 0, end: 99, type: "SKILL" }], 10);
    expect(violations.map((v) => v.code)).toEqual(["SPAN_OUT_OF_BOUNDS"]);
  });

  it("flags overlaps", () => {
    const violations = validateSpans(
      [
        { start: 0, end: 6, type: "SKILL" },
        { start: 4, end: 9, type: "CITY" },
      ],
      20,
    );
    expect(violations.map((v) => v.code)).toEqual(["SPAN_OVERLAP"]);
  });

  it("accepts touching spans", () => {
    const violations = validateSpans(
      [
        { start: 0, end: 6, type: "SKILL" },
        { start: 6, end: 9, type: "CITY" },
      ],
      20,
    );
    expect(violations).toEqual([]);
  });
});

describe("SpanEditor operations", () => {
  function editor(): SpanEditor {
    const { text, tokens } = tokensFor(["Uses", "Python", "in", "Berlin", "since", "2019"]);
    const proposals: ProposedSpan[] = [
      { start: 5, end: 11, type: "SKILL", provenance: "SEED" },
      { start: 15, end: 21, type: "CITY", provenance: "SEED" },
    ];
    return new SpanEditor(text.length, tokens, proposals);
  }

  it("accept-all copies the proposals", () => {
    const e = editor();
    e.acceptAll();
    expect(e.working).toEqual([
      { start: 5, end: 11, type: "SKILL" },
      { start: 15, end: 21, type: "CITY" },
    ]);
    expect(e.canSubmit()).toBe(true);
  });

  it("add snaps and rejects overlaps", () => {
    const e = editor();
    e.acceptAll();
    expect(e.add(29, 31, "DATE")).toEqual({ ok: true }); // snaps to "2019"
    expect(e.working.some((s) => s.start === 28 && s.end === 32)).toBe(true);
    const clash = e.add(6, 9, "DATE"); // inside the SKILL span
    expect(clash.ok).toBe(false);
  });

  it("retype and rebound keep the set valid", () => {
    const e = editor();
    e.acceptAll();
    expect(e.retype(0, "JOB_TITLE")).toEqual({ ok: true });
    expect(e.working[0]!.type).toBe("JOB_TITLE");
    expect(e.rebound(0, 0, 7).ok).toBe(true); // grows to "Uses Python"
    expect(e.working[0]).toMatchObject({ start: 0, end: 11 });
    expect(e.rebound(0, 16, 20).ok).toBe(false); // would collide with CITY
    expect(e.violations()).toEqual([]);
  });

  it("remove deletes by index", () => {
    const e = editor();
    e.acceptAll();
    expect(e.remove(0)).toEqual({ ok: true });
    expect(e.working).toHaveLength(1);
    expect(e.remove(7).ok).toBe(false);
  });
});

describe("editor fuzz: the working set never violates the server rules", () => {
  // deterministic LCG so failures reproduce
  function rng(seed: number): () => number {
    let state = seed >>> 0;
    return () => {
      state = (state * 1664525 + 1013904223) >>> 0;
      return state / 2 ** 32;
    };
  }

  it("random op sequences stay submittable", () => {
    const random = rng(20240809);
    const words = ["alpha", "beta", "C++", "2019", "x", "gamma", "longerword", ".NET"];
    for (let trial = 0; trial < 300; trial++) {
      const count = 1 + Math.floor(random() * 12);
      const chosen = Array.from({ length: count }, () => words[Math.floor(random() * words.length)]!);
      const { text, tokens } = tokensFor(chosen);
      const proposals: ProposedSpan[] = [];
      for (const token of tokens) {
        if (random() < 0.3) {
          proposals.push({
            start: token.start,
            end: token.end,
            type: ENTITY_TYPES[Math.floor(random() * 8)]!,
            provenance: random() < 0.5 ? "SEED" : "MODEL",
          });
        }
      }
      const editor = new SpanEditor(text.length, tokens, proposals);
      for (let op = 0; op < 40; op++) {
        const roll = random();
        const type = ENTITY_TYPES[Math.floor(random() * 8)]!;
        if (roll < 0.15) {
          editor.acceptAll();
        } else if (roll < 0.2) {
          editor.clear();
        } else if (roll < 0.55) {
          // arbitrary, possibly misaligned or empty or reversed selection
          const a = Math.floor(random() * (text.length + 3)) - 1;
          const b = Math.floor(random() * (text.length + 3)) - 1;
          editor.add(a, b, type);
        } else if (roll < 0.7) {
          editor.remove(Math.floor(random() * (editor.working.length + 1)));
        } else if (roll < 0.85) {
          editor.retype(Math.floor(random() * (editor.working.length + 1)), type);
        } else {
          const a = Math.floor(random() * (text.length + 3)) - 1;
          const b = Math.floor(random() * (text.length + 3)) - 1;
          editor.rebound(Math.floor(random() * (editor.working.length + 1)), a, b);
        }
        // the invariant the server relies on: always submittable
        expect(validateSpans([...editor.working], text.length)).toEqual([]);
      }
    }
  });
});

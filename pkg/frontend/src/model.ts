/** Editable working span set for one review item.
 *
 * Mirrors the server's validation rules exactly (in-bounds, half-open,
 * pairwise non-overlapping) and snaps every selection outward to token
 * boundaries, so a span that leaves this editor can never be rejected by
 * the server for bounds or overlap.
 */

import type { EntityType, ProposedSpan, Token, WorkingSpan } from "./types.js";

export interface Violation {
  code: "SPAN_OUT_OF_BOUNDS" | "SPAN_OVERLAP" | "SPAN_EMPTY";
  message: string;
}

/** Server-rule mirror: violations of a span set over a text of given length. */
export function validateSpans(spans: WorkingSpan[], textLength: number): Violation[] {
  const violations: Violation[] = [];
  const ordered = [...spans].sort((a, b) => a.start - b.start || a.end - b.end);
  for (const span of ordered) {
    if (span.start < 0 || span.start >= span.end) {
      violations.push({
        code: "SPAN_EMPTY",
        message: `invalid offsets (${span.start}, ${span.end})`,
      });
    }
    if (span.end > textLength) {
      violations.push({
        code: "SPAN_OUT_OF_BOUNDS",
        message: `span (${span.start}, ${span.end}) exceeds text length ${textLength}`,
      });
    }
  }
  for (let i = 1; i < ordered.length; i++) {
    const prev = ordered[i - 1]!;
    const cur = ordered[i]!;
    if (cur.start < prev.end) {
      violations.push({
        code: "SPAN_OVERLAP",
        message: `spans (${prev.start}, ${prev.end}) and (${cur.start}, ${cur.end}) overlap`,
      });
    }
  }
  return violations;
}

/** Outward snap of a character range to token boundaries; null when the
 * range touches no token (whitespace-only selection). */
export function snapToTokens(
  tokens: Token[],
  start: number,
  end: number,
): { start: number; end: number } | null {
  if (end < start) {
    [start, end] = [end, start];
  }
  if (end === start) {
    end = start + 1; // a bare click selects the token under the caret
  }
  const covered = tokens.filter((t) => t.start < end && t.end > start);
  if (covered.length === 0) {
    return null;
  }
  return { start: covered[0]!.start, end: covered[covered.length - 1]!.end };
}

export type EditResult = { ok: true } | { ok: false; reason: string };

export class SpanEditor {
  private spans: WorkingSpan[] = [];

  constructor(
    readonly textLength: number,
    readonly tokens: Token[],
    readonly proposals: ProposedSpan[],
  ) {}

  get working(): readonly WorkingSpan[] {
    return this.spans;
  }

  /** Working set valid by construction; belt-and-braces check for submit. */
  violations(): Violation[] {
    return validateSpans(this.spans, this.textLength);
  }

  canSubmit(): boolean {
    return this.violations().length === 0;
  }

  acceptAll(): void {
    this.spans = this.proposals
      .map(({ start, end, type }) => ({ start, end, type }))
      .sort((a, b) => a.start - b.start);
  }

  clear(): void {
    this.spans = [];
  }

  spanAt(offset: number): number {
    return this.spans.findIndex((s) => s.start <= offset && offset < s.end);
  }

  /** Add a span from a raw selection; snaps outward and rejects overlaps. */
  add(start: number, end: number, type: EntityType): EditResult {
    const snapped = snapToTokens(this.tokens, start, end);
    if (snapped === null) {
      return { ok: false, reason: "selection covers no token" };
    }
    if (snapped.end > this.textLength || snapped.start < 0) {
      return { ok: false, reason: "selection out of bounds" };
    }
    if (this.spans.some((s) => s.start < snapped.end && s.end > snapped.start)) {
      return { ok: false, reason: "overlaps an existing span" };
    }
    this.spans.push({ ...snapped, type });
    this.spans.sort((a, b) => a.start - b.start);
    return { ok: true };
  }

  remove(index: number): EditResult {
    if (index < 0 || index >= this.spans.length) {
      return { ok: false, reason: "no such span" };
    }
    this.spans.splice(index, 1);
    return { ok: true };
  }

  retype(index: number, type: EntityType): EditResult {
    const span = this.spans[index];
    if (!span) {
      return { ok: false, reason: "no such span" };
    }
    this.spans[index] = { ...span, type };
    return { ok: true };
  }

  /** Re-bound one span; the new range snaps outward and must stay clear of
   * every other span. */
  rebound(index: number, start: number, end: number): EditResult {
    const span = this.spans[index];
    if (!span) {
      return { ok: false, reason: "no such span" };
    }
    const snapped = snapToTokens(this.tokens, start, end);
    if (snapped === null) {
      return { ok: false, reason: "selection covers no token" };
    }
    const collides = this.spans.some(
      (s, i) => i !== index && s.start < snapped.end && s.end > snapped.start,
    );
    if (collides) {
      return { ok: false, reason: "overlaps an existing span" };
    }
    this.spans[index] = { ...span, start: snapped.start, end: snapped.end };
    this.spans.sort((a, b) => a.start - b.start);
    return { ok: true };
  }
}

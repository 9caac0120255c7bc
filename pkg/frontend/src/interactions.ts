import type { Verdict } from "./types.js";

/** Keyboard shortcuts for the four candidate verdicts (digit or mnemonic). */
export const VERDICT_KEYS: Record<string, Verdict> = {
  "1": "already_annotated",
  a: "already_annotated",
  "2": "new_valid",
  v: "new_valid",
  "3": "invalid",
  x: "invalid",
  "4": "undecidable",
  u: "undecidable",
};

export function verdictForKey(key: string): Verdict | null {
  return VERDICT_KEYS[key.toLowerCase()] ?? null;
}

/**
 * A candidate decision is submittable once a verdict is chosen; undecidable
 * additionally requires a non-blank note.
 */
export function canSubmitCandidate(verdict: Verdict | null, note: string): boolean {
  if (verdict === null) return false;
  if (verdict === "undecidable") return note.trim().length > 0;
  return true;
}

export function canSubmitProbe(question: string, answer: string): boolean {
  return question.trim().length > 0 && answer.trim().length > 0;
}

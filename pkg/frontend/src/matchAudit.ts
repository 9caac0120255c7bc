import type { DescriptionRef } from "./types.js";

/**
 * Accumulates one predicted→(gold|none) choice per predicted description.
 * The assignment is only buildable once every predicted description has an
 * explicit choice — "no match" must be chosen, never defaulted.
 */
export class MatchAuditBuilder {
  private readonly choices = new Map<string, string | null>();

  constructor(
    readonly predicted: DescriptionRef[],
    readonly gold: DescriptionRef[],
  ) {}

  assign(predictedId: string, goldId: string | null): void {
    if (!this.predicted.some((p) => p.id === predictedId)) {
      throw new Error(`unknown predicted id: ${predictedId}`);
    }
    if (goldId !== null && !this.gold.some((g) => g.id === goldId)) {
      throw new Error(`unknown gold id: ${goldId}`);
    }
    this.choices.set(predictedId, goldId);
  }

  /** Predicted ids still lacking a choice, in display order. */
  unassigned(): string[] {
    return this.predicted
      .filter((p) => !this.choices.has(p.id))
      .map((p) => p.id);
  }

  get complete(): boolean {
    return this.unassigned().length === 0;
  }

  /** Full assignment keyed in predicted-list order. */
  build(): Record<string, string | null> {
    const missing = this.unassigned();
    if (missing.length > 0) {
      throw new Error(`no choice yet for: ${missing.join(", ")}`);
    }
    const assignment: Record<string, string | null> = {};
    for (const p of this.predicted) {
      assignment[p.id] = this.choices.get(p.id) ?? null;
    }
    return assignment;
  }
}

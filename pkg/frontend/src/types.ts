/** Wire types for the review service API. */

export type SessionKind =
  | "candidate_review"
  | "match_audit"
  | "category_labeling"
  | "probe_authoring";

export const VERDICTS = [
  "already_annotated",
  "new_valid",
  "invalid",
  "undecidable",
] as const;

export type Verdict = (typeof VERDICTS)[number];

export interface Progress {
  decided: number;
  total: number;
}

export interface SessionDescriptor {
  session_id: string;
  kind: SessionKind;
  dataset_path: string | null;
  progress: Progress;
}

/** One reviewable unit. Fields beyond the key depend on the session kind. */
export type ReviewItem = Record<string, unknown>;

export interface CandidateItem extends ReviewItem {
  candidate_id: string;
  example_id: string;
  fact: string;
  description: string;
  document: string;
  summary: string;
}

export interface DescriptionRef {
  id: string;
  text: string;
}

export interface MatchAuditItem extends ReviewItem {
  example_id: string;
  predicted: DescriptionRef[];
  gold: DescriptionRef[];
}

export interface NextResponse {
  done: boolean;
  item: ReviewItem | null;
  progress: Progress;
}

export interface DecisionAck {
  status: string;
  progress: Progress;
}

export interface TemplateText {
  template_id: string;
  body: string;
  system_text: string | null;
}

/** Failure-analysis vocabularies, mirrored from the service's taxonomy. */
export const FN_CATEGORIES = [
  "extrinsic_correct",
  "extrinsic_wrong",
  "intrinsic_alteration",
  "intrinsic_composition",
] as const;

export const FP_CATEGORIES = [
  "overlooked_info",
  "missed_deduction",
  "omission",
  "overly_literal",
  "invented",
] as const;

export const CATEGORY_SETS: Record<string, readonly string[]> = {
  false_negative: FN_CATEGORIES,
  false_positive: FP_CATEGORIES,
};

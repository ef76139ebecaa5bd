// Wire types for the review service under /api/v1. Field names and shapes
// follow the service payloads exactly; the UI never re-derives state from
// anything but these.

export const DECISIONS = ["accept", "reject", "edit", "flag_inappropriate"] as const;
export type Decision = (typeof DECISIONS)[number];

export const REJECT_REASONS = [
  "counter-intuitive",
  "wrong-image",
  "non-transferable",
  "inappropriate",
  "privacy",
] as const;
export type RejectReason = (typeof REJECT_REASONS)[number];

export const STATUSES = ["pending", "accepted", "rejected", "conflict"] as const;
export type Status = (typeof STATUSES)[number];

export type VariantKind = "FixA" | "FixQ";

export interface VerdictView {
  decision: Decision;
  new_text: string | null;
  reason: string | null;
}

export interface TemplatePayload {
  question: string;
  surface: string;
  image_id: string | null;
  slot_token: string;
  answer_role: string;
  transferable: string;
}

export interface SamplePayload {
  question: string;
  answers: string[];
  surface: string;
  image_id: string | null;
  kind: VariantKind;
  originating_question: string | null;
  review_reason: string | null;
}

interface ItemBase {
  item_id: string;
  triplet: [string, string, string];
  status: Status;
  final_text: string | null;
  verdicts: Record<string, VerdictView>;
}

export interface TemplateItem extends ItemBase {
  item_kind: "template";
  payload: TemplatePayload;
}

export interface SampleItem extends ItemBase {
  item_kind: "sample";
  payload: SamplePayload;
}

export type ReviewItem = TemplateItem | SampleItem;

export interface QueueResponse {
  items: ReviewItem[];
  count: number;
}

export interface VerdictSubmission {
  annotator: string;
  item_id: string;
  decision: Decision;
  new_text?: string;
  reason?: RejectReason;
  // Client-side delivery dedupe; the service ignores unknown fields and its
  // latest-verdict-per-annotator rule makes redelivery harmless anyway.
  idempotency_key?: string;
}

export interface AnnotatorProgress {
  judged: number;
  decisions: Record<Decision, number>;
}

export interface Progress {
  generated: number;
  statuses: Record<Status, number>;
  acceptance_rate: number | null;
  per_annotator: Record<string, AnnotatorProgress>;
  by_kind: Record<string, Record<Status, number>>;
  log_entries: number;
}

export interface Funnel {
  generated: number;
  accepted: number;
  rejected: number;
  conflict: number;
  pending: number;
  acceptance_rate: number | null;
}

export interface ExportView {
  accepted_templates: Array<Record<string, unknown>>;
  accepted_samples: Array<Record<string, unknown>>;
  blocklist_additions: string[][];
  funnel: Funnel;
}

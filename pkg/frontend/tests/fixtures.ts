import type { ReviewItem, SampleItem, TemplateItem, VerdictView } from "../src/types.js";

export function templateItem(overrides: Partial<TemplateItem> = {}): TemplateItem {
  return {
    item_id: "tpl-1",
    item_kind: "template",
    triplet: ["bottle", "/r/UsedFor", "store liquid"],
    status: "pending",
    final_text: null,
    verdicts: {},
    payload: {
      question: "what is used for <t> in this image?",
      surface: "bottle is used for store liquid",
      image_id: "img001",
      slot_token: "<t>",
      answer_role: "head",
      transferable: "needs-review",
    },
    ...overrides,
  };
}

export function sampleItem(overrides: Partial<SampleItem> = {}): SampleItem {
  return {
    item_id: "adv-1",
    item_kind: "sample",
    triplet: ["bottle", "/r/UsedFor", "hold water"],
    status: "pending",
    final_text: null,
    verdicts: {},
    payload: {
      question: "what is used for holding water in this image?",
      answers: ["bottle"],
      surface: "bottle is used for hold water",
      image_id: "img002",
      kind: "FixA",
      originating_question: "what is used for storing liquid in this image?",
      review_reason: null,
    },
    ...overrides,
  };
}

export function withVerdict(
  item: ReviewItem,
  annotator: string,
  verdict: Partial<VerdictView> = {},
): ReviewItem {
  return {
    ...item,
    verdicts: {
      ...item.verdicts,
      [annotator]: { decision: "accept", new_text: null, reason: null, ...verdict },
    },
  } as ReviewItem;
}

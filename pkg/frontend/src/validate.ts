// Client-side mirror of the service's edit rules, so a bad edit is caught
// before it leaves the textarea. Messages match the server's wording; the
// server remains authoritative.

import type { ReviewItem } from "./types.js";

export const HEAD_TOKEN = "<h>";
export const TAIL_TOKEN = "<t>";

function occurrences(text: string, token: string): number {
  return text.split(token).length - 1;
}

/** Returns an error message, or null when the edit would be accepted. */
export function validateEdit(item: ReviewItem, newText: string): string | null {
  if (!newText.trim()) {
    return "edit text must be nonempty";
  }
  if (item.item_kind === "template") {
    const slot = item.payload.slot_token;
    const other = slot === HEAD_TOKEN ? TAIL_TOKEN : HEAD_TOKEN;
    if (occurrences(newText, slot) !== 1 || newText.includes(other)) {
      return `template edit must contain the slot token ${slot} exactly once`;
    }
    return null;
  }
  if (newText === item.payload.question) {
    return "edit text is identical to the current text; use accept";
  }
  if (item.payload.kind === "FixQ") {
    return "question text is fixed for this variant kind";
  }
  if (item.payload.kind === "FixA" && newText === item.payload.originating_question) {
    return "reworded question must differ from the originating question";
  }
  return null;
}

// Triage session state. Pure functions over immutable snapshots; the server
// is the only source of truth, so everything here is derivable from the last
// queue/item fetch plus the annotator id.

import type { ReviewItem, VerdictView } from "./types.js";

export interface Session {
  annotator: string;
  /** Queue items in server order. */
  items: ReviewItem[];
  /** Index of the item on screen; -1 when nothing needs this annotator. */
  cursor: number;
  /** One-shot banner text, e.g. when the other annotator resolved the item. */
  notice: string | null;
}

export function makeSession(annotator: string): Session {
  return { annotator, items: [], cursor: -1, notice: null };
}

/** Whether the item still wants a verdict from this annotator. Conflicts stay
 * actionable for everyone; a pending item with my verdict is just waiting on
 * the other annotator. */
export function needsAttention(item: ReviewItem, annotator: string): boolean {
  if (item.status === "conflict") {
    return true;
  }
  return !(annotator in item.verdicts);
}

/** First actionable index scanning from `from`, wrapping past the end. */
export function nextActionable(items: ReviewItem[], annotator: string, from: number): number {
  if (items.length === 0) {
    return -1;
  }
  const start = Math.max(0, from);
  for (let step = 0; step < items.length; step++) {
    const index = (start + step) % items.length;
    const item = items[index];
    if (item !== undefined && needsAttention(item, annotator)) {
      return index;
    }
  }
  return -1;
}

export function current(session: Session): ReviewItem | null {
  return session.cursor >= 0 ? (session.items[session.cursor] ?? null) : null;
}

/** Replace the queue after a refresh, staying on the same item when it
 * survived, otherwise landing on the nearest actionable one. */
export function loadQueue(session: Session, items: ReviewItem[]): Session {
  const previous = current(session);
  let cursor: number;
  if (previous !== null) {
    const kept = items.findIndex((item) => item.item_id === previous.item_id);
    cursor = kept >= 0 ? kept : nextActionable(items, session.annotator, session.cursor);
  } else {
    cursor = nextActionable(items, session.annotator, 0);
  }
  return { ...session, items, cursor };
}

/** Fold a freshly fetched item back into the session. Resolved items leave
 * the queue; when someone else resolved the one on screen, say so. */
export function reconcileItem(session: Session, fresh: ReviewItem): Session {
  const index = session.items.findIndex((item) => item.item_id === fresh.item_id);
  if (index < 0) {
    return session;
  }
  if (fresh.status === "accepted" || fresh.status === "rejected") {
    const items = session.items.slice(0, index).concat(session.items.slice(index + 1));
    let notice = session.notice;
    if (index === session.cursor && !(session.annotator in fresh.verdicts)) {
      notice = `${fresh.item_id} was resolved by the other annotator; skipping ahead`;
    }
    const from = session.cursor >= 0 ? Math.min(session.cursor, items.length - 1) : 0;
    const cursor = nextActionable(items, session.annotator, from);
    return { ...session, items, cursor, notice };
  }
  const items = session.items.slice();
  items[index] = fresh;
  let cursor = session.cursor;
  if (index === session.cursor && !needsAttention(fresh, session.annotator)) {
    // my half of the consensus is in; move on while the other annotator works
    cursor = nextActionable(items, session.annotator, session.cursor + 1);
  }
  return { ...session, items, cursor };
}

/** Record my verdict locally while the submission sits in the outbox, so
 * offline triage keeps moving. The next successful fetch overwrites this. */
export function applyLocalVerdict(
  session: Session,
  itemId: string,
  verdict: VerdictView,
): Session {
  const index = session.items.findIndex((item) => item.item_id === itemId);
  if (index < 0) {
    return session;
  }
  const existing = session.items[index];
  if (existing === undefined) {
    return session;
  }
  const updated: ReviewItem = {
    ...existing,
    verdicts: { ...existing.verdicts, [session.annotator]: verdict },
  };
  const items = session.items.slice();
  items[index] = updated;
  let cursor = session.cursor;
  if (index === session.cursor && !needsAttention(updated, session.annotator)) {
    cursor = nextActionable(items, session.annotator, session.cursor + 1);
  }
  return { ...session, items, cursor };
}

export function skip(session: Session): Session {
  const cursor = nextActionable(session.items, session.annotator, session.cursor + 1);
  return { ...session, cursor, notice: null };
}

export function jumpTo(session: Session, itemId: string): Session {
  const index = session.items.findIndex((item) => item.item_id === itemId);
  if (index < 0) {
    return session;
  }
  return { ...session, cursor: index, notice: null };
}

export interface QueueCounts {
  total: number;
  actionable: number;
}

export function counts(session: Session): QueueCounts {
  let actionable = 0;
  for (const item of session.items) {
    if (needsAttention(item, session.annotator)) {
      actionable += 1;
    }
  }
  return { total: session.items.length, actionable };
}

// DOM glue. All review logic lives in state.ts / validate.ts / api.ts; this
// file only renders snapshots and translates clicks and keys into calls.

import { ApiError, Client, Outbox } from "./api.js";
import { escapeHtml, formatRate, imageUrl } from "./format.js";
import {
  applyLocalVerdict,
  counts,
  current,
  jumpTo,
  loadQueue,
  makeSession,
  reconcileItem,
  skip,
  type Session,
} from "./state.js";
import {
  REJECT_REASONS,
  type Decision,
  type ExportView,
  type Progress,
  type RejectReason,
  type ReviewItem,
  type VerdictSubmission,
} from "./types.js";
import { validateEdit } from "./validate.js";

export interface Settings {
  annotator: string;
  apiBase: string;
  imageBase: string;
}

export const SETTINGS_KEYS = {
  annotator: "qforge.annotator",
  apiBase: "qforge.apiBase",
  imageBase: "qforge.imageBase",
} as const;

export function loadSettings(storage: Storage): Settings {
  return {
    annotator: storage.getItem(SETTINGS_KEYS.annotator) ?? "",
    apiBase: storage.getItem(SETTINGS_KEYS.apiBase) ?? "",
    imageBase: storage.getItem(SETTINGS_KEYS.imageBase) ?? "",
  };
}

export function saveSettings(storage: Storage, settings: Settings): void {
  storage.setItem(SETTINGS_KEYS.annotator, settings.annotator);
  storage.setItem(SETTINGS_KEYS.apiBase, settings.apiBase);
  storage.setItem(SETTINGS_KEYS.imageBase, settings.imageBase);
}

type View = "setup" | "triage" | "progress";
type Overlay = { kind: "reject" } | { kind: "edit"; draft: string } | null;

const HOTKEYS = "a accept / r reject / e edit / f flag / s skip / p progress";

export class App {
  private readonly root: HTMLElement;
  private readonly storage: Storage;
  private settings: Settings;
  private client: Client;
  private outbox: Outbox;
  private session: Session;
  private view: View;
  private overlay: Overlay = null;
  private progressData: Progress | null = null;
  private exportData: ExportView | null = null;
  private conflictItems: ReviewItem[] = [];
  private error: string | null = null;
  private busy = false;

  constructor(root: HTMLElement, storage: Storage) {
    this.root = root;
    this.storage = storage;
    this.settings = loadSettings(storage);
    this.client = new Client({ baseUrl: this.settings.apiBase });
    this.outbox = new Outbox(this.client);
    this.session = makeSession(this.settings.annotator);
    this.view = this.settings.annotator ? "triage" : "setup";
  }

  async start(): Promise<void> {
    this.root.addEventListener("click", (event) => {
      void this.onClick(event);
    });
    this.root.addEventListener("input", (event) => {
      this.onInput(event);
    });
    document.addEventListener("keydown", (event) => {
      void this.onKey(event);
    });
    window.addEventListener("online", () => {
      void this.flushOutbox();
    });
    window.setInterval(() => {
      if (this.view === "triage" && this.overlay === null && !this.busy) {
        void this.refresh();
      }
    }, 20000);
    if (this.view !== "setup") {
      await this.refresh();
    }
    this.render();
  }

  // -- data ------------------------------------------------------------

  async refresh(): Promise<void> {
    try {
      const queue = await this.client.queue();
      this.session = loadQueue(this.session, queue.items);
      if (this.view === "progress") {
        this.progressData = await this.client.progress();
        this.exportData = await this.client.exportView();
        this.conflictItems = (await this.client.queue({ status: "conflict" })).items;
      }
      this.error = null;
    } catch (error) {
      this.error = error instanceof Error ? error.message : String(error);
    }
    this.render();
  }

  async flushOutbox(): Promise<void> {
    const result = await this.outbox.flush();
    if (result.rejected.length > 0) {
      const first = result.rejected[0];
      if (first !== undefined) {
        this.error = `queued verdict on ${first.submission.item_id} rejected: ${first.error.message}`;
      }
    }
    if (result.delivered.length > 0) {
      await this.refresh();
    } else {
      this.render();
    }
  }

  private async submit(decision: Decision, extras: Partial<VerdictSubmission> = {}): Promise<void> {
    const item = current(this.session);
    if (item === null || this.busy) {
      return;
    }
    if (decision === "edit" && typeof extras.new_text === "string") {
      const problem = validateEdit(item, extras.new_text);
      if (problem !== null) {
        this.error = problem;
        this.render();
        return;
      }
    }
    const submission: VerdictSubmission = {
      annotator: this.session.annotator,
      item_id: item.item_id,
      decision,
      ...extras,
    };
    this.busy = true;
    this.render();
    try {
      const result = await this.outbox.submit(submission);
      this.overlay = null;
      this.error = null;
      if (result.item !== null) {
        this.session = reconcileItem(this.session, result.item);
      } else {
        this.session = applyLocalVerdict(this.session, item.item_id, {
          decision,
          new_text: extras.new_text ?? null,
          reason: extras.reason ?? null,
        });
      }
    } catch (error) {
      this.error = error instanceof ApiError ? error.message : String(error);
    } finally {
      this.busy = false;
    }
    this.render();
  }

  // -- events ----------------------------------------------------------

  private async onClick(event: Event): Promise<void> {
    const node = event.target as Element | null;
    const target = node?.closest<HTMLElement>("[data-action]") ?? null;
    if (target === null) {
      return;
    }
    const action = target.dataset["action"];
    switch (action) {
      case "accept":
        return this.submit("accept");
      case "reject":
        this.overlay = { kind: "reject" };
        break;
      case "reason":
        return this.submit("reject", { reason: target.dataset["reason"] as RejectReason });
      case "edit":
        this.openEdit();
        break;
      case "submit-edit":
        return this.submitEdit();
      case "flag":
        return this.submit("flag_inappropriate");
      case "skip":
        this.session = skip(this.session);
        break;
      case "cancel-overlay":
        this.overlay = null;
        break;
      case "jump": {
        const id = target.dataset["item"];
        if (id !== undefined) {
          this.session = jumpTo(this.session, id);
        }
        break;
      }
      case "jump-conflict": {
        const id = target.dataset["item"];
        if (id !== undefined) {
          this.view = "triage";
          this.session = jumpTo(this.session, id);
        }
        break;
      }
      case "progress":
        this.view = "progress";
        return this.refresh();
      case "triage":
        this.view = "triage";
        return this.refresh();
      case "refresh":
        return this.refresh();
      case "flush":
        return this.flushOutbox();
      case "settings":
        this.view = "setup";
        break;
      case "save-settings":
        this.saveSetup();
        return this.refresh();
      default:
        return;
    }
    this.render();
  }

  /** Keep the edit draft across renders and re-validate as the user types,
   * patching in place so focus stays in the textarea. */
  private onInput(event: Event): void {
    const target = event.target as HTMLElement | null;
    if (target?.id !== "edit-text" || this.overlay?.kind !== "edit") {
      return;
    }
    const draft = (target as HTMLTextAreaElement).value;
    this.overlay = { kind: "edit", draft };
    const item = current(this.session);
    const problem = item === null ? null : validateEdit(item, draft);
    const problemBox = this.root.querySelector<HTMLElement>("#edit-problem");
    if (problemBox !== null) {
      problemBox.textContent = problem ?? "";
    }
    const submitButton = this.root.querySelector<HTMLButtonElement>('[data-action="submit-edit"]');
    if (submitButton !== null) {
      submitButton.disabled = problem !== null;
    }
  }

  private async onKey(event: KeyboardEvent): Promise<void> {
    const target = event.target as HTMLElement | null;
    const typing =
      target !== null && (target.tagName === "INPUT" || target.tagName === "TEXTAREA");
    if (this.overlay?.kind === "edit") {
      if (event.key === "Escape") {
        this.overlay = null;
        this.render();
      } else if (event.key === "Enter" && (event.ctrlKey || event.metaKey)) {
        event.preventDefault();
        await this.submitEdit();
      }
      return;
    }
    if (this.overlay?.kind === "reject") {
      if (event.key === "Escape") {
        this.overlay = null;
        this.render();
        return;
      }
      const index = Number.parseInt(event.key, 10) - 1;
      const reason = REJECT_REASONS[index];
      if (reason !== undefined) {
        event.preventDefault();
        await this.submit("reject", { reason });
      }
      return;
    }
    if (typing || this.view !== "triage" || event.ctrlKey || event.metaKey || event.altKey) {
      if (event.key === "Escape" && this.view === "progress") {
        this.view = "triage";
        this.render();
      }
      return;
    }
    switch (event.key) {
      case "a":
        return this.submit("accept");
      case "r":
        this.overlay = { kind: "reject" };
        break;
      case "e":
        this.openEdit();
        break;
      case "f":
        return this.submit("flag_inappropriate");
      case "s":
        this.session = skip(this.session);
        break;
      case "p":
        this.view = "progress";
        return this.refresh();
      default:
        return;
    }
    this.render();
  }

  private openEdit(): void {
    const item = current(this.session);
    if (item === null) {
      return;
    }
    this.overlay = { kind: "edit", draft: item.payload.question };
    this.render();
    const area = this.root.querySelector<HTMLTextAreaElement>("#edit-text");
    area?.focus();
  }

  private async submitEdit(): Promise<void> {
    const area = this.root.querySelector<HTMLTextAreaElement>("#edit-text");
    if (area === null) {
      return;
    }
    await this.submit("edit", { new_text: area.value });
  }

  private saveSetup(): void {
    const value = (id: string): string =>
      this.root.querySelector<HTMLInputElement>(`#${id}`)?.value.trim() ?? "";
    this.settings = {
      annotator: value("setup-annotator"),
      apiBase: value("setup-api-base"),
      imageBase: value("setup-image-base"),
    };
    saveSettings(this.storage, this.settings);
    this.client = new Client({ baseUrl: this.settings.apiBase });
    this.outbox = new Outbox(this.client);
    this.session = makeSession(this.settings.annotator);
    this.view = this.settings.annotator ? "triage" : "setup";
  }

  // -- rendering ---------------------------------------------------------

  render(): void {
    let body: string;
    if (this.view === "setup") {
      body = this.renderSetup();
    } else if (this.view === "progress") {
      body = this.renderProgress();
    } else {
      body = this.renderTriage();
    }
    this.root.innerHTML = `
      <header class="bar">
        <span class="brand">qforge review</span>
        <span class="who">${escapeHtml(this.settings.annotator || "no annotator")}</span>
        ${this.renderOutboxBadge()}
        <span class="spacer"></span>
        <button data-action="triage">queue</button>
        <button data-action="progress">progress</button>
        <button data-action="refresh">refresh</button>
        <button data-action="settings">settings</button>
      </header>
      ${this.error === null ? "" : `<div class="error">${escapeHtml(this.error)}</div>`}
      ${this.session.notice === null ? "" : `<div class="notice">${escapeHtml(this.session.notice)}</div>`}
      ${body}`;
  }

  private renderOutboxBadge(): string {
    const pending = this.outbox.pending.length;
    if (pending === 0) {
      return "";
    }
    return `<button class="queued" data-action="flush">${pending} queued, retry</button>`;
  }

  private renderSetup(): string {
    return `
      <section class="card">
        <h2>annotator</h2>
        <label>annotator id
          <input id="setup-annotator" value="${escapeHtml(this.settings.annotator)}" placeholder="a1">
        </label>
        <label>service base URL (blank = same origin)
          <input id="setup-api-base" value="${escapeHtml(this.settings.apiBase)}" placeholder="http://localhost:8000">
        </label>
        <label>image base URL (blank = show ids only)
          <input id="setup-image-base" value="${escapeHtml(this.settings.imageBase)}" placeholder="https://images.example/vg">
        </label>
        <button class="primary" data-action="save-settings">start</button>
      </section>`;
  }

  private renderTriage(): string {
    const { total, actionable } = counts(this.session);
    const item = current(this.session);
    if (item === null) {
      return `
        <section class="card done">
          <h2>queue drained</h2>
          <p>${total} unresolved item(s) total, none waiting on you.</p>
        </section>`;
    }
    return `
      <div class="meta">${actionable} of ${total} waiting on you<span class="keys">${HOTKEYS}</span></div>
      ${this.renderItem(item)}
      ${this.renderOverlay(item)}
      ${this.renderStrip(item)}`;
  }

  private renderItem(item: ReviewItem): string {
    const badges = [`<span class="badge kind">${item.item_kind}</span>`];
    if (item.item_kind === "sample") {
      badges.push(`<span class="badge ${item.payload.kind === "FixA" ? "fixa" : "fixq"}">${item.payload.kind}</span>`);
    }
    badges.push(`<span class="badge status-${item.status}">${item.status}</span>`);
    const rows: string[] = [];
    rows.push(`<div class="question">${escapeHtml(item.payload.question)}</div>`);
    rows.push(`<div class="surface">${escapeHtml(item.payload.surface)}</div>`);
    rows.push(`<div class="triplet">${item.triplet.map((part) => `<code>${escapeHtml(part)}</code>`).join(" ")}</div>`);
    if (item.item_kind === "sample") {
      rows.push(`<div class="answers">answer: ${item.payload.answers.map((a) => `<strong>${escapeHtml(a)}</strong>`).join(", ")}</div>`);
      if (item.payload.originating_question !== null) {
        rows.push(`<div class="origin">was: ${escapeHtml(item.payload.originating_question)}</div>`);
      }
      if (item.payload.review_reason !== null) {
        rows.push(`<div class="why">queued because: ${escapeHtml(item.payload.review_reason)}</div>`);
      }
    } else {
      rows.push(`<div class="why">slot ${escapeHtml(item.payload.slot_token)}, answer role ${escapeHtml(item.payload.answer_role)}, ${escapeHtml(item.payload.transferable)}</div>`);
    }
    rows.push(this.renderImage(item));
    if (item.status === "conflict") {
      rows.push(this.renderVerdicts(item));
    }
    const mine = this.session.annotator in item.verdicts;
    return `
      <section class="card item" data-item-id="${escapeHtml(item.item_id)}">
        <div class="badges">${badges.join(" ")}<span class="item-id">${escapeHtml(item.item_id)}</span></div>
        ${rows.join("\n")}
        ${mine ? `<div class="mine">your verdict: ${escapeHtml(item.verdicts[this.session.annotator]?.decision ?? "")}</div>` : ""}
        <div class="actions">
          <button class="primary" data-action="accept" ${this.busy ? "disabled" : ""}>accept (a)</button>
          <button data-action="reject" ${this.busy ? "disabled" : ""}>reject (r)</button>
          <button data-action="edit" ${this.busy ? "disabled" : ""}>edit (e)</button>
          <button data-action="flag" ${this.busy ? "disabled" : ""}>flag (f)</button>
          <button data-action="skip">skip (s)</button>
        </div>
      </section>`;
  }

  private renderImage(item: ReviewItem): string {
    const url = imageUrl(this.settings.imageBase, item.payload.image_id);
    if (url !== null) {
      return `<img class="shot" src="${escapeHtml(url)}" alt="${escapeHtml(item.payload.image_id ?? "")}">`;
    }
    if (item.payload.image_id !== null) {
      return `<div class="shot-id">image ${escapeHtml(item.payload.image_id)}</div>`;
    }
    return "";
  }

  private renderVerdicts(item: ReviewItem): string {
    const cells = Object.entries(item.verdicts)
      .sort(([a], [b]) => a.localeCompare(b))
      .map(
        ([annotator, verdict]) => `
          <div class="verdict">
            <div class="verdict-who">${escapeHtml(annotator)}</div>
            <div>${escapeHtml(verdict.decision)}</div>
            ${verdict.new_text === null ? "" : `<div class="verdict-text">${escapeHtml(verdict.new_text)}</div>`}
            ${verdict.reason === null ? "" : `<div class="verdict-reason">${escapeHtml(verdict.reason)}</div>`}
          </div>`,
      );
    return `<div class="conflict-box"><div class="conflict-title">conflicting verdicts</div>${cells.join("")}</div>`;
  }

  private renderOverlay(item: ReviewItem): string {
    if (this.overlay === null) {
      return "";
    }
    if (this.overlay.kind === "reject") {
      const buttons = REJECT_REASONS.map(
        (reason, index) =>
          `<button data-action="reason" data-reason="${reason}">${index + 1} ${reason}</button>`,
      ).join("");
      return `
        <section class="card overlay">
          <h3>reject reason (1-5, esc cancels)</h3>
          <div class="reasons">${buttons}</div>
          <button data-action="cancel-overlay">cancel</button>
        </section>`;
    }
    const draft = this.overlay.draft;
    const problem = validateEdit(item, draft);
    return `
      <section class="card overlay">
        <h3>edit question (ctrl+enter submits, esc cancels)</h3>
        <textarea id="edit-text" rows="3">${escapeHtml(draft)}</textarea>
        <div id="edit-problem" class="problem">${problem === null ? "" : escapeHtml(problem)}</div>
        <div class="actions">
          <button class="primary" data-action="submit-edit" ${problem === null ? "" : "disabled"}>submit edit</button>
          <button data-action="cancel-overlay">cancel</button>
        </div>
      </section>`;
  }

  private renderStrip(active: ReviewItem): string {
    const rows = this.session.items.slice(0, 40).map((item) => {
      const classes = ["strip-row"];
      if (item.item_id === active.item_id) {
        classes.push("active");
      }
      if (this.session.annotator in item.verdicts && item.status !== "conflict") {
        classes.push("judged");
      }
      const kind = item.item_kind === "sample" ? item.payload.kind : "tpl";
      return `<button class="${classes.join(" ")}" data-action="jump" data-item="${escapeHtml(item.item_id)}">${escapeHtml(kind)} ${escapeHtml(item.item_id)}</button>`;
    });
    return `<nav class="strip">${rows.join("")}</nav>`;
  }

  private renderProgress(): string {
    const progress = this.progressData;
    const exportView = this.exportData;
    if (progress === null) {
      return `<section class="card">loading...</section>`;
    }
    const statuses = Object.entries(progress.statuses)
      .map(([status, n]) => `<tr><td>${escapeHtml(status)}</td><td>${n}</td></tr>`)
      .join("");
    const annotators = Object.entries(progress.per_annotator)
      .map(([annotator, stats]) => {
        const decisions = Object.entries(stats.decisions)
          .map(([decision, n]) => `${escapeHtml(decision)} ${n}`)
          .join(", ");
        return `<tr><td>${escapeHtml(annotator)}</td><td>${stats.judged}</td><td>${decisions}</td></tr>`;
      })
      .join("");
    const kinds = Object.entries(progress.by_kind)
      .map(([kind, perStatus]) => {
        const cells = (["pending", "accepted", "rejected", "conflict"] as const)
          .map((status) => `<td>${perStatus[status] ?? 0}</td>`)
          .join("");
        return `<tr><td>${escapeHtml(kind)}</td>${cells}</tr>`;
      })
      .join("");
    return `
      <section class="card">
        <h2>progress</h2>
        ${this.renderFunnel()}
        <div class="grid">
          <table><caption>status</caption>${statuses}</table>
          <table><caption>annotators (judged, decisions)</caption>${annotators}</table>
          <table><caption>by kind</caption>
            <tr><th></th><th>pend</th><th>acc</th><th>rej</th><th>conf</th></tr>${kinds}
          </table>
        </div>
        <div class="meta">acceptance rate ${formatRate(progress.acceptance_rate)},
          ${progress.log_entries} logged verdict(s)${
            exportView === null
              ? ""
              : `, ${exportView.blocklist_additions.length} blocklist addition(s)`
          }</div>
      </section>
      ${this.renderConflictList()}`;
  }

  private renderConflictList(): string {
    if (this.conflictItems.length === 0) {
      return "";
    }
    const rows = this.conflictItems.map(
      (item) => `
        <div class="conflict-row">
          <button data-action="jump-conflict" data-item="${escapeHtml(item.item_id)}">${escapeHtml(item.item_id)}</button>
          <span class="conflict-q">${escapeHtml(item.payload.question)}</span>
          ${this.renderVerdicts(item)}
        </div>`,
    );
    return `
      <section class="card">
        <h3>open conflicts</h3>
        ${rows.join("")}
      </section>`;
  }

  private renderFunnel(): string {
    const progress = this.progressData;
    if (progress === null || progress.generated === 0) {
      return "";
    }
    const segments = (["accepted", "rejected", "conflict", "pending"] as const)
      .map((status) => {
        const width = (100 * progress.statuses[status]) / progress.generated;
        if (width === 0) {
          return "";
        }
        return `<div class="seg seg-${status}" style="width:${width.toFixed(2)}%" title="${status} ${progress.statuses[status]}"></div>`;
      })
      .join("");
    return `<div class="funnel">${segments}</div>
      <div class="funnel-legend">${progress.generated} generated:
        ${progress.statuses.accepted} accepted, ${progress.statuses.rejected} rejected,
        ${progress.statuses.conflict} conflict, ${progress.statuses.pending} pending</div>`;
  }
}

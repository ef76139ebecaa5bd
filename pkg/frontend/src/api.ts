// Thin fetch client for /api/v1 plus an outbox that holds verdicts the
// network refused and redelivers them in order. A verdict carries a client
// key so a retry never duplicates an entry here; on the service side the
// latest verdict per annotator wins, which makes redelivery safe too.

import type {
  ExportView,
  Progress,
  QueueResponse,
  ReviewItem,
  VerdictSubmission,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
  }
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  /** Prefix before /api/v1; empty means same origin. */
  baseUrl?: string;
  fetchFn?: FetchFn;
}

export class Client {
  private readonly base: string;
  private readonly fetchFn: FetchFn;

  constructor(options: ClientOptions = {}) {
    this.base = (options.baseUrl ?? "").replace(/\/+$/, "");
    this.fetchFn = options.fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      let detail = `request failed with status ${response.status}`;
      try {
        const body: unknown = await response.json();
        if (
          typeof body === "object" &&
          body !== null &&
          typeof (body as { detail?: unknown }).detail === "string"
        ) {
          detail = (body as { detail: string }).detail;
        }
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  queue(filters: { kind?: string; status?: string } = {}): Promise<QueueResponse> {
    const params = new URLSearchParams();
    if (filters.kind) {
      params.set("kind", filters.kind);
    }
    if (filters.status) {
      params.set("status", filters.status);
    }
    const query = params.toString();
    return this.request<QueueResponse>(`/api/v1/queue${query ? `?${query}` : ""}`);
  }

  item(itemId: string): Promise<ReviewItem> {
    return this.request<ReviewItem>(`/api/v1/item/${encodeURIComponent(itemId)}`);
  }

  verdict(submission: VerdictSubmission): Promise<ReviewItem> {
    return this.request<ReviewItem>("/api/v1/verdict", {
      method: "POST",
      headers: {
        "content-type": "application/json",
        "x-annotator-id": submission.annotator,
      },
      body: JSON.stringify(submission),
    });
  }

  progress(): Promise<Progress> {
    return this.request<Progress>("/api/v1/progress");
  }

  exportView(): Promise<ExportView> {
    return this.request<ExportView>("/api/v1/export");
  }
}

export interface QueuedSubmission {
  key: string;
  submission: VerdictSubmission;
  attempts: number;
}

export interface SubmitResult {
  /** The refreshed item on delivery, null when the verdict was queued. */
  item: ReviewItem | null;
  queued: boolean;
}

export interface FlushResult {
  delivered: ReviewItem[];
  /** Entries the service rejected outright; retrying cannot fix these. */
  rejected: Array<{ submission: VerdictSubmission; error: ApiError }>;
  remaining: number;
}

let keyCounter = 0;

function defaultKey(submission: VerdictSubmission): string {
  keyCounter += 1;
  return `${submission.annotator}:${submission.item_id}:${keyCounter}`;
}

export class Outbox {
  private readonly client: Client;
  private readonly keyFn: (submission: VerdictSubmission) => string;
  private entries: QueuedSubmission[] = [];

  constructor(client: Client, keyFn: (submission: VerdictSubmission) => string = defaultKey) {
    this.client = client;
    this.keyFn = keyFn;
  }

  get pending(): readonly QueuedSubmission[] {
    return this.entries;
  }

  async submit(submission: VerdictSubmission): Promise<SubmitResult> {
    const keyed: VerdictSubmission = {
      ...submission,
      idempotency_key: submission.idempotency_key ?? this.keyFn(submission),
    };
    try {
      const item = await this.client.verdict(keyed);
      return { item, queued: false };
    } catch (error) {
      if (error instanceof ApiError) {
        throw error; // the service answered; this is a real rejection
      }
      this.enqueue(keyed);
      return { item: null, queued: true };
    }
  }

  private enqueue(submission: VerdictSubmission): void {
    const entry: QueuedSubmission = {
      key: submission.idempotency_key ?? this.keyFn(submission),
      submission,
      attempts: 0,
    };
    // one live verdict per annotator and item: a newer decision made while
    // offline supersedes the queued one instead of following it
    const index = this.entries.findIndex(
      (queued) =>
        queued.submission.item_id === submission.item_id &&
        queued.submission.annotator === submission.annotator,
    );
    if (index >= 0) {
      this.entries[index] = entry;
    } else {
      this.entries.push(entry);
    }
  }

  async flush(): Promise<FlushResult> {
    const delivered: ReviewItem[] = [];
    const rejected: Array<{ submission: VerdictSubmission; error: ApiError }> = [];
    while (this.entries.length > 0) {
      const entry = this.entries[0];
      if (entry === undefined) {
        break;
      }
      entry.attempts += 1;
      try {
        delivered.push(await this.client.verdict(entry.submission));
        this.entries.shift();
      } catch (error) {
        if (error instanceof ApiError) {
          rejected.push({ submission: entry.submission, error });
          this.entries.shift();
          continue;
        }
        break; // still offline; keep the rest for the next flush
      }
    }
    return { delivered, rejected, remaining: this.entries.length };
  }
}

// Typed client for the annotation service. The only backend coupling in
// the workbench: everything goes through these endpoints.

import type {
  AnnotationLabel,
  JobStatusPayload,
  QueueItemView,
  RatingsPayload,
  StatsPayload,
  StoredAnnotation,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Network-level failure or a 5xx: the request may or may not have been
 * applied server-side, so the caller must retry idempotently. */
export class TransportError extends Error {}

/** The server understood and rejected the request (4xx other than the
 * duplicate case); retrying the same payload will not help. */
export class RequestRejected extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export type PostAnnotationResult =
  | { outcome: "stored"; record: StoredAnnotation }
  | { outcome: "duplicate" };

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.url(path));
    } catch (err) {
      throw new TransportError(String(err));
    }
    if (!resp.ok) {
      throw resp.status >= 500
        ? new TransportError(`${path}: HTTP ${resp.status}`)
        : new RequestRejected(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  async getQueue(annotator: string, limit: number): Promise<QueueItemView[]> {
    const payload = await this.getJson<{ items: QueueItemView[] }>(
      `/api/queue?annotator=${encodeURIComponent(annotator)}&limit=${limit}`,
    );
    return payload.items;
  }

  async postAnnotation(body: {
    sentence_id: string;
    annotator_id: string;
    label: AnnotationLabel;
    round: number;
  }): Promise<PostAnnotationResult> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.url("/api/annotations"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new TransportError(String(err));
    }
    if (resp.status === 409) {
      // server-side dedupe by (sentence, annotator, round): an earlier
      // delivery of this same decision already landed
      return { outcome: "duplicate" };
    }
    if (!resp.ok) {
      throw resp.status >= 500
        ? new TransportError(`POST /api/annotations: HTTP ${resp.status}`)
        : new RequestRejected(resp.status, await resp.text());
    }
    const payload = (await resp.json()) as { stored: StoredAnnotation };
    return { outcome: "stored", record: payload.stored };
  }

  async startRetrain(): Promise<{ outcome: "started"; jobId: string } | { outcome: "busy" }> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.url("/api/retrain"), { method: "POST" });
    } catch (err) {
      throw new TransportError(String(err));
    }
    if (resp.status === 409) return { outcome: "busy" };
    if (!resp.ok) throw new TransportError(`POST /api/retrain: HTTP ${resp.status}`);
    const payload = (await resp.json()) as { job_id: string };
    return { outcome: "started", jobId: payload.job_id };
  }

  getJob(jobId: string): Promise<JobStatusPayload> {
    return this.getJson<JobStatusPayload>(`/api/jobs/${encodeURIComponent(jobId)}`);
  }

  getStats(): Promise<StatsPayload> {
    return this.getJson<StatsPayload>("/api/stats");
  }

  getRatings(): Promise<RatingsPayload> {
    return this.getJson<RatingsPayload>("/api/ratings");
  }
}

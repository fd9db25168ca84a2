/** Minimal client for the rating-service JSON API.
 *
 * Exactly one request is allowed in flight at a time; attempts to start a
 * second one are refused, which is what keeps the submit button honest.
 */

import { NextResponse, parseNext, SessionInfo } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(detail);
  }
}

export class BusyError extends Error {
  constructor() {
    super("a request is already in flight");
  }
}

async function detailOf(resp: Response): Promise<string> {
  try {
    const doc = (await resp.json()) as { detail?: unknown };
    if (typeof doc.detail === "string") return doc.detail;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${resp.status}`;
}

export class RatingClient {
  private inFlight = false;

  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  private async guarded<T>(work: () => Promise<T>): Promise<T> {
    if (this.inFlight) throw new BusyError();
    this.inFlight = true;
    try {
      return await work();
    } finally {
      this.inFlight = false;
    }
  }

  private async json(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, await detailOf(resp));
    }
    return resp.json();
  }

  async openSession(userId: string, seed = 0): Promise<SessionInfo> {
    return this.guarded(async () => {
      const doc = await this.json("/sessions", {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ user_id: userId, seed }),
      });
      return doc as SessionInfo;
    });
  }

  async next(sessionId: string): Promise<NextResponse> {
    return this.guarded(async () => {
      const doc = await this.json(`/sessions/${encodeURIComponent(sessionId)}/next`);
      return parseNext(doc);
    });
  }

  async submit(sessionId: string, projectionId: string, score: number): Promise<void> {
    return this.guarded(async () => {
      await this.json(`/sessions/${encodeURIComponent(sessionId)}/ratings`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ projection_id: projectionId, score }),
      });
    });
  }

  exportUrl(userId: string): string {
    return `${this.base}/users/${encodeURIComponent(userId)}/export`;
  }
}

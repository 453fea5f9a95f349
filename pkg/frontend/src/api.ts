// REST client for the matchboard service. Every mutation carries the
// caller's expected revision; a 409 surfaces as ConflictError so the board
// can refetch instead of diverging. Solves that come back 202 are polled.

import {
  ApiError,
  ApiErrorDoc,
  BoardDoc,
  ConflictError,
  CrossRefsDoc,
  WhatIfDoc,
} from "./types";

export const POLL_INTERVAL_MS = 500;

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;
  private readonly pollIntervalMs: number;

  constructor(baseUrl = "", fetchFn?: FetchLike, pollIntervalMs = POLL_INTERVAL_MS) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    this.pollIntervalMs = pollIntervalMs;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = response.status === 204 ? {} : await response.json();
    if (!response.ok) {
      const payload = (body as { error?: ApiErrorDoc }).error ?? {
        code: "INTERNAL",
        message: `request failed with status ${response.status}`,
        details: {},
      };
      if (payload.code === "CONFLICT") {
        throw new ConflictError(response.status, payload);
      }
      throw new ApiError(response.status, payload);
    }
    return body;
  }

  /** Resolve a possibly-202 solve response by polling its job token. */
  private async awaitSession(body: unknown): Promise<BoardDoc> {
    let current = body as { session?: BoardDoc; status?: string; token?: string };
    while (current.session === undefined) {
      if (current.status !== "pending" || !current.token) {
        throw new ApiError(500, {
          code: "INTERNAL",
          message: "response carried neither a session nor a poll token",
          details: {},
        });
      }
      await sleep(this.pollIntervalMs);
      current = (await this.request(`/jobs/${current.token}`)) as typeof current;
    }
    return current.session;
  }

  private mutation(
    sessionId: string,
    endpoint: string,
    expectedRevision: number,
    payload: Record<string, unknown>,
  ): Promise<unknown> {
    return this.request(`/sessions/${sessionId}/${endpoint}`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "X-Expected-Revision": String(expectedRevision),
      },
      body: JSON.stringify(payload),
    });
  }

  async getBoard(sessionId: string): Promise<BoardDoc> {
    const body = (await this.request(`/sessions/${sessionId}`)) as { session: BoardDoc };
    return body.session;
  }

  async openSession(payload: Record<string, unknown>): Promise<BoardDoc> {
    const body = await this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return this.awaitSession(body);
  }

  async move(
    sessionId: string,
    expectedRevision: number,
    caseId: string,
    target: string | null,
  ): Promise<BoardDoc> {
    const body = await this.mutation(sessionId, "move", expectedRevision, {
      case: caseId,
      target,
    });
    return (body as { session: BoardDoc }).session;
  }

  async toggleLock(
    sessionId: string,
    expectedRevision: number,
    caseId: string,
  ): Promise<BoardDoc> {
    const body = await this.mutation(sessionId, "lock", expectedRevision, { case: caseId });
    return (body as { session: BoardDoc }).session;
  }

  async adjustCapacity(
    sessionId: string,
    expectedRevision: number,
    locationId: string,
    dimension: "cases" | "members",
    delta: number,
  ): Promise<BoardDoc> {
    const body = await this.mutation(sessionId, "capacity", expectedRevision, {
      location: locationId,
      dimension,
      delta,
    });
    return (body as { session: BoardDoc }).session;
  }

  async reoptimize(sessionId: string, expectedRevision: number): Promise<BoardDoc> {
    const body = await this.mutation(sessionId, "reoptimize", expectedRevision, {});
    return this.awaitSession(body);
  }

  async whatIf(sessionId: string, caseId: string, target: string | null): Promise<WhatIfDoc> {
    const params = new URLSearchParams({ case: caseId });
    if (target !== null) params.set("target", target);
    return (await this.request(
      `/sessions/${sessionId}/whatif?${params.toString()}`,
    )) as WhatIfDoc;
  }

  async crossRefs(sessionId: string, caseId: string): Promise<CrossRefsDoc> {
    return (await this.request(
      `/sessions/${sessionId}/crossrefs/${caseId}`,
    )) as CrossRefsDoc;
  }

  exportUrl(sessionId: string, format: "csv" | "json"): string {
    return `${this.baseUrl}/sessions/${sessionId}/export?format=${format}`;
  }
}

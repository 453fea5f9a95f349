// In-memory stand-in for the matchboard service: same envelopes, same
// revision/conflict semantics, same what-if arithmetic. Tests drive the UI
// against it through the ordinary ApiClient.

import { BoardDoc, CrossRefsDoc } from "../src/types";

type Scores = Record<string, Record<string, number>>;
type Compat = Record<string, Record<string, boolean>>;

export interface FakeService {
  board: BoardDoc;
  fetchFn: (input: string, init?: RequestInit) => Promise<Response>;
  requests: { method: string; path: string; body?: unknown; revision?: string }[];
  failNextMutationWith?: { status: number; code: string; message: string };
  holdNextMutation?: () => Promise<void>;
  pendingJobs: Map<string, BoardDoc>;
}

const json = (status: number, body: unknown): Response =>
  new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });

export function baseBoard(): { board: BoardDoc; scores: Scores; compat: Compat } {
  const scores: Scores = {
    F1: { A: 0.9, B: 0.4, C: 0.2 },
    F2: { A: 0.6, B: 0.5, C: 0.3 },
    F3: { A: 0.1, B: 0.7, C: 0.2 },
    F4: { A: 0.5, B: 0.3, C: 0.1 },
  };
  const compat: Compat = {
    F1: { A: true, B: true, C: true },
    F2: { A: true, B: true, C: false },
    F3: { A: true, B: false, C: true },
    F4: { A: true, B: true, C: true },
  };
  const board: BoardDoc = {
    session_id: "s1",
    revision: 0,
    total_score: 0.9 + 0.6 + 0.7,
    cross_ref_bonus: 0,
    allow_unassigned: true,
    mode: "outcome_predicted",
    placement: { F1: "A", F2: "A", F3: "B", F4: null },
    locks: { F2: "A" },
    violations: [{ kind: "incompatible", location: "B", case: "F3" }],
    cases: [
      { id: "F1", name: "Family 1", member_count: 3, employable_count: 2,
        location: "A", score: 0.9, compatible: true, locked: false,
        has_cross_refs: true, levels: [0.2, 0.8] },
      { id: "F2", name: "Family 2", member_count: 2, employable_count: 1,
        location: "A", score: 0.6, compatible: true, locked: true,
        has_cross_refs: false, levels: [0.5, 0.5] },
      { id: "F3", name: "Family 3", member_count: 4, employable_count: 2,
        location: "B", score: 0.7, compatible: false, locked: false,
        has_cross_refs: false, levels: [0.9, 0.1] },
      { id: "F4", name: "Family 4", member_count: 1, employable_count: 1,
        location: null, score: 0, compatible: true, locked: false,
        has_cross_refs: false, levels: [0.4, 0.6] },
    ],
    locations: [
      { id: "A", name: "Alpha", case_capacity: 2, member_capacity: 8,
        placed_cases: 2, placed_members: 5, desired_levels: [0.3, 0.7] },
      { id: "B", name: "Beta", case_capacity: 2, member_capacity: 6,
        placed_cases: 1, placed_members: 4, desired_levels: [0.8, 0.2] },
      { id: "C", name: "Gamma", case_capacity: 1, member_capacity: 4,
        placed_cases: 0, placed_members: 0, desired_levels: [0.5, 0.5] },
    ],
  };
  return { board, scores, compat };
}

export const CROSSREFS_F1: CrossRefsDoc = {
  case: "F1",
  linked_cases: [{ id: "F2", co_placed: true }],
  linked_locations: [{ id: "C", co_placed: false }],
};

function applyMove(state: ReturnType<typeof baseBoard>, caseId: string,
                   target: string | null): void {
  const { board, scores, compat } = state;
  board.placement[caseId] = target;
  const doc = board.cases.find((c) => c.id === caseId)!;
  doc.location = target;
  doc.score = target === null ? 0 : scores[caseId][target];
  doc.compatible = target === null ? true : compat[caseId][target];
  board.total_score = board.cases.reduce((sum, c) => sum + c.score, 0);
  for (const loc of board.locations) {
    const here = board.cases.filter((c) => c.location === loc.id);
    loc.placed_cases = here.length;
    loc.placed_members = here.reduce((sum, c) => sum + c.member_count, 0);
  }
  board.violations = board.cases
    .filter((c) => c.location !== null && !c.compatible)
    .map((c) => ({ kind: "incompatible" as const, location: c.location!, case: c.id }));
}

export function fakeService(reoptimizeAs202 = false): FakeService {
  const state = baseBoard();
  const service: FakeService = {
    board: state.board,
    requests: [],
    pendingJobs: new Map(),
    fetchFn: async (input, init) => {
      const url = new URL(input, "http://fake");
      const method = init?.method ?? "GET";
      const path = url.pathname;
      const body = init?.body ? JSON.parse(String(init.body)) : undefined;
      const headers = new Headers(init?.headers);
      const revision = headers.get("X-Expected-Revision") ?? undefined;
      service.requests.push({ method, path, body, revision });

      if (method === "GET" && path === "/sessions/s1") {
        return json(200, { session: service.board });
      }
      if (method === "GET" && path === "/sessions/s1/whatif") {
        const caseId = url.searchParams.get("case")!;
        const target = url.searchParams.get("target");
        const current = service.board.placement[caseId];
        const currentScore = current === null ? 0 : state.scores[caseId][current];
        const pairScore = target === null ? 0 : state.scores[caseId][target];
        return json(200, {
          case: caseId,
          target,
          pair_score: pairScore,
          projected_total: service.board.total_score - currentScore + pairScore,
          compatible: target === null ? true : state.compat[caseId][target],
          reasons: target !== null && !state.compat[caseId][target] ? ["language_mismatch"] : [],
          would_violate_capacity: false,
        });
      }
      if (method === "GET" && path === "/sessions/s1/crossrefs/F1") {
        return json(200, CROSSREFS_F1);
      }
      if (method === "GET" && path.startsWith("/jobs/")) {
        const token = path.slice("/jobs/".length);
        const done = service.pendingJobs.get(token);
        if (done === undefined) {
          return json(202, { status: "pending", token, poll: path });
        }
        service.pendingJobs.delete(token);
        return json(200, { session: done });
      }

      if (method === "POST") {
        if (service.failNextMutationWith) {
          const fail = service.failNextMutationWith;
          service.failNextMutationWith = undefined;
          return json(fail.status, {
            error: { code: fail.code, message: fail.message, details: {} },
          });
        }
        if (service.holdNextMutation) {
          const hold = service.holdNextMutation;
          service.holdNextMutation = undefined;
          await hold();
        }
        if (Number(revision) !== service.board.revision) {
          return json(409, {
            error: {
              code: "CONFLICT",
              message: "stale revision",
              details: { current_revision: service.board.revision },
            },
          });
        }
        if (path === "/sessions/s1/move") {
          applyMove(state, body.case, body.target ?? null);
        } else if (path === "/sessions/s1/lock") {
          const doc = service.board.cases.find((c) => c.id === body.case)!;
          if (doc.locked) {
            doc.locked = false;
            delete service.board.locks[doc.id];
          } else {
            doc.locked = true;
            service.board.locks[doc.id] = doc.location!;
          }
        } else if (path === "/sessions/s1/capacity") {
          const loc = service.board.locations.find((l) => l.id === body.location)!;
          if (body.dimension === "cases") loc.case_capacity += body.delta;
          else loc.member_capacity += body.delta;
        } else if (path === "/sessions/s1/reoptimize") {
          if (reoptimizeAs202) {
            service.board.revision += 1;
            const token = `job-${service.board.revision}`;
            service.pendingJobs.set(token, service.board);
            return json(202, { status: "pending", token, poll: `/jobs/${token}` });
          }
          // No edits since opening: the solve reproduces the same placement.
        } else {
          return json(404, {
            error: { code: "SESSION_NOT_FOUND", message: "no such endpoint", details: {} },
          });
        }
        service.board.revision += 1;
        return json(200, { session: service.board });
      }
      return json(404, {
        error: { code: "SESSION_NOT_FOUND", message: `no route ${path}`, details: {} },
      });
    },
  };
  return service;
}

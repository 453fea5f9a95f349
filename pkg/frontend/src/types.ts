// Wire types for the matchboard service API. The UI holds no state of its
// own beyond these payloads plus transient hover/drag state.

export interface CaseDoc {
  id: string;
  name: string;
  member_count: number;
  employable_count: number;
  location: string | null;
  score: number;
  compatible: boolean;
  locked: boolean;
  has_cross_refs: boolean;
  levels: number[];
}

export interface LocationDoc {
  id: string;
  name: string;
  case_capacity: number;
  member_capacity: number;
  placed_cases: number;
  placed_members: number;
  desired_levels: number[];
}

export interface ViolationDoc {
  kind: "over_capacity" | "incompatible";
  location: string;
  dimension?: "cases" | "members";
  case?: string;
}

export interface BoardDoc {
  session_id: string;
  revision: number;
  total_score: number;
  cross_ref_bonus: number;
  allow_unassigned: boolean;
  mode: string;
  placement: Record<string, string | null>;
  locks: Record<string, string>;
  violations: ViolationDoc[];
  cases: CaseDoc[];
  locations: LocationDoc[];
}

export interface WhatIfDoc {
  case: string;
  target: string | null;
  pair_score: number;
  projected_total: number;
  compatible: boolean;
  reasons: string[];
  would_violate_capacity: boolean;
}

export interface CrossRefsDoc {
  case: string;
  linked_cases: { id: string; co_placed: boolean }[];
  linked_locations: { id: string; co_placed: boolean }[];
}

export interface ApiErrorDoc {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: Record<string, unknown>;

  constructor(status: number, payload: ApiErrorDoc) {
    super(payload.message);
    this.status = status;
    this.code = payload.code;
    this.details = payload.details ?? {};
  }
}

export class ConflictError extends ApiError {
  readonly currentRevision: number;

  constructor(status: number, payload: ApiErrorDoc) {
    super(status, payload);
    this.currentRevision = Number(payload.details?.current_revision ?? -1);
  }
}

"""Human-in-the-loop board: moves, locks, capacity edits, what-ifs, re-solve.

Board states are immutable snapshots; every mutation returns a new state with
revision + 1 and an appended audit event. Replaying the event log from the
opening event reproduces any state exactly. Manual moves are tolerated even
when they break capacity or compatibility; the resulting violations are
flagged, never blocked.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

from .errors import (
    ConflictError,
    DomainError,
    LockUnassignedError,
    MoveLockedError,
    NegativeCapacityError,
    SessionNotFoundError,
    ValidationFailedError,
)
from .model import CROSS_REF_CASE, CROSS_REF_LOCATION, Instance, ScoreMatrix, validate_instance
from .solver import SolveRequest, cross_link_sets, placement_objective, solve

EVENT_OPEN = "open"
EVENT_MOVE = "move"
EVENT_LOCK = "lock"
EVENT_UNLOCK = "unlock"
EVENT_CAPACITY = "capacity"
EVENT_REOPTIMIZE = "reoptimize"

DIMENSION_CASES = "cases"
DIMENSION_MEMBERS = "members"

VIOLATION_OVER_CAPACITY = "over_capacity"
VIOLATION_INCOMPATIBLE = "incompatible"


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Violation:
    kind: str
    location_id: str
    dimension: str | None = None  # over_capacity only
    case_id: str | None = None  # incompatible only

    def to_doc(self) -> dict:
        doc = {"kind": self.kind, "location": self.location_id}
        if self.dimension is not None:
            doc["dimension"] = self.dimension
        if self.case_id is not None:
            doc["case"] = self.case_id
        return doc


@dataclass(frozen=True)
class BoardEvent:
    revision: int
    timestamp: str
    kind: str
    payload: dict
    actor: str

    def __post_init__(self):
        object.__setattr__(self, "payload", dict(self.payload))


@dataclass(frozen=True)
class BoardState:
    session_id: str
    instance: Instance
    matrix: ScoreMatrix
    cross_ref_bonus: float
    allow_unassigned: bool
    placement: dict  # case_id -> location_id or None
    locks: dict  # case_id -> pinned location_id
    capacity_overrides: dict  # location_id -> (C, R)
    total_score: float
    violations: frozenset
    revision: int
    events: tuple

    def __post_init__(self):
        object.__setattr__(self, "placement", dict(self.placement))
        object.__setattr__(self, "locks", dict(self.locks))
        object.__setattr__(self, "capacity_overrides", dict(self.capacity_overrides))
        object.__setattr__(self, "violations", frozenset(self.violations))
        object.__setattr__(self, "events", tuple(self.events))

    def to_request(self) -> SolveRequest:
        return SolveRequest(
            instance=self.instance,
            matrix=self.matrix,
            locks=self.locks,
            capacity_overrides=self.capacity_overrides,
            cross_ref_bonus=self.cross_ref_bonus,
            allow_unassigned=self.allow_unassigned,
        )

    def effective_capacity(self, location_id: str) -> tuple[int, int]:
        if location_id in self.capacity_overrides:
            return self.capacity_overrides[location_id]
        loc = self.instance.location_by_id(location_id)
        return (loc.case_capacity, loc.member_capacity)


@dataclass(frozen=True)
class WhatIf:
    pair_score: float
    projected_total: float
    compatible: bool
    reasons: tuple[str, ...]
    would_violate_capacity: bool


@dataclass(frozen=True)
class CrossRefLink:
    target_id: str
    kind: str  # "case" or "location"
    co_placed: bool


@dataclass(frozen=True)
class CrossRefView:
    case_id: str
    linked_cases: tuple[CrossRefLink, ...]
    linked_locations: tuple[CrossRefLink, ...]


def compute_violations(state: BoardState) -> frozenset:
    """Recompute the full violation set from the placement alone."""
    members = {c.id: c.member_count for c in state.instance.cases}
    placed_c: dict[str, int] = {}
    placed_r: dict[str, int] = {}
    found = set()
    for cid, lid in state.placement.items():
        if lid is None:
            continue
        placed_c[lid] = placed_c.get(lid, 0) + 1
        placed_r[lid] = placed_r.get(lid, 0) + members[cid]
        if not state.matrix.compatible_pair(cid, lid):
            found.add(Violation(VIOLATION_INCOMPATIBLE, location_id=lid, case_id=cid))
    for lid in placed_c:
        cap_c, cap_r = state.effective_capacity(lid)
        if placed_c[lid] > cap_c:
            found.add(Violation(VIOLATION_OVER_CAPACITY, location_id=lid, dimension=DIMENSION_CASES))
        if placed_r[lid] > cap_r:
            found.add(Violation(VIOLATION_OVER_CAPACITY, location_id=lid, dimension=DIMENSION_MEMBERS))
    return frozenset(found)


def recompute_total(state: BoardState) -> float:
    case_pairs, location_links = cross_link_sets(state.instance)
    return placement_objective(state.placement, state.matrix, state.cross_ref_bonus,
                               case_pairs, location_links)


def _link_delta(state: BoardState, case_id: str, old: str | None, new: str | None) -> int:
    """Change in satisfied cross-reference links if case_id moves old -> new."""
    case = state.instance.case_by_id(case_id)
    case_ids = {c.id for c in state.instance.cases}
    loc_ids = {l.id for l in state.instance.locations}
    partners = set()
    for c in state.instance.cases:
        for ref in c.cross_refs:
            if ref.kind == CROSS_REF_CASE and ref.target_id == case_id and c.id != case_id:
                partners.add(c.id)
    for ref in case.cross_refs:
        if ref.kind == CROSS_REF_CASE and ref.target_id in case_ids and ref.target_id != case_id:
            partners.add(ref.target_id)
    delta = 0
    for other in partners:
        at = state.placement.get(other)
        if at is not None:
            delta += int(new == at) - int(old == at)
    for ref in case.cross_refs:
        if ref.kind == CROSS_REF_LOCATION and ref.target_id in loc_ids:
            delta += int(new == ref.target_id) - int(old == ref.target_id)
    return delta


def _append(state: BoardState, kind: str, payload: dict, actor: str, **changes) -> BoardState:
    revision = state.revision + 1
    event = BoardEvent(revision=revision, timestamp=_utcnow(), kind=kind,
                       payload=payload, actor=actor)
    return replace(state, revision=revision, events=state.events + (event,), **changes)


def open_session(instance: Instance, matrix: ScoreMatrix, *, cross_ref_bonus: float = 0.0,
                 allow_unassigned: bool = True, session_id: str | None = None,
                 actor: str = "system") -> BoardState:
    """Solve the pristine request and put the optimum on the board at revision 0."""
    report = validate_instance(instance)
    if not report.ok:
        raise ValidationFailedError(
            f"instance failed validation with {len(report.errors)} error(s)", report=report)
    request = SolveRequest(instance=instance, matrix=matrix,
                           cross_ref_bonus=cross_ref_bonus, allow_unassigned=allow_unassigned)
    assignment = solve(request)
    state = BoardState(
        session_id=session_id or uuid.uuid4().hex,
        instance=instance,
        matrix=matrix,
        cross_ref_bonus=cross_ref_bonus,
        allow_unassigned=allow_unassigned,
        placement=assignment.placement,
        locks={},
        capacity_overrides={},
        total_score=assignment.objective,
        violations=frozenset(),
        revision=0,
        events=(BoardEvent(
            revision=0, timestamp=_utcnow(), kind=EVENT_OPEN,
            payload={"cross_ref_bonus": cross_ref_bonus, "allow_unassigned": allow_unassigned},
            actor=actor),),
    )
    return replace(state, violations=compute_violations(state))


def apply_move(state: BoardState, case_id: str, target: str | None,
               actor: str = "user") -> BoardState:
    """Move a case (to a location or to unassigned), tolerating violations."""
    state.matrix.case_index(case_id)
    if target is not None:
        state.matrix.location_index(target)
    if case_id in state.locks:
        raise MoveLockedError(f"case {case_id!r} is locked; unlock before moving", case=case_id)
    old = state.placement[case_id]
    new_total = (state.total_score
                 - state.matrix.score_of(case_id, old)
                 + state.matrix.score_of(case_id, target)
                 + state.cross_ref_bonus * _link_delta(state, case_id, old, target))
    placement = dict(state.placement)
    placement[case_id] = target
    moved = _append(state, EVENT_MOVE, {"case": case_id, "target": target}, actor,
                    placement=placement, total_score=new_total)
    return replace(moved, violations=compute_violations(moved))


def whatif_score(state: BoardState, case_id: str, target: str | None) -> WhatIf:
    """Pure query: the exact totals apply_move would produce, with no state change."""
    state.matrix.case_index(case_id)
    old = state.placement[case_id]
    pair_score = state.matrix.score_of(case_id, target)
    projected = (state.total_score
                 - state.matrix.score_of(case_id, old)
                 + pair_score
                 + state.cross_ref_bonus * _link_delta(state, case_id, old, target))
    if target is None:
        return WhatIf(pair_score=0.0, projected_total=projected, compatible=True,
                      reasons=(), would_violate_capacity=False)
    compatible = state.matrix.compatible_pair(case_id, target)
    reasons = state.matrix.reasons_for(case_id, target)
    members = {c.id: c.member_count for c in state.instance.cases}
    placed_c = 0
    placed_r = 0
    for cid, lid in state.placement.items():
        if lid == target and cid != case_id:
            placed_c += 1
            placed_r += members[cid]
    cap_c, cap_r = state.effective_capacity(target)
    would_violate = placed_c + 1 > cap_c or placed_r + members[case_id] > cap_r
    return WhatIf(pair_score=pair_score, projected_total=projected, compatible=compatible,
                  reasons=reasons, would_violate_capacity=would_violate)


def toggle_lock(state: BoardState, case_id: str, actor: str = "user") -> BoardState:
    """Pin a placed case to its current location, or release an existing pin."""
    state.matrix.case_index(case_id)
    locks = dict(state.locks)
    if case_id in locks:
        del locks[case_id]
        return _append(state, EVENT_UNLOCK, {"case": case_id}, actor, locks=locks)
    location = state.placement[case_id]
    if location is None:
        raise LockUnassignedError(f"case {case_id!r} is unassigned and cannot be locked",
                                  case=case_id)
    locks[case_id] = location
    return _append(state, EVENT_LOCK, {"case": case_id, "location": location}, actor, locks=locks)


def adjust_capacity(state: BoardState, location_id: str, dimension: str, delta: int,
                    actor: str = "user") -> BoardState:
    """Shift one capacity dimension of a location by delta (result must stay >= 0)."""
    if dimension not in (DIMENSION_CASES, DIMENSION_MEMBERS):
        raise DomainError(f"unknown capacity dimension {dimension!r}")
    cap_c, cap_r = state.effective_capacity(location_id)
    if dimension == DIMENSION_CASES:
        cap_c += delta
    else:
        cap_r += delta
    if cap_c < 0 or cap_r < 0:
        raise NegativeCapacityError(
            f"capacity of {location_id!r} would become negative", location=location_id)
    overrides = dict(state.capacity_overrides)
    overrides[location_id] = (cap_c, cap_r)
    edited = _append(state, EVENT_CAPACITY,
                     {"location": location_id, "dimension": dimension, "delta": delta},
                     actor, capacity_overrides=overrides)
    return replace(edited, violations=compute_violations(edited))


def reoptimize(state: BoardState, actor: str = "user") -> BoardState:
    """Re-solve under current locks, capacity overrides, and bonus settings.

    Unlocked cases are re-placed optimally; locked cases stay pinned even when
    incompatible. InfeasibleLocksError propagates with the violating locations.
    """
    assignment = solve(state.to_request())
    reopt = _append(state, EVENT_REOPTIMIZE, {}, actor,
                    placement=assignment.placement, total_score=assignment.objective)
    return replace(reopt, violations=compute_violations(reopt))


def cross_reference_view(state: BoardState, case_id: str) -> CrossRefView:
    """Resolve a case's declared links and whether each is currently co-placed."""
    case = state.instance.case_by_id(case_id)
    at = state.placement.get(case_id)
    cases = []
    locations = []
    for ref in case.cross_refs:
        if ref.kind == CROSS_REF_CASE:
            other = state.placement.get(ref.target_id)
            co = at is not None and other == at
            cases.append(CrossRefLink(ref.target_id, CROSS_REF_CASE, co))
        else:
            locations.append(CrossRefLink(ref.target_id, ref.kind, at == ref.target_id))
    return CrossRefView(case_id=case_id, linked_cases=tuple(cases),
                        linked_locations=tuple(locations))


def replay_events(instance: Instance, matrix: ScoreMatrix, events, *,
                  session_id: str, upto_revision: int | None = None) -> BoardState:
    """Rebuild a board by replaying its own audit log, preserving the original events.

    `upto_revision` truncates the replay (the undo mechanism).
    """
    events = tuple(events)
    if not events or events[0].kind != EVENT_OPEN:
        raise DomainError("event log must start with an open event")
    head = events[0]
    state = open_session(
        instance, matrix,
        cross_ref_bonus=head.payload.get("cross_ref_bonus", 0.0),
        allow_unassigned=head.payload.get("allow_unassigned", True),
        session_id=session_id, actor=head.actor)
    state = replace(state, events=(head,))
    for event in events[1:]:
        if upto_revision is not None and event.revision > upto_revision:
            break
        if event.kind == EVENT_MOVE:
            state = apply_move(state, event.payload["case"], event.payload["target"], event.actor)
        elif event.kind in (EVENT_LOCK, EVENT_UNLOCK):
            state = toggle_lock(state, event.payload["case"], event.actor)
        elif event.kind == EVENT_CAPACITY:
            state = adjust_capacity(state, event.payload["location"],
                                    event.payload["dimension"], event.payload["delta"],
                                    event.actor)
        elif event.kind == EVENT_REOPTIMIZE:
            state = reoptimize(state, event.actor)
        else:
            raise DomainError(f"cannot replay event kind {event.kind!r}")
        state = replace(state, events=state.events[:-1] + (event,))
    return state


class SessionManager:
    """Per-session serialized writes with optimistic revision checks."""

    def __init__(self):
        self._sessions: dict[str, BoardState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def register(self, state: BoardState) -> BoardState:
        with self._session_lock(state.session_id):
            self._sessions[state.session_id] = state
        return state

    def get(self, session_id: str) -> BoardState:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionNotFoundError(f"no session {session_id!r}", session=session_id) from None

    def ids(self) -> list[str]:
        return sorted(self._sessions)

    def mutate(self, session_id: str, expected_revision: int, fn) -> BoardState:
        """Apply fn under the session lock; reject stale expected revisions."""
        with self._session_lock(session_id):
            current = self.get(session_id)
            if expected_revision != current.revision:
                raise ConflictError(
                    f"expected revision {expected_revision}, session is at {current.revision}",
                    current_revision=current.revision)
            updated = fn(current)
            self._sessions[session_id] = updated
            return updated

"""Exact solver for two-dimensionally capacitated assignment with locks.

Each case is placed at most once (exactly once when unassigned placements are
disallowed); locations cap both the number of cases (C) and the number of
members (R). Locked cases are fixed regardless of compatibility; unlocked
cases may only go to compatible locations. Co-placing cross-referenced cases
earns an optional bonus per satisfied link.

The exact method is depth-first branch-and-bound over cases in decreasing
best-score-spread order, bounded by the capacity-relaxed sum of per-case best
scores plus the maximal possible bonuses. Ties in the objective are broken by
the lexicographically smallest placement (cases in id order, locations by id,
unassigned last), so equal requests yield identical assignments.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

from .errors import DomainError, InfeasibleError, InfeasibleLocksError, SizeGuardError
from .model import CROSS_REF_CASE, CROSS_REF_LOCATION, Instance, ScoreMatrix

STATUS_OPTIMAL = "optimal"
STATUS_CANCELLED = "cancelled"
STATUS_HEURISTIC = "heuristic"
STATUS_INFEASIBLE_LOCKS = "infeasible_locks"

# Pruning guard against float summation order; strictly smaller than any
# meaningful score difference, strictly larger than accumulated rounding.
BOUND_EPS = 1e-9

ORACLE_MAX_CASES = 8
ORACLE_MAX_LOCATIONS = 4


@dataclass(frozen=True)
class SolveRequest:
    instance: Instance
    matrix: ScoreMatrix
    locks: dict = field(default_factory=dict)  # case_id -> location_id
    capacity_overrides: dict = field(default_factory=dict)  # location_id -> (C, R)
    cross_ref_bonus: float = 0.0
    allow_unassigned: bool = True

    def __post_init__(self):
        object.__setattr__(self, "locks", dict(self.locks))
        object.__setattr__(self, "capacity_overrides",
                           {k: (int(v[0]), int(v[1])) for k, v in self.capacity_overrides.items()})

    def validate(self) -> None:
        inst = self.instance
        case_ids = tuple(c.id for c in inst.cases)
        loc_ids = tuple(l.id for l in inst.locations)
        if self.matrix.case_ids != case_ids or self.matrix.location_ids != loc_ids:
            raise DomainError("score matrix does not match the instance's cases/locations")
        for cid, lid in self.locks.items():
            if cid not in case_ids:
                raise DomainError(f"lock references unknown case {cid!r}", entity=cid)
            if lid not in loc_ids:
                raise DomainError(f"lock references unknown location {lid!r}", entity=lid)
        for lid, (cap_c, cap_r) in self.capacity_overrides.items():
            if lid not in loc_ids:
                raise DomainError(f"override references unknown location {lid!r}", entity=lid)
            if cap_c < 0 or cap_r < 0:
                raise DomainError(f"override for {lid!r} must be non-negative")
        if self.cross_ref_bonus < 0:
            raise DomainError("cross_ref_bonus must be >= 0")

    def effective_capacity(self, location_id: str) -> tuple[int, int]:
        if location_id in self.capacity_overrides:
            return self.capacity_overrides[location_id]
        loc = self.instance.location_by_id(location_id)
        return (loc.case_capacity, loc.member_capacity)


@dataclass(frozen=True)
class Assignment:
    placement: dict  # case_id -> location_id or None (unassigned)
    objective: float
    status: str
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "placement", dict(self.placement))
        object.__setattr__(self, "stats", dict(self.stats))


def cross_link_sets(instance: Instance) -> tuple[tuple[tuple[str, str], ...], tuple[tuple[str, str], ...]]:
    """Canonical (case, case) pairs and (case, location) links from cross_refs.

    A case pair exists if either member references the other; pairs are
    deduplicated and sorted so bonus counting is order-independent.
    """
    pairs: set[tuple[str, str]] = set()
    links: set[tuple[str, str]] = set()
    case_ids = {c.id for c in instance.cases}
    loc_ids = {l.id for l in instance.locations}
    for c in instance.cases:
        for ref in c.cross_refs:
            if ref.kind == CROSS_REF_CASE and ref.target_id in case_ids and ref.target_id != c.id:
                pairs.add(tuple(sorted((c.id, ref.target_id))))
            elif ref.kind == CROSS_REF_LOCATION and ref.target_id in loc_ids:
                links.add((c.id, ref.target_id))
    return tuple(sorted(pairs)), tuple(sorted(links))


def count_satisfied_links(placement: dict, case_pairs, location_links) -> int:
    n = 0
    for a, b in case_pairs:
        la, lb = placement.get(a), placement.get(b)
        if la is not None and la == lb:
            n += 1
    for cid, lid in location_links:
        if placement.get(cid) == lid:
            n += 1
    return n


def placement_objective(placement: dict, matrix: ScoreMatrix, cross_ref_bonus: float,
                        case_pairs, location_links) -> float:
    """Total score of a placement, summed in canonical (case id) order."""
    total = 0.0
    for cid in sorted(placement):
        total += matrix.score_of(cid, placement[cid])
    if cross_ref_bonus:
        total += cross_ref_bonus * count_satisfied_links(placement, case_pairs, location_links)
    return total


def placement_key(placement: dict) -> tuple:
    """Deterministic tie-break key: unassigned sorts after every location id."""
    return tuple(
        (1, "") if placement[cid] is None else (0, placement[cid])
        for cid in sorted(placement)
    )


def _check_lock_capacity(request: SolveRequest) -> None:
    used_c: dict[str, int] = {}
    used_r: dict[str, int] = {}
    for cid, lid in request.locks.items():
        case = request.instance.case_by_id(cid)
        used_c[lid] = used_c.get(lid, 0) + 1
        used_r[lid] = used_r.get(lid, 0) + case.member_count
    violating = []
    for lid in used_c:
        cap_c, cap_r = request.effective_capacity(lid)
        if used_c[lid] > cap_c or used_r[lid] > cap_r:
            violating.append(lid)
    if violating:
        raise InfeasibleLocksError(
            f"locked cases exceed capacity at {sorted(violating)}",
            locations=sorted(violating))


def _admissible_options(request: SolveRequest, case) -> list[tuple[float, int, str]]:
    """Compatible (score, column, location_id) options, best score first."""
    matrix = request.matrix
    i = matrix.case_index(case.id)
    options = []
    for j, lid in enumerate(matrix.location_ids):
        if matrix.compatible[i, j]:
            options.append((float(matrix.scores[i, j]), j, lid))
    options.sort(key=lambda o: (-o[0], o[2]))
    return options


def solve(request: SolveRequest, cancel=None) -> Assignment:
    """Return the maximum-objective feasible assignment.

    `cancel` is polled between node expansions; when it returns True the
    incumbent is returned with status "cancelled". Raises InfeasibleLocksError
    when the locks alone violate capacity, InfeasibleError when unassigned
    placements are disallowed and no feasible completion exists.
    """
    t0 = time.perf_counter()
    request.validate()
    _check_lock_capacity(request)
    inst, matrix = request.instance, request.matrix
    case_pairs, location_links = cross_link_sets(inst)
    bonus = request.cross_ref_bonus

    cap_c = []
    cap_r = []
    for loc in inst.locations:
        c, r = request.effective_capacity(loc.id)
        cap_c.append(c)
        cap_r.append(r)
    members = {c.id: c.member_count for c in inst.cases}
    placement: dict[str, str | None] = {}
    for cid, lid in request.locks.items():
        j = matrix.location_index(lid)
        cap_c[j] -= 1
        cap_r[j] -= members[cid]
        placement[cid] = lid

    free = [c for c in inst.cases if c.id not in request.locks]
    options = {}
    spreads = {}
    best_score = {}
    for case in free:
        opts = _admissible_options(request, case)
        values = [o[0] for o in opts]
        if request.allow_unassigned:
            values.append(0.0)
        if not values:
            raise InfeasibleError(
                f"case {case.id!r} has no compatible location and unassigned is disallowed",
                case=case.id)
        spreads[case.id] = max(values) - min(values)
        best_score[case.id] = max(values)
        options[case.id] = opts
    order = sorted(free, key=lambda c: (-spreads[c.id], c.id))

    n = len(order)
    suffix_best = [0.0] * (n + 1)
    for d in range(n - 1, -1, -1):
        suffix_best[d] = suffix_best[d + 1] + best_score[order[d].id]

    # Link bookkeeping for the bonus part of the bound. A link is pending
    # while it might still be satisfied, counted optimistically.
    pair_by_case: dict[str, list[int]] = {}
    pair_state = []  # 0 pending, 1 satisfied, 2 dead
    for idx, (a, b) in enumerate(case_pairs):
        pair_state.append(0)
        pair_by_case.setdefault(a, []).append(idx)
        pair_by_case.setdefault(b, []).append(idx)
    link_by_case: dict[str, list[int]] = {}
    link_state = []
    for idx, (cid, lid) in enumerate(location_links):
        link_state.append(0)
        link_by_case.setdefault(cid, []).append(idx)

    partial = 0.0
    pending = len(pair_state) + len(link_state)
    realized = 0
    for cid in sorted(request.locks):
        partial += matrix.score_of(cid, placement[cid])
    for idx, (a, b) in enumerate(case_pairs):
        if a in placement and b in placement:
            pending -= 1
            if placement[a] == placement[b]:
                pair_state[idx] = 1
                realized += 1
            else:
                pair_state[idx] = 2
    for idx, (cid, lid) in enumerate(location_links):
        if cid in placement:
            pending -= 1
            if placement[cid] == lid:
                link_state[idx] = 1
                realized += 1
            else:
                link_state[idx] = 2

    root_bound = partial + suffix_best[0] + bonus * pending + bonus * realized

    best_placement = None
    best_objective = -1.0
    best_key = None
    warm = greedy_warm_start(request)
    if request.allow_unassigned or all(v is not None for v in warm.placement.values()):
        best_placement = dict(warm.placement)
        best_objective = warm.objective
        best_key = placement_key(warm.placement)

    nodes = 0
    cancelled = False
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 4 * n + 1000))

    def dfs(depth: int, partial: float, pending: int, realized: int) -> None:
        nonlocal nodes, best_placement, best_objective, best_key, cancelled
        nodes += 1
        if cancel is not None and cancel():
            cancelled = True
        if cancelled:
            return
        if best_placement is not None:
            bound = partial + suffix_best[depth] + bonus * (pending + realized)
            if bound < best_objective - BOUND_EPS:
                return
        if depth == n:
            objective = placement_objective(placement, matrix, bonus, case_pairs, location_links)
            key = placement_key(placement)
            if (best_placement is None or objective > best_objective
                    or (objective == best_objective and key < best_key)):
                best_placement = dict(placement)
                best_objective = objective
                best_key = key
            return
        case = order[depth]
        cid = case.id
        need = members[cid]
        pairs_here = pair_by_case.get(cid, ())
        links_here = link_by_case.get(cid, ())

        def decide(target: str | None, score: float) -> None:
            placement[cid] = target
            touched_pairs = []
            touched_links = []
            d_pending = 0
            d_realized = 0
            for idx in pairs_here:
                if pair_state[idx] != 0:
                    continue
                a, b = case_pairs[idx]
                other = b if a == cid else a
                if other in placement:
                    new_state = 1 if (target is not None and placement[other] == target) else 2
                    touched_pairs.append(idx)
                    pair_state[idx] = new_state
                    d_pending -= 1
                    if new_state == 1:
                        d_realized += 1
                elif target is None:
                    touched_pairs.append(idx)
                    pair_state[idx] = 2
                    d_pending -= 1
            for idx in links_here:
                if link_state[idx] != 0:
                    continue
                new_state = 1 if target == location_links[idx][1] else 2
                touched_links.append(idx)
                link_state[idx] = new_state
                d_pending -= 1
                if new_state == 1:
                    d_realized += 1
            dfs(depth + 1, partial + score, pending + d_pending, realized + d_realized)
            for idx in touched_pairs:
                pair_state[idx] = 0
            for idx in touched_links:
                link_state[idx] = 0
            del placement[cid]

        for score, j, lid in options[cid]:
            if cancelled:
                break
            if cap_c[j] >= 1 and cap_r[j] >= need:
                cap_c[j] -= 1
                cap_r[j] -= need
                decide(lid, score)
                cap_c[j] += 1
                cap_r[j] += need
        if request.allow_unassigned and not cancelled:
            decide(None, 0.0)

    dfs(0, partial, pending, realized)

    elapsed = time.perf_counter() - t0
    if best_placement is None:
        if cancelled:
            raise InfeasibleError("cancelled before any feasible completion was found")
        raise InfeasibleError("no feasible completion exists with unassigned placements disallowed")
    return Assignment(
        placement=best_placement,
        objective=best_objective,
        status=STATUS_CANCELLED if cancelled else STATUS_OPTIMAL,
        stats={"nodes_explored": nodes, "best_bound": root_bound, "elapsed": elapsed},
    )


def brute_force_oracle(request: SolveRequest) -> Assignment:
    """Enumerate every placement vector; reference implementation for solve.

    Guard-railed to 8 cases and 4 locations.
    """
    t0 = time.perf_counter()
    request.validate()
    inst, matrix = request.instance, request.matrix
    if len(inst.cases) > ORACLE_MAX_CASES or len(inst.locations) > ORACLE_MAX_LOCATIONS:
        raise SizeGuardError(
            f"oracle accepts at most {ORACLE_MAX_CASES} cases and "
            f"{ORACLE_MAX_LOCATIONS} locations, got "
            f"{len(inst.cases)}x{len(inst.locations)}")
    _check_lock_capacity(request)
    case_pairs, location_links = cross_link_sets(inst)

    domains = []
    for case in inst.cases:
        if case.id in request.locks:
            domains.append([request.locks[case.id]])
            continue
        targets = [lid for _, _, lid in _admissible_options(request, case)]
        if request.allow_unassigned:
            targets.append(None)
        domains.append(targets)

    members = {c.id: c.member_count for c in inst.cases}
    eff = {l.id: request.effective_capacity(l.id) for l in inst.locations}

    def feasible(placement: dict) -> bool:
        used_c: dict[str, int] = {}
        used_r: dict[str, int] = {}
        for cid, lid in placement.items():
            if lid is None:
                continue
            used_c[lid] = used_c.get(lid, 0) + 1
            used_r[lid] = used_r.get(lid, 0) + members[cid]
        return all(used_c[lid] <= eff[lid][0] and used_r[lid] <= eff[lid][1] for lid in used_c)

    best = None
    best_objective = -1.0
    best_key = None
    examined = 0
    case_ids = [c.id for c in inst.cases]

    def enumerate_from(idx: int, placement: dict) -> None:
        nonlocal best, best_objective, best_key, examined
        if idx == len(case_ids):
            examined += 1
            if not feasible(placement):
                return
            objective = placement_objective(placement, matrix, request.cross_ref_bonus,
                                            case_pairs, location_links)
            key = placement_key(placement)
            if (best is None or objective > best_objective
                    or (objective == best_objective and key < best_key)):
                best = dict(placement)
                best_objective = objective
                best_key = key
            return
        for target in domains[idx]:
            placement[case_ids[idx]] = target
            enumerate_from(idx + 1, placement)
            del placement[case_ids[idx]]

    enumerate_from(0, {})
    elapsed = time.perf_counter() - t0
    if best is None:
        raise InfeasibleError("no feasible completion exists with unassigned placements disallowed")
    return Assignment(
        placement=best,
        objective=best_objective,
        status=STATUS_OPTIMAL,
        stats={"nodes_explored": examined, "best_bound": best_objective, "elapsed": elapsed},
    )


def greedy_warm_start(request: SolveRequest) -> Assignment:
    """Feasible lower bound: place cases best-score-first into the best open slot.

    Cases that fit nowhere stay unassigned (even when the request disallows
    it; callers needing strict completeness must check).
    """
    t0 = time.perf_counter()
    request.validate()
    _check_lock_capacity(request)
    inst, matrix = request.instance, request.matrix
    case_pairs, location_links = cross_link_sets(inst)

    cap = {l.id: list(request.effective_capacity(l.id)) for l in inst.locations}
    placement: dict[str, str | None] = {}
    for cid, lid in request.locks.items():
        case = inst.case_by_id(cid)
        cap[lid][0] -= 1
        cap[lid][1] -= case.member_count
        placement[cid] = lid

    free = [c for c in inst.cases if c.id not in request.locks]
    opts = {c.id: _admissible_options(request, c) for c in free}
    best = {c.id: (opts[c.id][0][0] if opts[c.id] else 0.0) for c in free}
    for case in sorted(free, key=lambda c: (-best[c.id], c.id)):
        chosen = None
        for score, j, lid in opts[case.id]:
            if cap[lid][0] >= 1 and cap[lid][1] >= case.member_count:
                chosen = lid
                break
        if chosen is not None:
            cap[chosen][0] -= 1
            cap[chosen][1] -= case.member_count
        placement[case.id] = chosen

    objective = placement_objective(placement, matrix, request.cross_ref_bonus,
                                    case_pairs, location_links)
    return Assignment(
        placement=placement,
        objective=objective,
        status=STATUS_HEURISTIC,
        stats={"nodes_explored": 0, "best_bound": objective,
               "elapsed": time.perf_counter() - t0},
    )


def subscription_report(assignment: Assignment, instance: Instance,
                        capacity_overrides: dict | None = None) -> list[dict]:
    """Per-location occupancy: placed cases/members vs effective capacity.

    A location is full when either dimension is at or over capacity, and
    undersubscribed when less than half its case capacity is used.
    """
    overrides = capacity_overrides or {}
    members = {c.id: c.member_count for c in instance.cases}
    placed_c: dict[str, int] = {}
    placed_r: dict[str, int] = {}
    for cid, lid in assignment.placement.items():
        if lid is None:
            continue
        placed_c[lid] = placed_c.get(lid, 0) + 1
        placed_r[lid] = placed_r.get(lid, 0) + members[cid]
    rows = []
    for loc in sorted(instance.locations, key=lambda l: l.id):
        cap_c, cap_r = overrides.get(loc.id, (loc.case_capacity, loc.member_capacity))
        pc = placed_c.get(loc.id, 0)
        pr = placed_r.get(loc.id, 0)
        fill = pc / cap_c if cap_c > 0 else 1.0
        rows.append({
            "location_id": loc.id,
            "placed_cases": pc,
            "placed_members": pr,
            "case_capacity": cap_c,
            "member_capacity": cap_r,
            "fill_ratio": fill,
            "undersubscribed": fill < 0.5,
            "full": pc >= cap_c or pr >= cap_r,
        })
    return rows

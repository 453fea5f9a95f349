"""Travel-minimizing day scheduler for geo-located meetings.

Groups meetings into at most `days` day groups so that each used day respects
a min/max meeting count and a total-minutes cap, while minimizing the summed
great-circle distance from each meeting to its day's centroid. The search is
seeded k-means assignment, constraint repair, then best-improvement local
search, restarted a bounded number of times and merged by lowest cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError

EARTH_RADIUS_KM = 6371.0

VIOLATION_TOO_MANY_PER_DAY = "TOO_MANY_PER_DAY"
VIOLATION_MEETING_TOO_LONG = "MEETING_TOO_LONG"
VIOLATION_TOTAL_TIME_EXCEEDED = "TOTAL_TIME_EXCEEDED"
VIOLATION_COUNT_PARTITION = "COUNT_PARTITION_IMPOSSIBLE"

DEFAULT_RESTARTS = 8
_KMEANS_MAX_ITER = 25
_IMPROVE_EPS = 1e-9


@dataclass(frozen=True)
class Meeting:
    client_id: str
    latitude: float
    longitude: float
    duration_minutes: int
    selected: bool = True

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0) or not (-180.0 <= self.longitude <= 180.0):
            raise DomainError(f"meeting {self.client_id!r} has out-of-range coordinates")
        if self.duration_minutes <= 0:
            raise DomainError(f"meeting {self.client_id!r} must have a positive duration")


@dataclass(frozen=True)
class ScheduleConfig:
    days: int
    min_per_day: int
    max_per_day: int
    max_minutes_per_day: int

    def __post_init__(self):
        if self.days < 1:
            raise DomainError(f"days must be >= 1, got {self.days}")
        if not (0 <= self.min_per_day <= self.max_per_day):
            raise DomainError(
                f"need 0 <= min_per_day <= max_per_day, got {self.min_per_day}/{self.max_per_day}")
        if self.max_minutes_per_day <= 0:
            raise DomainError("max_minutes_per_day must be positive")


@dataclass(frozen=True)
class Schedule:
    day_groups: tuple  # one tuple of client ids per day; empty days allowed
    cost: float
    feasible: bool
    violations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "day_groups", tuple(tuple(g) for g in self.day_groups))
        object.__setattr__(self, "violations", tuple(self.violations))


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple
    details: dict


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometers (Earth radius 6371.0 km)."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def deduplicate(meetings) -> tuple[list[Meeting], int]:
    """Keep the first meeting per client_id; return survivors and removed count."""
    seen = set()
    unique = []
    removed = 0
    for m in meetings:
        if m.client_id in seen:
            removed += 1
        else:
            seen.add(m.client_id)
            unique.append(m)
    return unique, removed


def check_feasibility(meetings, config: ScheduleConfig) -> FeasibilityReport:
    """Necessary-condition screen: counts, single durations, total minutes.

    Passing this screen does not guarantee a feasible schedule exists; the
    builder may still fail on the combined packing.
    """
    meetings = list(meetings)
    n = len(meetings)
    violations = []
    details = {"meeting_count": n}
    if n > config.days * config.max_per_day:
        violations.append(VIOLATION_TOO_MANY_PER_DAY)
    too_long = sorted(m.client_id for m in meetings
                      if m.duration_minutes > config.max_minutes_per_day)
    if too_long:
        violations.append(VIOLATION_MEETING_TOO_LONG)
        details["too_long"] = too_long
    total = sum(m.duration_minutes for m in meetings)
    details["total_minutes"] = total
    if total > config.days * config.max_minutes_per_day:
        violations.append(VIOLATION_TOTAL_TIME_EXCEEDED)
    if n > 0:
        usable_days = [k for k in range(1, config.days + 1)
                       if k * config.min_per_day <= n <= k * config.max_per_day]
        details["usable_day_counts"] = usable_days
        if not usable_days:
            violations.append(VIOLATION_COUNT_PARTITION)
    return FeasibilityReport(feasible=not violations, violations=tuple(violations),
                             details=details)


def _group_cost(points: list[tuple[float, float]]) -> float:
    if len(points) <= 1:
        return 0.0
    lat_c = sum(p[0] for p in points) / len(points)
    lon_c = sum(p[1] for p in points) / len(points)
    return sum(haversine_km(lat, lon, lat_c, lon_c) for lat, lon in points)


def schedule_cost(schedule: Schedule, meetings) -> float:
    """Sum of member-to-centroid distances over all used days, in kilometers."""
    by_id = {m.client_id: m for m in meetings}
    total = 0.0
    for group in schedule.day_groups:
        points = []
        for cid in group:
            if cid not in by_id:
                raise DomainError(f"schedule references unknown meeting {cid!r}")
            m = by_id[cid]
            points.append((m.latitude, m.longitude))
        total += _group_cost(points)
    return total


def _groups_feasible(groups, by_id, config: ScheduleConfig) -> bool:
    for group in groups:
        if not group:
            continue
        if not (config.min_per_day <= len(group) <= config.max_per_day):
            return False
        if sum(by_id[cid].duration_minutes for cid in group) > config.max_minutes_per_day:
            return False
    return True


def _kmeans_groups(meetings, days: int, rng) -> list[list[str]]:
    n = len(meetings)
    coords = np.array([(m.latitude, m.longitude) for m in meetings])
    k = min(days, n)
    centroid_idx = rng.choice(n, size=k, replace=False)
    centroids = coords[centroid_idx].astype(float)
    labels = np.zeros(n, dtype=int)
    for _ in range(_KMEANS_MAX_ITER):
        new_labels = np.array([
            int(np.argmin([haversine_km(lat, lon, c[0], c[1]) for c in centroids]))
            for lat, lon in coords
        ])
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            member_coords = coords[labels == c]
            if len(member_coords):
                centroids[c] = member_coords.mean(axis=0)
    groups = [[] for _ in range(days)]
    for i, m in enumerate(meetings):
        groups[labels[i]].append(m.client_id)
    return groups


def _repair(groups, by_id, config: ScheduleConfig) -> list[list[str]] | None:
    """Push groups into the count/minutes window; None when stuck."""

    def minutes(g):
        return sum(by_id[cid].duration_minutes for cid in g)

    def centroid(g):
        pts = [(by_id[cid].latitude, by_id[cid].longitude) for cid in g]
        return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))

    def room_for(g, meeting) -> bool:
        return (len(g) < config.max_per_day
                and minutes(g) + meeting.duration_minutes <= config.max_minutes_per_day)

    groups = [list(g) for g in groups]
    for _ in range(4 * len(by_id) + 2 * config.days + 20):
        overfull = [i for i, g in enumerate(groups)
                    if len(g) > config.max_per_day or minutes(g) > config.max_minutes_per_day]
        if overfull:
            i = overfull[0]
            cen = centroid(groups[i])
            outlier = max(groups[i], key=lambda cid: (
                haversine_km(by_id[cid].latitude, by_id[cid].longitude, cen[0], cen[1]), cid))
            meeting = by_id[outlier]
            candidates = [j for j, g in enumerate(groups) if j != i and room_for(g, meeting)]
            if not candidates:
                return None
            j = min(candidates, key=lambda j: (
                0.0 if not groups[j] else haversine_km(
                    meeting.latitude, meeting.longitude, *centroid(groups[j])), j))
            groups[i].remove(outlier)
            groups[j].append(outlier)
            continue
        underfull = [i for i, g in enumerate(groups) if g and len(g) < config.min_per_day]
        if not underfull:
            return groups
        i = underfull[0]
        cen = centroid(groups[i])
        donors = [(j, cid) for j, g in enumerate(groups) if j != i
                  and len(g) > config.min_per_day for cid in g
                  if minutes(groups[i]) + by_id[cid].duration_minutes <= config.max_minutes_per_day]
        if donors:
            j, cid = min(donors, key=lambda jc: (
                haversine_km(by_id[jc[1]].latitude, by_id[jc[1]].longitude, cen[0], cen[1]),
                jc[0], jc[1]))
            groups[j].remove(cid)
            groups[i].append(cid)
            continue
        # No donor can spare a meeting: disband this day instead.
        moved_all = True
        for cid in list(groups[i]):
            meeting = by_id[cid]
            candidates = [j for j, g in enumerate(groups) if j != i and g and room_for(g, meeting)]
            if not candidates:
                moved_all = False
                break
            j = min(candidates, key=lambda j: (
                haversine_km(meeting.latitude, meeting.longitude, *centroid(groups[j])), j))
            groups[i].remove(cid)
            groups[j].append(cid)
        if not moved_all:
            return None
    return None


def _search_locally(groups, by_id, config: ScheduleConfig) -> list[list[str]]:
    """Best-improvement relocations and swaps until no feasible move helps."""

    def minutes(g):
        return sum(by_id[cid].duration_minutes for cid in g)

    def cost_of(g):
        return _group_cost([(by_id[cid].latitude, by_id[cid].longitude) for cid in g])

    groups = [list(g) for g in groups]
    costs = [cost_of(g) for g in groups]
    while True:
        best_gain = _IMPROVE_EPS
        best_move = None
        for i, gi in enumerate(groups):
            for cid in gi:
                src_after = [x for x in gi if x != cid]
                if src_after and len(src_after) < config.min_per_day:
                    continue
                dur = by_id[cid].duration_minutes
                for j, gj in enumerate(groups):
                    if i == j:
                        continue
                    if len(gj) + 1 > config.max_per_day or (not gj and config.min_per_day > 1):
                        continue
                    if minutes(gj) + dur > config.max_minutes_per_day:
                        continue
                    gain = (costs[i] + costs[j]) - (cost_of(src_after) + cost_of(gj + [cid]))
                    if gain > best_gain:
                        best_gain = gain
                        best_move = ("relocate", i, j, cid, None)
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                for a in groups[i]:
                    for b in groups[j]:
                        da, db = by_id[a].duration_minutes, by_id[b].duration_minutes
                        if minutes(groups[i]) - da + db > config.max_minutes_per_day:
                            continue
                        if minutes(groups[j]) - db + da > config.max_minutes_per_day:
                            continue
                        gi_after = [x for x in groups[i] if x != a] + [b]
                        gj_after = [x for x in groups[j] if x != b] + [a]
                        gain = (costs[i] + costs[j]) - (cost_of(gi_after) + cost_of(gj_after))
                        if gain > best_gain:
                            best_gain = gain
                            best_move = ("swap", i, j, a, b)
        if best_move is None:
            return groups
        kind, i, j, a, b = best_move
        if kind == "relocate":
            groups[i].remove(a)
            groups[j].append(a)
        else:
            groups[i].remove(a)
            groups[i].append(b)
            groups[j].remove(b)
            groups[j].append(a)
        costs[i] = cost_of(groups[i])
        costs[j] = cost_of(groups[j])


def local_search_improve(schedule: Schedule, meetings, config: ScheduleConfig) -> Schedule:
    """Improve a feasible schedule in place; output cost never exceeds input cost."""
    by_id = {m.client_id: m for m in meetings}
    groups = [list(g) for g in schedule.day_groups]
    while len(groups) < config.days:
        groups.append([])
    if not _groups_feasible(groups, by_id, config):
        raise DomainError("local search requires a feasible input schedule")
    improved = _search_locally(groups, by_id, config)
    cost = sum(_group_cost([(by_id[cid].latitude, by_id[cid].longitude) for cid in g])
               for g in improved)
    return Schedule(day_groups=[tuple(g) for g in improved], cost=cost, feasible=True)


def build_schedule(meetings, config: ScheduleConfig, seed: int = 42,
                   restarts: int = DEFAULT_RESTARTS) -> Schedule:
    """Best feasible schedule over seeded k-means restarts, each locally optimized.

    Restart results merge deterministically: lowest cost first, then lowest
    restart index. Raises InfeasibleError when the necessary-condition screen
    fails or no restart can be repaired to feasibility.
    """
    selected, _ = deduplicate([m for m in meetings if m.selected])
    report = check_feasibility(selected, config)
    if not report.feasible:
        raise InfeasibleError(
            f"schedule infeasible: {', '.join(report.violations)}",
            violations=list(report.violations), **{
                k: v for k, v in report.details.items() if k != "meeting_count"})
    if not selected:
        return Schedule(day_groups=[() for _ in range(config.days)], cost=0.0, feasible=True)
    by_id = {m.client_id: m for m in selected}

    best: tuple[float, int, list[list[str]]] | None = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        groups = _kmeans_groups(selected, config.days, rng)
        repaired = _repair(groups, by_id, config)
        if repaired is None or not _groups_feasible(repaired, by_id, config):
            continue
        improved = _search_locally(repaired, by_id, config)
        cost = sum(_group_cost([(by_id[cid].latitude, by_id[cid].longitude) for cid in g])
                   for g in improved)
        if best is None or cost < best[0]:
            best = (cost, r, improved)
    if best is None:
        raise InfeasibleError("could not repair any restart into a feasible schedule")
    cost, _, groups = best
    return Schedule(day_groups=[tuple(g) for g in groups], cost=cost, feasible=True)

import itertools
import math

import numpy as np
import pytest

from matchboard.errors import DomainError, InfeasibleError
from matchboard.scheduling import (
    Meeting,
    Schedule,
    ScheduleConfig,
    build_schedule,
    check_feasibility,
    deduplicate,
    haversine_km,
    local_search_improve,
    schedule_cost,
)

FIG4_CONFIG = ScheduleConfig(days=5, min_per_day=3, max_per_day=9, max_minutes_per_day=360)

# ~1 km of longitude at the equator, from 2*pi*6371/360 km per degree.
ONE_KM_LON = 1.0 / (2.0 * math.pi * 6371.0 / 360.0)


def meeting(cid, lat, lon, minutes=60, selected=True):
    return Meeting(client_id=cid, latitude=lat, longitude=lon,
                   duration_minutes=minutes, selected=selected)


def clustered_meetings(rng, centers, per_cluster, minutes=60, spread=0.002):
    out = []
    for c, (lat, lon) in enumerate(centers):
        for i in range(per_cluster):
            out.append(meeting(f"c{c}m{i}",
                               lat + float(rng.normal(0, spread)),
                               lon + float(rng.normal(0, spread)),
                               minutes))
    return out


def exhaustive_optimum(meetings, config):
    """Minimum cost over every feasible assignment of meetings to days."""
    n = len(meetings)
    best = None
    for assignment in itertools.product(range(config.days), repeat=n):
        groups = [[] for _ in range(config.days)]
        for idx, day in enumerate(assignment):
            groups[day].append(meetings[idx].client_id)
        ok = True
        for g in groups:
            if not g:
                continue
            if not (config.min_per_day <= len(g) <= config.max_per_day):
                ok = False
                break
            total = sum(m.duration_minutes for m in meetings if m.client_id in g)
            if total > config.max_minutes_per_day:
                ok = False
                break
        if not ok:
            continue
        cost = schedule_cost(Schedule(day_groups=groups, cost=0.0, feasible=True), meetings)
        if best is None or cost < best:
            best = cost
    return best


def random_feasible_groups(rng, meetings, config, max_tries=500):
    n = len(meetings)
    for _ in range(max_tries):
        assignment = rng.integers(0, config.days, size=n)
        groups = [[] for _ in range(config.days)]
        for idx, day in enumerate(assignment):
            groups[day].append(meetings[idx].client_id)
        ok = True
        for g in groups:
            if not g:
                continue
            if not (config.min_per_day <= len(g) <= config.max_per_day):
                ok = False
                break
            total = sum(m.duration_minutes for m in meetings if m.client_id in g)
            if total > config.max_minutes_per_day:
                ok = False
                break
        if ok:
            return groups
    raise AssertionError("could not sample a feasible partition")


class TestHaversine:
    def test_zero_distance(self):
        assert haversine_km(-25.3, -57.6, -25.3, -57.6) == 0.0

    def test_one_km_at_equator(self):
        assert haversine_km(0.0, 0.0, 0.0, ONE_KM_LON) == pytest.approx(1.0, abs=1e-6)

    def test_symmetry(self):
        a = haversine_km(10.0, 20.0, -30.0, 40.0)
        b = haversine_km(-30.0, 40.0, 10.0, 20.0)
        assert a == pytest.approx(b, abs=1e-12)


class TestDeduplicate:
    def test_figure4_counts(self):
        meetings = [meeting(f"m{i}", 0.0, i * 0.01) for i in range(21)]
        meetings.append(meeting("m0", 5.0, 5.0))  # 22 rows, one duplicate client
        unique, removed = deduplicate(meetings)
        assert len(unique) == 21
        assert removed == 1
        assert unique[0].latitude == 0.0  # first occurrence kept

    def test_identity_without_duplicates(self):
        meetings = [meeting(f"m{i}", 0.0, i * 0.01) for i in range(5)]
        unique, removed = deduplicate(meetings)
        assert unique == meetings and removed == 0

    def test_all_same_client(self):
        meetings = [meeting("m", 0.0, i * 0.01) for i in range(7)]
        unique, removed = deduplicate(meetings)
        assert len(unique) == 1 and removed == 6


class TestCheckFeasibility:
    def test_figure4_values_feasible(self):
        meetings = [meeting(f"m{i}", 0.0, i * 0.01, minutes=60) for i in range(15)]
        report = check_feasibility(meetings, FIG4_CONFIG)
        assert report.feasible

    def test_too_many_per_day(self):
        meetings = [meeting(f"m{i}", 0.0, i * 0.01) for i in range(15)]
        config = ScheduleConfig(days=1, min_per_day=3, max_per_day=9,
                                max_minutes_per_day=360)
        report = check_feasibility(meetings, config)
        assert "TOO_MANY_PER_DAY" in report.violations

    def test_meeting_too_long(self):
        report = check_feasibility([meeting("m0", 0.0, 0.0, minutes=400)], FIG4_CONFIG)
        assert "MEETING_TOO_LONG" in report.violations

    def test_total_time_exceeded(self):
        meetings = [meeting(f"m{i}", 0.0, i * 0.01, minutes=350) for i in range(6)]
        config = ScheduleConfig(days=2, min_per_day=0, max_per_day=9,
                                max_minutes_per_day=360)
        report = check_feasibility(meetings, config)
        assert "TOTAL_TIME_EXCEEDED" in report.violations

    def test_count_partition_impossible(self):
        meetings = [meeting("m0", 0.0, 0.0), meeting("m1", 0.0, 0.01)]
        report = check_feasibility(meetings, FIG4_CONFIG)
        assert "COUNT_PARTITION_IMPOSSIBLE" in report.violations


class TestScheduleCost:
    def test_singleton_day_free(self):
        meetings = [meeting("m0", -25.3, -57.6)]
        schedule = Schedule(day_groups=[["m0"]], cost=0.0, feasible=True)
        assert schedule_cost(schedule, meetings) == 0.0

    def test_two_meetings_one_km_apart(self):
        meetings = [meeting("a", 0.0, 0.0), meeting("b", 0.0, ONE_KM_LON)]
        schedule = Schedule(day_groups=[["a", "b"]], cost=0.0, feasible=True)
        assert schedule_cost(schedule, meetings) == pytest.approx(1.0, abs=1e-3)

    def test_empty_schedule(self):
        schedule = Schedule(day_groups=[[], []], cost=0.0, feasible=True)
        assert schedule_cost(schedule, []) == 0.0

    def test_unknown_id(self):
        schedule = Schedule(day_groups=[["ghost"]], cost=0.0, feasible=True)
        with pytest.raises(DomainError):
            schedule_cost(schedule, [])


class TestBuildSchedule:
    def test_two_tight_clusters_split_optimally(self, rng):
        config = ScheduleConfig(days=2, min_per_day=3, max_per_day=9,
                                max_minutes_per_day=360)
        meetings = clustered_meetings(rng, [(-25.28, -57.63), (-25.45, -57.42)], 3)
        schedule = build_schedule(meetings, config, seed=1)
        groups = [set(g) for g in schedule.day_groups if g]
        assert {frozenset(g) for g in groups} == {
            frozenset(f"c0m{i}" for i in range(3)),
            frozenset(f"c1m{i}" for i in range(3))}
        optimum = exhaustive_optimum(meetings, config)
        assert schedule.cost == pytest.approx(optimum, abs=1e-9)

    def test_all_same_point_cost_zero(self):
        config = ScheduleConfig(days=2, min_per_day=1, max_per_day=5,
                                max_minutes_per_day=600)
        meetings = [meeting(f"m{i}", -25.3, -57.6) for i in range(6)]
        schedule = build_schedule(meetings, config, seed=3)
        assert schedule.cost == 0.0
        assert schedule.feasible

    def test_figure4_instance_three_per_day(self, rng):
        centers = [(-25.28, -57.63), (-25.35, -57.52), (-25.42, -57.58),
                   (-25.30, -57.45), (-25.50, -57.66)]
        meetings = clustered_meetings(rng, centers, 3, minutes=60)
        schedule = build_schedule(meetings, FIG4_CONFIG, seed=42)
        assert schedule.feasible
        counts = sorted(len(g) for g in schedule.day_groups)
        assert counts == [3, 3, 3, 3, 3]

    def test_partition_property(self, rng):
        config = ScheduleConfig(days=3, min_per_day=1, max_per_day=6,
                                max_minutes_per_day=480)
        meetings = clustered_meetings(rng, [(-25.3, -57.6), (-25.4, -57.5)], 4)
        meetings.append(meeting("skip", -25.0, -57.0, selected=False))
        meetings.append(meeting("c0m0", -20.0, -50.0))  # duplicate id dropped
        schedule = build_schedule(meetings, config, seed=5)
        scheduled = [cid for g in schedule.day_groups for cid in g]
        assert sorted(scheduled) == sorted({m.client_id for m in meetings
                                            if m.selected})
        assert "skip" not in scheduled

    def test_infeasible_screen(self):
        meetings = [meeting(f"m{i}", 0.0, i * 0.01) for i in range(15)]
        config = ScheduleConfig(days=1, min_per_day=3, max_per_day=9,
                                max_minutes_per_day=360)
        with pytest.raises(InfeasibleError) as exc:
            build_schedule(meetings, config)
        assert "TOO_MANY_PER_DAY" in exc.value.details["violations"]

    def test_empty_input(self):
        schedule = build_schedule([], FIG4_CONFIG, seed=9)
        assert schedule.cost == 0.0
        assert all(not g for g in schedule.day_groups)

    def test_deterministic_per_seed(self, rng):
        config = ScheduleConfig(days=3, min_per_day=1, max_per_day=5,
                                max_minutes_per_day=480)
        meetings = clustered_meetings(rng, [(-25.3, -57.6), (-25.4, -57.5)], 4)
        a = build_schedule(meetings, config, seed=11)
        b = build_schedule(meetings, config, seed=11)
        assert a.day_groups == b.day_groups and a.cost == b.cost

    def test_all_seeds_feasible(self, rng):
        config = ScheduleConfig(days=3, min_per_day=2, max_per_day=4,
                                max_minutes_per_day=300)
        meetings = clustered_meetings(rng, [(-25.3, -57.6), (-25.4, -57.5), (-25.2, -57.4)], 3)
        for seed in range(10):
            schedule = build_schedule(meetings, config, seed=seed)
            assert schedule.feasible
            for g in schedule.day_groups:
                if g:
                    assert config.min_per_day <= len(g) <= config.max_per_day
                    total = sum(m.duration_minutes for m in meetings if m.client_id in g)
                    assert total <= config.max_minutes_per_day


class TestLocalSearch:
    def test_fixed_point(self, rng):
        config = ScheduleConfig(days=2, min_per_day=3, max_per_day=9,
                                max_minutes_per_day=360)
        meetings = clustered_meetings(rng, [(-25.28, -57.63), (-25.45, -57.42)], 3)
        schedule = build_schedule(meetings, config, seed=1)
        again = local_search_improve(schedule, meetings, config)
        assert again.cost == schedule.cost
        assert {frozenset(g) for g in again.day_groups} == {
            frozenset(g) for g in schedule.day_groups}

    def test_never_worsens_random_starts(self):
        config = ScheduleConfig(days=2, min_per_day=1, max_per_day=8,
                                max_minutes_per_day=600)
        for seed in range(100):
            rng = np.random.default_rng(8000 + seed)
            meetings = [meeting(f"m{i}", float(rng.uniform(-25.5, -25.2)),
                                float(rng.uniform(-57.7, -57.4)),
                                minutes=int(rng.integers(30, 90)))
                        for i in range(int(rng.integers(4, 9)))]
            groups = random_feasible_groups(rng, meetings, config)
            start = Schedule(day_groups=groups, cost=0.0, feasible=True)
            start_cost = schedule_cost(start, meetings)
            improved = local_search_improve(start, meetings, config)
            assert improved.cost <= start_cost + 1e-9

    def test_reaches_near_optimum_from_any_start(self):
        config = ScheduleConfig(days=2, min_per_day=1, max_per_day=8,
                                max_minutes_per_day=600)
        good = 0
        trials = 100
        for seed in range(trials):
            rng = np.random.default_rng(9000 + seed)
            meetings = [meeting(f"m{i}", float(rng.uniform(-25.5, -25.2)),
                                float(rng.uniform(-57.7, -57.4)))
                        for i in range(8)]
            optimum = exhaustive_optimum(meetings, config)
            groups = random_feasible_groups(rng, meetings, config)
            improved = local_search_improve(
                Schedule(day_groups=groups, cost=0.0, feasible=True), meetings, config)
            if improved.cost <= optimum * 1.05 + 1e-9:
                good += 1
        assert good >= 95

    def test_rejects_infeasible_start(self, rng):
        config = ScheduleConfig(days=2, min_per_day=2, max_per_day=3,
                                max_minutes_per_day=300)
        meetings = clustered_meetings(rng, [(-25.3, -57.6)], 4)
        bad = Schedule(day_groups=[[m.client_id for m in meetings], []],
                       cost=0.0, feasible=False)
        with pytest.raises(DomainError):
            local_search_improve(bad, meetings, config)

    def test_heuristic_never_beats_exhaustive_optimum(self):
        # Sanity bound on the cost arithmetic: the heuristic result is a
        # feasible partition, so it can never cost less than the true optimum.
        config = ScheduleConfig(days=3, min_per_day=1, max_per_day=6,
                                max_minutes_per_day=480)
        for seed in range(20):
            rng = np.random.default_rng(11000 + seed)
            n = int(rng.integers(3, 9))
            meetings = [meeting(f"m{i}", float(rng.uniform(-25.5, -25.2)),
                                float(rng.uniform(-57.7, -57.4)),
                                minutes=int(rng.integers(30, 120)))
                        for i in range(n)]
            optimum = exhaustive_optimum(meetings, config)
            built = build_schedule(meetings, config, seed=seed)
            assert built.cost >= optimum - 1e-9
            assert schedule_cost(built, meetings) == pytest.approx(built.cost, abs=1e-9)

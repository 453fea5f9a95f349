"""Batch command-line access to solving, training, scoring, scheduling, and replay.

Exit codes: 0 success, 1 validation/usage error, 2 infeasibility. Errors print
as single-line coded messages on stderr.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
from dataclasses import replace
from pathlib import Path

from .board import BoardState, compute_violations, replay_events
from .errors import InfeasibleError, InfeasibleLocksError, MatchboardError
from .model import MODE_PREFERENCE
from .scheduling import ScheduleConfig, build_schedule, deduplicate
from .scoring import ScoreWeights, build_score_matrix, train_employment_model
from .solver import SolveRequest, solve, subscription_report
from .storage import (
    atomic_write_bytes,
    export_assignment,
    load_history,
    load_instance,
    load_meetings,
    load_model_file,
    read_snapshot,
    save_model_file,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2


def _score_backend(args, instance):
    if instance.mode == MODE_PREFERENCE:
        return ScoreWeights(alpha=args.alpha)
    if not args.model:
        raise MatchboardError("outcome_predicted instances need --model")
    return load_model_file(args.model)


def cmd_solve(args) -> int:
    instance = load_instance(args.manifest)
    matrix = build_score_matrix(instance, _score_backend(args, instance))
    locks = {}
    if args.locks:
        locks = json.loads(Path(args.locks).read_text(encoding="utf-8"))
    request = SolveRequest(instance=instance, matrix=matrix, locks=locks,
                           cross_ref_bonus=args.bonus,
                           allow_unassigned=not args.require_placement)

    interrupted = {"flag": False}

    def on_interrupt(signum, frame):
        interrupted["flag"] = True

    previous = signal.signal(signal.SIGINT, on_interrupt)
    try:
        assignment = solve(request, cancel=lambda: interrupted["flag"])
    finally:
        signal.signal(signal.SIGINT, previous)

    if assignment.status == "cancelled":
        print("interrupted; reporting best placement found so far", file=sys.stderr)
    return _emit_solution(args, instance, matrix, request, assignment)


def _emit_solution(args, instance, matrix, request, assignment) -> int:
    placed = sum(1 for v in assignment.placement.values() if v is not None)
    print(f"status={assignment.status} objective={assignment.objective!r} "
          f"placed={placed}/{len(assignment.placement)} "
          f"nodes={assignment.stats['nodes_explored']}")
    for row in subscription_report(assignment, instance, request.capacity_overrides):
        flags = []
        if row["full"]:
            flags.append("full")
        if row["undersubscribed"]:
            flags.append("undersubscribed")
        print(f"  {row['location_id']}: cases {row['placed_cases']}/{row['case_capacity']} "
              f"members {row['placed_members']}/{row['member_capacity']} "
              f"fill={row['fill_ratio']:.2f}{(' [' + ','.join(flags) + ']') if flags else ''}")
    if args.out:
        state = BoardState(
            session_id="cli", instance=instance, matrix=matrix,
            cross_ref_bonus=request.cross_ref_bonus,
            allow_unassigned=request.allow_unassigned,
            placement=assignment.placement, locks=dict(request.locks),
            capacity_overrides=dict(request.capacity_overrides),
            total_score=assignment.objective, violations=frozenset(),
            revision=0, events=())
        state = replace(state, violations=compute_violations(state))
        atomic_write_bytes(args.out, export_assignment(state, args.format))
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    records = load_history(args.history)
    model = train_employment_model(records, l2_strength=args.l2,
                                   max_iter=args.max_iter, tolerance=args.tolerance)
    save_model_file(model, args.out)
    meta = model.training_meta
    print(f"trained on {len(records)} records: iterations={meta['iterations']} "
          f"final_loss={meta['final_loss']:.6f} stopped_by={meta['stopped_by']}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_score(args) -> int:
    instance = load_instance(args.manifest)
    matrix = build_score_matrix(instance, _score_backend(args, instance))
    import csv
    import io
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["case_id", "location_id", "score", "compatible", "reasons"])
    for i, cid in enumerate(matrix.case_ids):
        for j, lid in enumerate(matrix.location_ids):
            writer.writerow([cid, lid, repr(float(matrix.scores[i, j])),
                             "1" if matrix.compatible[i, j] else "0",
                             "|".join(matrix.reasons_for(cid, lid))])
    atomic_write_bytes(args.out, out.getvalue().encode("utf-8"))
    print(f"wrote {args.out} ({len(matrix.case_ids)}x{len(matrix.location_ids)} pairs)")
    return EXIT_OK


def cmd_schedule(args) -> int:
    meetings = load_meetings(args.meetings)
    selected = [m for m in meetings if m.selected]
    unique, removed = deduplicate(selected)
    config = ScheduleConfig(days=args.days, min_per_day=args.min,
                            max_per_day=args.max, max_minutes_per_day=args.cap_minutes)
    schedule = build_schedule(unique, config, seed=args.seed)
    doc = {
        "day_groups": [list(g) for g in schedule.day_groups],
        "cost_km": schedule.cost,
        "feasible": schedule.feasible,
        "duplicates_removed": removed,
        "seed": args.seed,
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        atomic_write_bytes(args.out, text.encode("utf-8"))
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve
    serve(args.bind, data_dir=args.data, latency_budget=args.latency_budget,
          ui_dir=args.ui)
    return EXIT_OK


def cmd_replay(args) -> int:
    state = read_snapshot(args.snapshot)
    replayed = replay_events(state.instance, state.matrix, state.events,
                             session_id=state.session_id)
    checks = {
        "placement": replayed.placement == state.placement,
        "locks": replayed.locks == state.locks,
        "capacity_overrides": replayed.capacity_overrides == state.capacity_overrides,
        "total_score": replayed.total_score == state.total_score,
        "violations": replayed.violations == state.violations,
        "revision": replayed.revision == state.revision,
    }
    if all(checks.values()):
        print(f"REPLAY_OK revisions={state.revision} events={len(state.events)}")
        return EXIT_OK
    failing = sorted(k for k, ok in checks.items() if not ok)
    print(f"REPLAY_MISMATCH fields={','.join(failing)}", file=sys.stderr)
    return EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matchboard")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a placement instance and export the assignment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", help="trained model JSON (outcome_predicted mode)")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="preference/alignment blend (preference_attribute mode)")
    p.add_argument("--locks", help="JSON file mapping case id to locked location id")
    p.add_argument("--bonus", type=float, default=0.0,
                   help="score bonus per co-placed cross-reference")
    p.add_argument("--require-placement", action="store_true",
                   help="fail instead of leaving cases unassigned")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="fit the employment model from history.csv")
    p.add_argument("--history", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="write the full score matrix as CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("schedule", help="group meetings into travel-minimizing days")
    p.add_argument("--meetings", required=True)
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--min", type=int, default=0)
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--cap-minutes", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--data", help="directory for manifests, models, histories")
    p.add_argument("--latency-budget", type=float, default=2.0)
    p.add_argument("--ui", help="built frontend directory to serve at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="verify a snapshot's event log replays exactly")
    p.add_argument("--snapshot", required=True)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleLocksError, InfeasibleError) as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except MatchboardError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

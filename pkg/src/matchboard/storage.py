"""Flat-file ingest, session snapshots, and assignment export.

CSV column contracts:
  cases.csv      id,name,member_count,employable_count,languages,nationality,
                 flags,levels,prefs,refusals,crossrefs
  locations.csv  id,name,case_capacity,member_capacity,languages,services,
                 desired_levels
  history.csv    member_count,large_family,single_parent,language_match,
                 location_id,employed
  meetings.csv   client_id,lat,lon,duration_minutes,selected

List-valued fields are |-separated; level vectors are ;-separated so the
column count stays fixed across attribute dimensions. Cross-references are
prefixed c: (case) or l: (location). All writes are atomic (temp + rename).
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .board import BoardEvent, BoardState, compute_violations
from .errors import DomainError, ParseError, SnapshotError, ValidationFailedError
from .model import (
    AttributeBag,
    Case,
    CrossRef,
    CROSS_REF_CASE,
    CROSS_REF_LOCATION,
    DEFAULT_ATTRIBUTE_DIMENSION,
    Instance,
    Location,
    MODE_OUTCOME,
    ScoreMatrix,
    validate_instance,
)
from .scheduling import Meeting
from .scoring import HistoryRecord
from .solver import Assignment

SNAPSHOT_FORMAT = "matchboard.snapshot"
SNAPSHOT_VERSION = 1
MANIFEST_VERSION = 1

CASE_COLUMNS = ["id", "name", "member_count", "employable_count", "languages",
                "nationality", "flags", "levels", "prefs", "refusals", "crossrefs"]
LOCATION_COLUMNS = ["id", "name", "case_capacity", "member_capacity", "languages",
                    "services", "desired_levels"]
HISTORY_COLUMNS = ["member_count", "large_family", "single_parent", "language_match",
                   "location_id", "employed"]
MEETING_COLUMNS = ["client_id", "lat", "lon", "duration_minutes", "selected"]

UNASSIGNED = "UNASSIGNED"


@dataclass(frozen=True)
class FileManifest:
    cases_path: Path
    locations_path: Path
    history_path: Path | None
    meetings_path: Path | None
    attribute_dimension: int
    mode: str
    format_version: int = MANIFEST_VERSION


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_manifest(path) -> FileManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    if doc.get("format_version") != MANIFEST_VERSION:
        raise ParseError(f"unsupported manifest format_version {doc.get('format_version')!r}")
    base = path.parent

    def resolve(key: str, required: bool) -> Path | None:
        rel = doc.get(key)
        if rel is None:
            if required:
                raise ParseError(f"manifest missing required entry {key!r}")
            return None
        resolved = base / rel
        if not resolved.exists():
            raise ParseError(f"manifest references missing file {resolved}")
        return resolved

    return FileManifest(
        cases_path=resolve("cases", required=True),
        locations_path=resolve("locations", required=True),
        history_path=resolve("history", required=False),
        meetings_path=resolve("meetings", required=False),
        attribute_dimension=int(doc.get("attribute_dimension", DEFAULT_ATTRIBUTE_DIMENSION)),
        mode=doc.get("mode", MODE_OUTCOME),
    )


def _split(value: str) -> list[str]:
    value = value.strip()
    return [part for part in value.split("|") if part] if value else []


def _parse_levels(value: str, line: int, column: str) -> tuple[float, ...]:
    value = value.strip()
    if not value:
        return ()
    try:
        return tuple(float(x) for x in value.split(";"))
    except ValueError as exc:
        raise ParseError(f"bad level vector {value!r}: {exc}", line=line, column=column) from exc


def _parse_int(value: str, line: int, column: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ParseError(f"expected integer, got {value!r}", line=line, column=column) from exc


def _parse_float(value: str, line: int, column: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ParseError(f"expected number, got {value!r}", line=line, column=column) from exc


def _parse_bool(value: str, line: int, column: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes"):
        return True
    if v in ("0", "false", "no", ""):
        return False
    raise ParseError(f"expected boolean, got {value!r}", line=line, column=column)


def _read_rows(path, columns: list[str]):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ParseError(f"{path} is empty", line=1)
    missing = [c for c in columns if c not in reader.fieldnames]
    if missing:
        raise ParseError(f"{path} lacks required column(s) {missing}", line=1)
    for line, row in enumerate(reader, start=2):
        if None in row.values():
            raise ParseError("row has fewer fields than the header", line=line)
        yield line, row


def _parse_cross_refs(value: str, line: int) -> tuple[CrossRef, ...]:
    refs = []
    for token in _split(value):
        if token.startswith("c:"):
            refs.append(CrossRef(token[2:], CROSS_REF_CASE))
        elif token.startswith("l:"):
            refs.append(CrossRef(token[2:], CROSS_REF_LOCATION))
        else:
            raise ParseError(f"cross-reference {token!r} must start with c: or l:",
                             line=line, column="crossrefs")
    return tuple(refs)


def load_instance(manifest) -> Instance:
    """Parse and validate an instance; only valid instances are returned."""
    if not isinstance(manifest, FileManifest):
        manifest = load_manifest(manifest)
    cases = []
    for line, row in _read_rows(manifest.cases_path, CASE_COLUMNS):
        cases.append(Case(
            id=row["id"],
            display_name=row["name"],
            member_count=_parse_int(row["member_count"], line, "member_count"),
            employable_count=_parse_int(row["employable_count"], line, "employable_count"),
            attributes=AttributeBag(
                languages=frozenset(_split(row["languages"])),
                nationality=row["nationality"],
                flags=frozenset(_split(row["flags"])),
                levels=_parse_levels(row["levels"], line, "levels"),
            ),
            preference_ranks=tuple(_split(row["prefs"])),
            refusals=frozenset(_split(row["refusals"])),
            cross_refs=_parse_cross_refs(row["crossrefs"], line),
        ))
    locations = []
    for line, row in _read_rows(manifest.locations_path, LOCATION_COLUMNS):
        locations.append(Location(
            id=row["id"],
            display_name=row["name"],
            case_capacity=_parse_int(row["case_capacity"], line, "case_capacity"),
            member_capacity=_parse_int(row["member_capacity"], line, "member_capacity"),
            supported_languages=frozenset(_split(row["languages"])),
            services=frozenset(_split(row["services"])),
            desired_levels=_parse_levels(row["desired_levels"], line, "desired_levels"),
        ))
    instance = Instance(cases=tuple(cases), locations=tuple(locations),
                        attribute_dimension=manifest.attribute_dimension, mode=manifest.mode)
    report = validate_instance(instance)
    if not report.ok:
        raise ValidationFailedError(
            "instance failed validation: "
            + "; ".join(f"{i.code}({i.entity_id})" for i in report.errors),
            report=report)
    return instance


def write_instance_files(instance: Instance, directory, manifest_name: str = "manifest.json") -> Path:
    """Export an instance to cases.csv/locations.csv plus a manifest; returns manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CASE_COLUMNS)
    for c in instance.cases:
        writer.writerow([
            c.id, c.display_name, c.member_count, c.employable_count,
            "|".join(sorted(c.attributes.languages)),
            c.attributes.nationality,
            "|".join(sorted(c.attributes.flags)),
            ";".join(repr(x) for x in c.attributes.levels),
            "|".join(c.preference_ranks),
            "|".join(sorted(c.refusals)),
            "|".join(("c:" if r.kind == CROSS_REF_CASE else "l:") + r.target_id
                     for r in c.cross_refs),
        ])
    atomic_write_bytes(directory / "cases.csv", out.getvalue().encode("utf-8"))

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LOCATION_COLUMNS)
    for l in instance.locations:
        writer.writerow([
            l.id, l.display_name, l.case_capacity, l.member_capacity,
            "|".join(sorted(l.supported_languages)),
            "|".join(sorted(l.services)),
            ";".join(repr(x) for x in l.desired_levels),
        ])
    atomic_write_bytes(directory / "locations.csv", out.getvalue().encode("utf-8"))

    manifest_doc = {
        "format_version": MANIFEST_VERSION,
        "cases": "cases.csv",
        "locations": "locations.csv",
        "history": None,
        "meetings": None,
        "attribute_dimension": instance.attribute_dimension,
        "mode": instance.mode,
    }
    manifest_path = directory / manifest_name
    atomic_write_bytes(manifest_path, json.dumps(manifest_doc, indent=2).encode("utf-8"))
    return manifest_path


def load_history(path) -> list[HistoryRecord]:
    records = []
    for line, row in _read_rows(path, HISTORY_COLUMNS):
        records.append(HistoryRecord(
            member_count=_parse_int(row["member_count"], line, "member_count"),
            large_family=_parse_bool(row["large_family"], line, "large_family"),
            single_parent=_parse_bool(row["single_parent"], line, "single_parent"),
            language_match=_parse_bool(row["language_match"], line, "language_match"),
            location_id=row["location_id"],
            employed=_parse_int(row["employed"], line, "employed"),
        ))
    return records


def load_meetings(path) -> list[Meeting]:
    meetings = []
    for line, row in _read_rows(path, MEETING_COLUMNS):
        if not row["duration_minutes"].strip():
            raise ParseError("meeting lacks an explicit duration", line=line,
                             column="duration_minutes")
        try:
            meetings.append(Meeting(
                client_id=row["client_id"],
                latitude=_parse_float(row["lat"], line, "lat"),
                longitude=_parse_float(row["lon"], line, "lon"),
                duration_minutes=_parse_int(row["duration_minutes"], line, "duration_minutes"),
                selected=_parse_bool(row["selected"], line, "selected"),
            ))
        except DomainError as exc:
            raise ParseError(str(exc), line=line) from exc
    return meetings


# -- JSON documents ----------------------------------------------------------

def instance_to_doc(instance: Instance) -> dict:
    return {
        "attribute_dimension": instance.attribute_dimension,
        "mode": instance.mode,
        "cases": [{
            "id": c.id,
            "name": c.display_name,
            "member_count": c.member_count,
            "employable_count": c.employable_count,
            "languages": sorted(c.attributes.languages),
            "nationality": c.attributes.nationality,
            "flags": sorted(c.attributes.flags),
            "levels": list(c.attributes.levels),
            "prefs": list(c.preference_ranks),
            "refusals": sorted(c.refusals),
            "crossrefs": [{"target": r.target_id, "kind": r.kind} for r in c.cross_refs],
        } for c in instance.cases],
        "locations": [{
            "id": l.id,
            "name": l.display_name,
            "case_capacity": l.case_capacity,
            "member_capacity": l.member_capacity,
            "languages": sorted(l.supported_languages),
            "services": sorted(l.services),
            "desired_levels": list(l.desired_levels),
        } for l in instance.locations],
    }


def instance_from_doc(doc: dict) -> Instance:
    try:
        cases = tuple(Case(
            id=c["id"],
            display_name=c.get("name", ""),
            member_count=int(c["member_count"]),
            employable_count=int(c.get("employable_count", 0)),
            attributes=AttributeBag(
                languages=frozenset(c.get("languages", [])),
                nationality=c.get("nationality", ""),
                flags=frozenset(c.get("flags", [])),
                levels=tuple(c.get("levels", [])),
            ),
            preference_ranks=tuple(c.get("prefs", [])),
            refusals=frozenset(c.get("refusals", [])),
            cross_refs=tuple(CrossRef(r["target"], r["kind"]) for r in c.get("crossrefs", [])),
        ) for c in doc["cases"])
        locations = tuple(Location(
            id=l["id"],
            display_name=l.get("name", ""),
            case_capacity=int(l["case_capacity"]),
            member_capacity=int(l["member_capacity"]),
            supported_languages=frozenset(l.get("languages", [])),
            services=frozenset(l.get("services", [])),
            desired_levels=tuple(l.get("desired_levels", [])),
        ) for l in doc["locations"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed instance document: {exc}") from exc
    return Instance(cases=cases, locations=locations,
                    attribute_dimension=int(doc.get("attribute_dimension",
                                                    DEFAULT_ATTRIBUTE_DIMENSION)),
                    mode=doc.get("mode", MODE_OUTCOME))


def matrix_to_doc(matrix: ScoreMatrix) -> dict:
    return {
        "case_ids": list(matrix.case_ids),
        "location_ids": list(matrix.location_ids),
        "scores": [[float(x) for x in row] for row in matrix.scores],
        "compatible": [[bool(x) for x in row] for row in matrix.compatible],
        "reasons": [{"case": cid, "location": lid, "codes": list(codes)}
                    for (cid, lid), codes in sorted(matrix.reasons.items())],
    }


def matrix_from_doc(doc: dict) -> ScoreMatrix:
    try:
        return ScoreMatrix(
            case_ids=tuple(doc["case_ids"]),
            location_ids=tuple(doc["location_ids"]),
            scores=np.array(doc["scores"], dtype=float).reshape(
                len(doc["case_ids"]), len(doc["location_ids"])),
            compatible=np.array(doc["compatible"], dtype=bool).reshape(
                len(doc["case_ids"]), len(doc["location_ids"])),
            reasons={(r["case"], r["location"]): tuple(r["codes"]) for r in doc["reasons"]},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed matrix document: {exc}") from exc


def event_to_doc(event: BoardEvent) -> dict:
    return {"revision": event.revision, "timestamp": event.timestamp,
            "kind": event.kind, "payload": event.payload, "actor": event.actor}


def event_from_doc(doc: dict) -> BoardEvent:
    return BoardEvent(revision=int(doc["revision"]), timestamp=doc["timestamp"],
                      kind=doc["kind"], payload=dict(doc["payload"]), actor=doc["actor"])


def snapshot_session(state: BoardState) -> bytes:
    """Versioned JSON snapshot capturing everything needed for exact restore."""
    doc = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "session_id": state.session_id,
        "instance": instance_to_doc(state.instance),
        "matrix": matrix_to_doc(state.matrix),
        "cross_ref_bonus": state.cross_ref_bonus,
        "allow_unassigned": state.allow_unassigned,
        "placement": dict(sorted(state.placement.items())),
        "locks": dict(sorted(state.locks.items())),
        "capacity_overrides": {k: list(v) for k, v in sorted(state.capacity_overrides.items())},
        "total_score": state.total_score,
        "revision": state.revision,
        "events": [event_to_doc(e) for e in state.events],
    }
    return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")


def restore_session(data: bytes) -> BoardState:
    """Inverse of snapshot_session; violations are recomputed, all else restored."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError("not a session snapshot")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {doc.get('version')!r}")
    try:
        state = BoardState(
            session_id=doc["session_id"],
            instance=instance_from_doc(doc["instance"]),
            matrix=matrix_from_doc(doc["matrix"]),
            cross_ref_bonus=float(doc["cross_ref_bonus"]),
            allow_unassigned=bool(doc["allow_unassigned"]),
            placement=dict(doc["placement"]),
            locks=dict(doc["locks"]),
            capacity_overrides={k: tuple(v) for k, v in doc["capacity_overrides"].items()},
            total_score=float(doc["total_score"]),
            violations=frozenset(),
            revision=int(doc["revision"]),
            events=tuple(event_from_doc(e) for e in doc["events"]),
        )
    except (KeyError, TypeError, ValueError, ParseError) as exc:
        raise SnapshotError(f"malformed snapshot: {exc}") from exc
    return replace(state, violations=compute_violations(state))


def write_snapshot(state: BoardState, path) -> None:
    atomic_write_bytes(path, snapshot_session(state))


def read_snapshot(path) -> BoardState:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    return restore_session(data)


def _row_violations(state: BoardState, case_id: str) -> str:
    target = state.placement.get(case_id)
    codes = []
    for v in state.violations:
        if v.kind == "incompatible" and v.case_id == case_id:
            codes.append("incompatible")
        elif v.kind == "over_capacity" and target is not None and v.location_id == target:
            codes.append(f"over_capacity:{v.dimension}")
    return "|".join(sorted(codes))


def export_assignment(state: BoardState, format: str = "csv") -> bytes:
    """One row per case plus a totals footer matching the board total."""
    rows = []
    for cid in sorted(state.placement):
        target = state.placement[cid]
        rows.append({
            "case_id": cid,
            "location_id": target if target is not None else UNASSIGNED,
            "pair_score": state.matrix.score_of(cid, target),
            "locked": cid in state.locks,
            "violations": _row_violations(state, cid),
        })
    if format == "json":
        doc = {"rows": rows, "total_score": state.total_score}
        return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")
    if format != "csv":
        raise DomainError(f"unknown export format {format!r}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["case_id", "location_id", "pair_score", "locked", "violations"])
    for row in rows:
        writer.writerow([row["case_id"], row["location_id"], repr(row["pair_score"]),
                         "1" if row["locked"] else "0", row["violations"]])
    writer.writerow(["TOTAL", "", repr(state.total_score), "", ""])
    return out.getvalue().encode("utf-8")


def save_model_file(model, path) -> None:
    atomic_write_bytes(path, model.to_json().encode("utf-8"))


def load_model_file(path):
    from .scoring import TrainedModel
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SnapshotError(f"cannot read model {path}: {exc}") from exc
    return TrainedModel.from_json(text)

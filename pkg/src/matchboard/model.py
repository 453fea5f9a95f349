"""Domain types and instance validation.

Pure value types: everything here is immutable after construction and safe to
share across threads. No scoring or optimization logic lives in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Score modes select the backend used to fill the score matrix.
MODE_OUTCOME = "outcome_predicted"
MODE_PREFERENCE = "preference_attribute"
MODES = (MODE_OUTCOME, MODE_PREFERENCE)

# Reason codes for incompatible (case, location) pairs.
REASON_LANGUAGE = "language_mismatch"
REASON_REFUSED = "refused"
REASON_UNRANKED = "unranked"
REASON_SERVICE = "service_missing"

CROSS_REF_CASE = "case"
CROSS_REF_LOCATION = "location"

FLAG_LARGE_FAMILY = "large_family"
FLAG_SINGLE_PARENT = "single_parent"
KNOWN_FLAGS = frozenset({FLAG_LARGE_FAMILY, FLAG_SINGLE_PARENT})

DEFAULT_ATTRIBUTE_DIMENSION = 8


@dataclass(frozen=True)
class CrossRef:
    """A declared link from a case to another case or to a location."""

    target_id: str
    kind: str  # CROSS_REF_CASE or CROSS_REF_LOCATION


@dataclass(frozen=True)
class AttributeBag:
    languages: frozenset[str] = frozenset()
    nationality: str = ""
    flags: frozenset[str] = frozenset()
    levels: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "languages", frozenset(self.languages))
        object.__setattr__(self, "flags", frozenset(self.flags))
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))


@dataclass(frozen=True)
class Case:
    id: str
    display_name: str = ""
    member_count: int = 1
    employable_count: int = 0
    attributes: AttributeBag = field(default_factory=AttributeBag)
    preference_ranks: tuple[str, ...] = ()
    refusals: frozenset[str] = frozenset()
    cross_refs: tuple[CrossRef, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "preference_ranks", tuple(self.preference_ranks))
        object.__setattr__(self, "refusals", frozenset(self.refusals))
        # cross_refs is a set semantically; keep first-seen order.
        object.__setattr__(self, "cross_refs", tuple(dict.fromkeys(self.cross_refs)))


@dataclass(frozen=True)
class Location:
    id: str
    display_name: str = ""
    case_capacity: int = 0
    member_capacity: int = 0
    supported_languages: frozenset[str] = frozenset()
    services: frozenset[str] = frozenset()
    desired_levels: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "supported_languages", frozenset(self.supported_languages))
        object.__setattr__(self, "services", frozenset(self.services))
        object.__setattr__(self, "desired_levels", tuple(float(x) for x in self.desired_levels))


@dataclass(frozen=True)
class Instance:
    cases: tuple[Case, ...]
    locations: tuple[Location, ...]
    attribute_dimension: int = DEFAULT_ATTRIBUTE_DIMENSION
    mode: str = MODE_OUTCOME

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        object.__setattr__(self, "locations", tuple(self.locations))

    def case_by_id(self, case_id: str) -> Case:
        for c in self.cases:
            if c.id == case_id:
                return c
        raise DomainError(f"unknown case id {case_id!r}", entity=case_id)

    def location_by_id(self, location_id: str) -> Location:
        for l in self.locations:
            if l.id == location_id:
                return l
        raise DomainError(f"unknown location id {location_id!r}", entity=location_id)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    entity_id: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()
    warnings: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def _check_levels(issues: list, entity_id: str, levels: tuple, k: int, what: str):
    if len(levels) != k:
        issues.append(ValidationIssue(
            "LEVELS_LENGTH", entity_id,
            f"{what} has {len(levels)} entries, instance declares {k}"))
    for v in levels:
        if not np.isfinite(v) or v < 0.0 or v > 1.0:
            issues.append(ValidationIssue(
                "LEVELS_RANGE", entity_id, f"{what} entry {v!r} outside [0, 1]"))
            break


def validate_instance(instance: Instance) -> ValidationReport:
    """Check every type invariant; one coded issue per violation.

    Pure and idempotent: the report depends only on the instance value.
    """
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []
    k = instance.attribute_dimension

    if instance.mode not in MODES:
        errors.append(ValidationIssue("INVALID_MODE", "", f"unknown mode {instance.mode!r}"))

    case_ids = [c.id for c in instance.cases]
    loc_ids = [l.id for l in instance.locations]
    seen: set[str] = set()
    for cid in case_ids + loc_ids:
        if cid in seen:
            errors.append(ValidationIssue("DUPLICATE_ID", cid, f"id {cid!r} appears more than once"))
        seen.add(cid)
    case_id_set = set(case_ids)
    loc_id_set = set(loc_ids)

    if not instance.cases and not instance.locations:
        warnings.append(ValidationIssue("EMPTY_INSTANCE", "", "instance has no cases and no locations"))

    for c in instance.cases:
        if c.member_count < 1:
            errors.append(ValidationIssue(
                "INVALID_MEMBER_COUNT", c.id, f"member_count {c.member_count} < 1"))
        if c.employable_count < 0 or c.employable_count > c.member_count:
            errors.append(ValidationIssue(
                "EMPLOYABLE_EXCEEDS_MEMBERS", c.id,
                f"employable_count {c.employable_count} outside [0, {c.member_count}]"))
        if len(set(c.preference_ranks)) != len(c.preference_ranks):
            errors.append(ValidationIssue("PREF_DUPLICATE", c.id, "preference list contains duplicates"))
        refused_ranked = set(c.preference_ranks) & c.refusals
        if refused_ranked:
            errors.append(ValidationIssue(
                "PREF_REFUSED", c.id, f"ranked location(s) also refused: {sorted(refused_ranked)}"))
        for ref in c.cross_refs:
            if ref.target_id == c.id:
                errors.append(ValidationIssue("SELF_REFERENCE", c.id, "case cross-references itself"))
            elif ref.kind == CROSS_REF_CASE and ref.target_id not in case_id_set:
                errors.append(ValidationIssue("DANGLING_REF", ref.target_id,
                                              f"case {c.id!r} cross-references unknown case {ref.target_id!r}"))
            elif ref.kind == CROSS_REF_LOCATION and ref.target_id not in loc_id_set:
                errors.append(ValidationIssue("DANGLING_REF", ref.target_id,
                                              f"case {c.id!r} cross-references unknown location {ref.target_id!r}"))
            elif ref.kind not in (CROSS_REF_CASE, CROSS_REF_LOCATION):
                errors.append(ValidationIssue("INVALID_CROSS_REF", c.id, f"unknown link kind {ref.kind!r}"))
        for rid in list(c.preference_ranks) + sorted(c.refusals):
            if rid not in loc_id_set:
                errors.append(ValidationIssue("DANGLING_REF", rid,
                                              f"case {c.id!r} references unknown location {rid!r}"))
        _check_levels(errors, c.id, c.attributes.levels, k, "attribute levels")

    for l in instance.locations:
        if l.case_capacity < 0 or l.member_capacity < 0:
            errors.append(ValidationIssue(
                "NEGATIVE_CAPACITY", l.id,
                f"capacities must be >= 0, got C={l.case_capacity} R={l.member_capacity}"))
        _check_levels(errors, l.id, l.desired_levels, k, "desired levels")

    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings))


def compatibility(case: Case, location: Location, mode: str) -> tuple[bool, tuple[str, ...]]:
    """Soft compatibility gate; reasons list every failed criterion.

    preference_attribute: the case must rank the location and not refuse it.
    outcome_predicted: the case and location must share a language and the
    location must not be refused. Locks may override a False result.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    reasons: list[str] = []
    if mode == MODE_PREFERENCE:
        if location.id not in case.preference_ranks:
            reasons.append(REASON_UNRANKED)
    else:
        if not (case.attributes.languages & location.supported_languages):
            reasons.append(REASON_LANGUAGE)
    if location.id in case.refusals:
        reasons.append(REASON_REFUSED)
    return (not reasons, tuple(reasons))


@dataclass(frozen=True, eq=False)  # array fields make generated __eq__ ambiguous
class ScoreMatrix:
    """Dense per-(case, location) scores with a compatibility mask.

    `scores` and `compatible` are |cases| x |locations| arrays indexed by the
    positions in `case_ids` / `location_ids`. Arrays are frozen read-only.
    """

    case_ids: tuple[str, ...]
    location_ids: tuple[str, ...]
    scores: np.ndarray
    compatible: np.ndarray
    reasons: dict  # (case_id, location_id) -> tuple of reason codes, incompatible pairs only

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        compat = np.asarray(self.compatible, dtype=bool)
        shape = (len(self.case_ids), len(self.location_ids))
        if scores.shape != shape or compat.shape != shape:
            raise DomainError(f"matrix shape {scores.shape} does not match ids {shape}")
        if scores.size and (not np.all(np.isfinite(scores)) or np.any(scores < 0.0)):
            raise DomainError("scores must be finite and >= 0")
        scores.setflags(write=False)
        compat.setflags(write=False)
        object.__setattr__(self, "case_ids", tuple(self.case_ids))
        object.__setattr__(self, "location_ids", tuple(self.location_ids))
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "compatible", compat)
        object.__setattr__(self, "_case_index", {c: i for i, c in enumerate(self.case_ids)})
        object.__setattr__(self, "_loc_index", {l: j for j, l in enumerate(self.location_ids)})

    def case_index(self, case_id: str) -> int:
        try:
            return self._case_index[case_id]
        except KeyError:
            raise DomainError(f"unknown case id {case_id!r}", entity=case_id) from None

    def location_index(self, location_id: str) -> int:
        try:
            return self._loc_index[location_id]
        except KeyError:
            raise DomainError(f"unknown location id {location_id!r}", entity=location_id) from None

    def score_of(self, case_id: str, location_id: str | None) -> float:
        if location_id is None:
            return 0.0
        return float(self.scores[self.case_index(case_id), self.location_index(location_id)])

    def compatible_pair(self, case_id: str, location_id: str | None) -> bool:
        if location_id is None:
            return True
        return bool(self.compatible[self.case_index(case_id), self.location_index(location_id)])

    def reasons_for(self, case_id: str, location_id: str) -> tuple[str, ...]:
        return tuple(self.reasons.get((case_id, location_id), ()))

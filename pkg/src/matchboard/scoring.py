"""Score backends: preference/attribute alignment and a logistic outcome model.

The preference backend blends rank utility with attribute alignment. The
outcome backend trains an L2-regularized logistic model on past placements
and scores a pair as the expected number of employed members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateLabelsError,
    DomainError,
    InvalidFeatureError,
    SchemaMismatchError,
    SnapshotError,
)
from .model import (
    FLAG_LARGE_FAMILY,
    FLAG_SINGLE_PARENT,
    MODE_OUTCOME,
    MODE_PREFERENCE,
    Case,
    Instance,
    Location,
    ScoreMatrix,
    compatibility,
)

MODEL_FORMAT = "matchboard.model"
MODEL_FORMAT_VERSION = 1

# member_count is mapped to member_count / MEMBER_COUNT_SCALE so the feature
# stays comparable to the 0/1 indicators for typical family sizes.
MEMBER_COUNT_SCALE = 10.0

BASE_FEATURES = ("large_family", "single_parent", "language_match", "member_count_norm")
LOCATION_FEATURE_PREFIX = "loc:"


@dataclass(frozen=True)
class ScoreWeights:
    """Blend weight for the preference backend: alpha on rank, rest on alignment."""

    alpha: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class HistoryRecord:
    """One past placement with its observed binary employment outcome."""

    member_count: int
    large_family: bool
    single_parent: bool
    language_match: bool
    location_id: str
    employed: int

    def __post_init__(self):
        if self.employed not in (0, 1):
            raise DomainError(f"employed must be 0 or 1, got {self.employed!r}")


@dataclass(frozen=True)
class TrainedModel:
    feature_schema: tuple[str, ...]
    weights: tuple[float, ...]
    intercept: float
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "feature_schema", tuple(self.feature_schema))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != len(self.feature_schema):
            raise DomainError("weights length must match feature schema length")
        if not all(np.isfinite(w) for w in self.weights) or not np.isfinite(self.intercept):
            raise DomainError("model parameters must be finite")

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "schema": list(self.feature_schema),
            "weights": list(self.weights),
            "intercept": self.intercept,
            "meta": self.training_meta,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"model document is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
            raise SnapshotError("not a model document")
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise SnapshotError(f"unsupported model version {doc.get('version')!r}")
        return cls(
            feature_schema=tuple(doc["schema"]),
            weights=tuple(doc["weights"]),
            intercept=float(doc["intercept"]),
            training_meta=dict(doc.get("meta", {})),
        )


def preference_rank_utility(rank: int, list_length: int) -> float:
    """Utility of holding 1-based `rank` in a list: top rank 1.0, strictly decreasing."""
    if list_length < 1:
        raise DomainError(f"list_length must be >= 1, got {list_length}")
    if not (1 <= rank <= list_length):
        raise DomainError(f"rank {rank} outside [1, {list_length}]")
    return (list_length - rank + 1) / list_length


def attribute_alignment(levels, desired) -> float:
    """Cosine similarity of two non-negative level vectors; 0 if either is all-zero."""
    a = np.asarray(levels, dtype=float)
    b = np.asarray(desired, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"level vectors differ in length: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(1.0, float(np.dot(a, b) / (na * nb)))


def preference_alignment_score(case: Case, location: Location, weights: ScoreWeights) -> float:
    """Blended preference/alignment score for a compatible pair, in [0, 1]."""
    ok, reasons = compatibility(case, location, MODE_PREFERENCE)
    if not ok:
        raise DomainError(
            f"cannot score incompatible pair ({case.id!r}, {location.id!r})",
            reasons=list(reasons))
    rank = case.preference_ranks.index(location.id) + 1
    utility = preference_rank_utility(rank, len(case.preference_ranks))
    alignment = attribute_alignment(case.attributes.levels, location.desired_levels)
    return weights.alpha * utility + (1.0 - weights.alpha) * alignment


def case_features(case: Case, location: Location) -> dict[str, float]:
    """Feature values for a live (case, location) pair, keyed by schema name."""
    return {
        "large_family": 1.0 if FLAG_LARGE_FAMILY in case.attributes.flags else 0.0,
        "single_parent": 1.0 if FLAG_SINGLE_PARENT in case.attributes.flags else 0.0,
        "language_match": 1.0 if case.attributes.languages & location.supported_languages else 0.0,
        "member_count_norm": case.member_count / MEMBER_COUNT_SCALE,
        LOCATION_FEATURE_PREFIX + location.id: 1.0,
    }


def _record_features(record: HistoryRecord) -> dict[str, float]:
    return {
        "large_family": 1.0 if record.large_family else 0.0,
        "single_parent": 1.0 if record.single_parent else 0.0,
        "language_match": 1.0 if record.language_match else 0.0,
        "member_count_norm": record.member_count / MEMBER_COUNT_SCALE,
        LOCATION_FEATURE_PREFIX + record.location_id: 1.0,
    }


def _vector_from_features(features: dict[str, float], schema: tuple[str, ...]) -> np.ndarray:
    for name in features:
        if not name.startswith(LOCATION_FEATURE_PREFIX) and name not in schema:
            raise SchemaMismatchError(f"feature {name!r} not in model schema")
    # Unknown locations fall back to an all-zero one-hot block.
    return np.array([features.get(name, 0.0) for name in schema], dtype=float)


def regularized_loss_and_gradient(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                                  b: float, l2_strength: float):
    """Mean negative log-likelihood plus (l2/2)*||w||^2; intercept unpenalized."""
    z = X @ w + b
    # log(1 + e^z) - y*z, stable for large |z|
    nll = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss = nll + 0.5 * l2_strength * float(np.dot(w, w))
    p = 1.0 / (1.0 + np.exp(-z))
    resid = p - y
    grad_w = X.T @ resid / len(y) + l2_strength * w
    grad_b = float(np.mean(resid))
    return loss, grad_w, grad_b


def train_employment_model(history: list[HistoryRecord], l2_strength: float = 1e-4,
                           max_iter: int = 5000, tolerance: float = 1e-6) -> TrainedModel:
    """Fit the logistic outcome model by batch gradient descent.

    The step starts at 1.0 and is halved whenever a step would increase the
    regularized loss, so the recorded loss trace is non-increasing. Training
    stops when the gradient norm falls below `tolerance` or at `max_iter`.
    """
    if l2_strength < 0:
        raise DomainError(f"l2_strength must be >= 0, got {l2_strength}")
    labels = {r.employed for r in history}
    if labels != {0, 1}:
        raise DegenerateLabelsError(
            f"training needs both outcome classes, saw {sorted(labels) or 'no records'}")

    location_ids = sorted({r.location_id for r in history})
    schema = BASE_FEATURES + tuple(LOCATION_FEATURE_PREFIX + lid for lid in location_ids)
    X = np.array([_vector_from_features(_record_features(r), schema) for r in history])
    y = np.array([r.employed for r in history], dtype=float)
    if not np.all(np.isfinite(X)):
        raise InvalidFeatureError("history produced non-finite feature values")

    w = np.zeros(len(schema))
    b = 0.0
    step = 1.0
    loss, grad_w, grad_b = regularized_loss_and_gradient(X, y, w, b, l2_strength)
    trace = [loss]
    stopped_by = "max_iter"
    iterations = 0
    for it in range(1, max_iter + 1):
        grad_norm = float(np.sqrt(np.dot(grad_w, grad_w) + grad_b * grad_b))
        if grad_norm <= tolerance:
            stopped_by = "tolerance"
            break
        accepted = False
        while step >= 1e-12:
            w_new = w - step * grad_w
            b_new = b - step * grad_b
            new_loss, new_gw, new_gb = regularized_loss_and_gradient(X, y, w_new, b_new, l2_strength)
            if new_loss <= loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # Cannot decrease the loss at any representable step; numerically done.
            stopped_by = "step_underflow"
            break
        w, b, loss, grad_w, grad_b = w_new, b_new, new_loss, new_gw, new_gb
        trace.append(loss)
        iterations = it

    return TrainedModel(
        feature_schema=schema,
        weights=tuple(w),
        intercept=b,
        training_meta={
            "iterations": iterations,
            "final_loss": loss,
            "l2_strength": l2_strength,
            "stopped_by": stopped_by,
            "loss_trace": trace,
        },
    )


def predict_probability(model: TrainedModel, case: Case, location: Location) -> float:
    """Per-member employment probability: sigmoid of the linear score.

    Unknown locations fall back to an all-zero one-hot block; any other
    deviation between the model schema and the live feature extraction is a
    schema mismatch.
    """
    missing = [name for name in BASE_FEATURES if name not in model.feature_schema]
    alien = [name for name in model.feature_schema
             if name not in BASE_FEATURES and not name.startswith(LOCATION_FEATURE_PREFIX)]
    if missing or alien:
        raise SchemaMismatchError(
            f"model schema does not match feature extraction "
            f"(missing {missing}, unknown {alien})")
    x = _vector_from_features(case_features(case, location), model.feature_schema)
    z = float(np.dot(np.array(model.weights), x)) + model.intercept
    return float(1.0 / (1.0 + np.exp(-z)))


def build_score_matrix(instance: Instance, backend) -> ScoreMatrix:
    """Fill the dense score matrix and compatibility mask for an instance.

    outcome_predicted mode scores every pair as employable_count times the
    predicted probability (incompatible pairs are scored but masked);
    preference_attribute mode scores compatible pairs with preference_alignment_score and
    leaves incompatible pairs at 0.
    """
    if instance.mode == MODE_OUTCOME and not isinstance(backend, TrainedModel):
        raise DomainError("outcome_predicted mode needs a TrainedModel backend")
    if instance.mode == MODE_PREFERENCE and not isinstance(backend, ScoreWeights):
        raise DomainError("preference_attribute mode needs a ScoreWeights backend")

    n, m = len(instance.cases), len(instance.locations)
    scores = np.zeros((n, m))
    compat = np.zeros((n, m), dtype=bool)
    reasons: dict[tuple[str, str], tuple[str, ...]] = {}
    for i, case in enumerate(instance.cases):
        for j, location in enumerate(instance.locations):
            ok, why = compatibility(case, location, instance.mode)
            compat[i, j] = ok
            if not ok:
                reasons[(case.id, location.id)] = why
            if instance.mode == MODE_OUTCOME:
                p = predict_probability(backend, case, location)
                scores[i, j] = case.employable_count * p
            elif ok:
                scores[i, j] = preference_alignment_score(case, location, backend)
    return ScoreMatrix(
        case_ids=tuple(c.id for c in instance.cases),
        location_ids=tuple(l.id for l in instance.locations),
        scores=scores,
        compatible=compat,
        reasons=reasons,
    )

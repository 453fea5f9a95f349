"""Interactive decision support for capacitated case-to-location matching."""

from .model import (
    AttributeBag,
    Case,
    CrossRef,
    Instance,
    Location,
    MODE_OUTCOME,
    MODE_PREFERENCE,
    ScoreMatrix,
    ValidationReport,
    compatibility,
    validate_instance,
)
from .scoring import (
    HistoryRecord,
    ScoreWeights,
    TrainedModel,
    attribute_alignment,
    build_score_matrix,
    preference_alignment_score,
    predict_probability,
    preference_rank_utility,
    train_employment_model,
)
from .solver import (
    Assignment,
    SolveRequest,
    brute_force_oracle,
    greedy_warm_start,
    solve,
    subscription_report,
)
from .board import (
    BoardEvent,
    BoardState,
    SessionManager,
    adjust_capacity,
    apply_move,
    cross_reference_view,
    open_session,
    reoptimize,
    replay_events,
    toggle_lock,
    whatif_score,
)
from .scheduling import (
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

__version__ = "0.1.0"

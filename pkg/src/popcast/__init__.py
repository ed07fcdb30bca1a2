"""Near-future item popularity prediction on timestamped interaction logs."""

__version__ = "0.1.0"

from .errors import (
    ContractError,
    EmptyLogError,
    NoCandidatesError,
    ParseError,
    PopcastError,
)
from .events import (
    InputFormat,
    InteractionEvent,
    InteractionLog,
    apply_filters,
    apply_min_user_activity,
    apply_rating_filter,
    make_log,
    parse_events,
    read_canonical,
    remove_self_links,
    sample_users,
    write_canonical,
)
from .index import CutSpec, TemporalIndex, build_index
from .predictors import (
    PredictorSpec,
    ScoreTable,
    normalize_scores,
    rank_top_n,
    score,
    score_pbp,
    score_proposed,
    score_total_popularity,
    write_score_table,
)
from .metrics import (
    GroundTruth,
    MetricTriple,
    auc,
    evaluate,
    ground_truth,
    novelty_q_n,
    precision_at_n,
)
from .experiment import (
    Comparison,
    ExperimentPlan,
    ExperimentReport,
    PredictorTemplate,
    Selector,
    compare_predictors,
    horizon_sweep,
    run_grid,
    sample_cuts,
    sign_test_p,
    write_report,
)
from .synthgen import (
    SynthModelParams,
    SynthTruth,
    generate,
    label_potential_items,
    write_synth_outputs,
)

__all__ = [
    "__version__",
    "PopcastError",
    "ParseError",
    "ContractError",
    "EmptyLogError",
    "NoCandidatesError",
    "InteractionEvent",
    "InteractionLog",
    "InputFormat",
    "parse_events",
    "make_log",
    "apply_rating_filter",
    "apply_min_user_activity",
    "remove_self_links",
    "apply_filters",
    "sample_users",
    "write_canonical",
    "read_canonical",
    "CutSpec",
    "TemporalIndex",
    "build_index",
    "PredictorSpec",
    "ScoreTable",
    "score",
    "score_total_popularity",
    "score_pbp",
    "score_proposed",
    "normalize_scores",
    "rank_top_n",
    "write_score_table",
    "GroundTruth",
    "MetricTriple",
    "ground_truth",
    "precision_at_n",
    "novelty_q_n",
    "auc",
    "evaluate",
    "ExperimentPlan",
    "ExperimentReport",
    "PredictorTemplate",
    "Selector",
    "Comparison",
    "sample_cuts",
    "run_grid",
    "horizon_sweep",
    "compare_predictors",
    "sign_test_p",
    "write_report",
    "SynthModelParams",
    "SynthTruth",
    "generate",
    "label_potential_items",
    "write_synth_outputs",
]

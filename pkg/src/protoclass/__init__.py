"""Prototype-based classification over frozen-backbone embeddings."""

from .bundle import (
    DatasetManifest,
    EmbeddingDataset,
    EmbeddingRecord,
    Normalizer,
    import_csv,
    load_bundle,
    normalize,
    save_bundle,
    split_by_class,
)
from .decision import (
    DecisionConfig,
    Prediction,
    classify_knn,
    classify_wta,
    distance,
    predict,
    predict_labels,
    similarity_scores,
)
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    NonFiniteValueError,
    NumericError,
    ProtoclassError,
    TruncatedPayloadError,
    UsageError,
    VersionMismatchError,
)
from .explain import (
    ExplanationReport,
    SymbolicRuleSet,
    UnsupportedMethodError,
    emit_rules,
    explain,
    report_to_markdown,
    trace_ranking,
)
from .incremental import IncrementPlan, IncrementalState, evaluate_step, run_plan
from .metrics import (
    AggregateResult,
    RunResult,
    evaluate,
    repeat_runs,
    results_csv,
    sensitivity_sweep,
)
from .selection import (
    BudgetSpec,
    Prototype,
    PrototypeSet,
    elm_fit,
    fit_prototypes,
    kmeans_fit,
    load_prototypes,
    save_prototypes,
    select_random,
    snap_to_nearest,
    xdnn_fit,
)

__version__ = "0.1.0"

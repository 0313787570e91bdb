"""Metrics and repeated-run statistics: accuracy, macro-F1, confusion, timing.

Aggregates report mean and sample standard deviation (n-1 denominator) over
seeded runs; run r uses seed base_seed + r.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bundle import EmbeddingDataset
from .decision import DecisionConfig, predict_labels
from .errors import UsageError
from .selection import BudgetSpec, PrototypeSet, fit_prototypes


@dataclass
class RunResult:
    seed: int
    accuracy: float
    macro_f1: float
    confusion: np.ndarray  # rows = truth, columns = prediction
    class_ids: list[int]
    n_prototypes: int
    fit_seconds: float = 0.0
    eval_seconds: float = 0.0

    def confusion_as_lists(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.confusion]


@dataclass
class AggregateResult:
    method: str
    budget: str
    n_runs: int
    n_prototypes: int
    accuracy_mean: float
    accuracy_std: float | None
    f1_mean: float
    f1_std: float | None
    fit_seconds: float
    eval_seconds: float
    runs: list[RunResult] = field(default_factory=list)


def macro_f1_from_confusion(confusion: np.ndarray) -> float:
    """Unweighted mean of per-class F1; a 0/0 per-class F1 counts as 0."""
    cm = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    f1 = np.zeros(cm.shape[0])
    for i in range(cm.shape[0]):
        denom_p = tp[i] + fp[i]
        denom_r = tp[i] + fn[i]
        p = tp[i] / denom_p if denom_p > 0 else 0.0
        r = tp[i] / denom_r if denom_r > 0 else 0.0
        f1[i] = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return float(f1.mean())


def evaluate(
    pset: PrototypeSet,
    config: DecisionConfig,
    test: EmbeddingDataset,
    seed: int = 0,
) -> RunResult:
    """Classify every test record and reduce to accuracy, macro-F1, confusion."""
    class_ids = pset.class_ids
    index_of = {cid: i for i, cid in enumerate(class_ids)}
    truth = test.labels.astype(np.int64)
    unseen = set(int(c) for c in np.unique(truth)) - set(class_ids)
    if unseen:
        raise UsageError(f"test labels {sorted(unseen)} were never trained")
    if len(test) == 0:
        raise UsageError("test dataset is empty")
    t0 = time.perf_counter()
    predicted = predict_labels(test.vectors, pset, config)
    eval_seconds = time.perf_counter() - t0
    confusion = np.zeros((len(class_ids), len(class_ids)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        confusion[index_of[int(t)], index_of[int(p)]] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    return RunResult(
        seed=seed,
        accuracy=accuracy,
        macro_f1=macro_f1_from_confusion(confusion),
        confusion=confusion,
        class_ids=class_ids,
        n_prototypes=pset.total_count(),
        eval_seconds=eval_seconds,
    )


def aggregate_runs(
    method: str, budget: BudgetSpec | None, runs: list[RunResult]
) -> AggregateResult:
    acc = np.asarray([r.accuracy for r in runs])
    f1 = np.asarray([r.macro_f1 for r in runs])
    n = len(runs)
    return AggregateResult(
        method=method,
        budget=budget.describe() if budget is not None else "auto",
        n_runs=n,
        n_prototypes=runs[0].n_prototypes,
        accuracy_mean=float(acc.mean()),
        accuracy_std=float(acc.std(ddof=1)) if n >= 2 else None,
        f1_mean=float(f1.mean()),
        f1_std=float(f1.std(ddof=1)) if n >= 2 else None,
        fit_seconds=float(np.mean([r.fit_seconds for r in runs])),
        eval_seconds=float(np.mean([r.eval_seconds for r in runs])),
        runs=runs,
    )


def repeat_runs(
    train: EmbeddingDataset,
    test: EmbeddingDataset,
    method: str,
    params: dict | None,
    budget: BudgetSpec | None,
    config: DecisionConfig,
    n_runs: int,
    base_seed: int,
    jobs: int = 1,
) -> AggregateResult:
    """Fit-and-evaluate n_runs times with seeds base_seed ... base_seed+n-1."""
    if n_runs < 1:
        raise UsageError(f"n_runs must be >= 1, got {n_runs}")
    runs = []
    for r in range(n_runs):
        seed = base_seed + r
        t0 = time.perf_counter()
        pset = fit_prototypes(
            train, method, params=params, budget=budget, seed=seed, jobs=jobs
        )
        fit_seconds = time.perf_counter() - t0
        result = evaluate(pset, config, test, seed=seed)
        result.fit_seconds = fit_seconds
        runs.append(result)
    return aggregate_runs(method, budget, runs)


def sensitivity_sweep(
    train: EmbeddingDataset,
    test: EmbeddingDataset,
    budgets: list[BudgetSpec],
    method: str,
    params: dict | None,
    config: DecisionConfig,
    n_runs: int,
    base_seed: int,
    jobs: int = 1,
) -> list[AggregateResult]:
    """One aggregate per budget, for accuracy-vs-budget curves."""
    if not budgets:
        raise UsageError("no budgets given")
    return [
        repeat_runs(train, test, method, params, budget, config, n_runs, base_seed, jobs=jobs)
        for budget in budgets
    ]


RESULTS_CSV_HEADER = (
    "method,budget,n_prototypes,accuracy_mean,accuracy_std,"
    "f1_mean,f1_std,fit_seconds,eval_seconds"
)


def _fmt(value: float | None, timings: bool = True) -> str:
    if value is None or not timings:
        return ""
    return repr(float(value))


def results_csv(aggregates: list[AggregateResult], include_timings: bool = False) -> str:
    """Delimited mirror of the aggregates; timing cells stay empty unless asked.

    Wall-clock values vary between identical runs, so they are opt-in to keep
    default output files byte-reproducible.
    """
    lines = [RESULTS_CSV_HEADER]
    for agg in aggregates:
        lines.append(
            ",".join(
                [
                    agg.method,
                    agg.budget,
                    str(agg.n_prototypes),
                    _fmt(agg.accuracy_mean),
                    _fmt(agg.accuracy_std),
                    _fmt(agg.f1_mean),
                    _fmt(agg.f1_std),
                    _fmt(agg.fit_seconds, include_timings),
                    _fmt(agg.eval_seconds, include_timings),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def results_json_dict(
    aggregates: list[AggregateResult], include_timings: bool = False
) -> dict:
    """JSON mirror of the CSV, with per-run confusion matrices."""
    out = []
    for agg in aggregates:
        entry = {
            "method": agg.method,
            "budget": agg.budget,
            "n_prototypes": agg.n_prototypes,
            "n_runs": agg.n_runs,
            "accuracy_mean": agg.accuracy_mean,
            "accuracy_std": agg.accuracy_std,
            "f1_mean": agg.f1_mean,
            "f1_std": agg.f1_std,
            "runs": [
                {
                    "seed": r.seed,
                    "accuracy": r.accuracy,
                    "macro_f1": r.macro_f1,
                    "class_ids": r.class_ids,
                    "confusion": r.confusion_as_lists(),
                }
                for r in agg.runs
            ],
        }
        if include_timings:
            entry["fit_seconds"] = agg.fit_seconds
            entry["eval_seconds"] = agg.eval_seconds
        out.append(entry)
    return {"results": out}


STEP_CSV_HEADER = "step,n_classes,accuracy_mean,accuracy_std,fit_seconds,eval_seconds"


def step_metrics_csv(step_metrics, include_timings: bool = False) -> str:
    """Per-step CSV for the class-incremental protocol."""
    lines = [STEP_CSV_HEADER]
    for m in step_metrics:
        lines.append(
            ",".join(
                [
                    str(m.step),
                    str(m.n_classes),
                    _fmt(m.accuracy_mean),
                    _fmt(m.accuracy_std),
                    _fmt(m.fit_seconds, include_timings),
                    _fmt(m.eval_seconds, include_timings),
                ]
            )
        )
    return "\n".join(lines) + "\n"

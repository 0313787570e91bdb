"""Class-incremental learning driver.

Classes arrive in batches; prototypes are fitted only for the new classes and
previously fitted classes are never touched again, so forgetting is
structurally impossible. Per-class seeds are derived as base_seed XOR
class_id, which makes the final model independent of arrival order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bundle import EmbeddingDataset, EmbeddingRecord, split_by_class
from .decision import DecisionConfig, predict_labels
from .errors import UsageError
from .selection import (
    BudgetSpec,
    Prototype,
    PrototypeSet,
    fit_class_prototypes,
    class_seed,
)


@dataclass(frozen=True)
class IncrementPlan:
    """Which classes arrive, how many per step, and how to fit them."""

    class_order: tuple[int, ...]
    increment: int
    method: str
    method_params: dict = field(default_factory=dict)
    budget: BudgetSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.increment < 1:
            raise UsageError(f"increment must be >= 1, got {self.increment}")
        if len(set(self.class_order)) != len(self.class_order):
            raise UsageError("class_order contains duplicates")

    def steps(self) -> list[tuple[int, ...]]:
        order = self.class_order
        return [
            tuple(order[i : i + self.increment])
            for i in range(0, len(order), self.increment)
        ]


@dataclass(frozen=True)
class StepMetrics:
    step: int
    n_classes: int
    accuracy_mean: float
    accuracy_std: float | None
    fit_seconds: float
    eval_seconds: float


class IncrementalState:
    """Growing per-class prototype store with step accuracy bookkeeping."""

    def __init__(
        self,
        plan: IncrementPlan,
        manifest_ref: dict,
        run_seed: int | None = None,
    ):
        self.plan = plan
        self.manifest_ref = dict(manifest_ref)
        self.run_seed = plan.seed if run_seed is None else run_seed
        self.seen_classes: list[int] = []
        self.prototype_sets: dict[int, tuple[Prototype, ...]] = {}
        self.step_metrics: list[StepMetrics] = []
        self.snapshots: list["IncrementalState"] = []

    def _copy(self) -> "IncrementalState":
        clone = IncrementalState(self.plan, self.manifest_ref, self.run_seed)
        clone.seen_classes = list(self.seen_classes)
        clone.prototype_sets = dict(self.prototype_sets)
        clone.step_metrics = list(self.step_metrics)
        return clone

    def advance(self, new_class_batches: dict[int, list[EmbeddingRecord]]) -> "IncrementalState":
        """Fit prototypes for the new classes only; old entries are shared untouched."""
        if not new_class_batches:
            raise UsageError("advance called with no new classes")
        state = self._copy()
        for cid in sorted(new_class_batches):
            if cid in state.prototype_sets:
                raise UsageError(f"class {cid} was already seen")
            records = new_class_batches[cid]
            if not records:
                raise UsageError(f"class {cid} arrived with an empty batch")
            protos = fit_class_prototypes(
                self.plan.method,
                records,
                self.plan.method_params,
                self.plan.budget,
                class_seed(state.run_seed, cid),
            )
            state.prototype_sets[cid] = tuple(protos)
            state.seen_classes.append(cid)
        return state

    def to_prototype_set(self) -> PrototypeSet:
        if not self.prototype_sets:
            raise UsageError("no classes seen yet")
        return PrototypeSet(
            manifest_ref=self.manifest_ref,
            per_class=self.prototype_sets,
            method=self.plan.method,
            method_params=self.plan.method_params,
            seed=self.run_seed,
        )


def evaluate_step(
    state: IncrementalState,
    test_dataset: EmbeddingDataset,
    config: DecisionConfig = DecisionConfig(),
) -> float:
    """Accuracy over test records whose labels have been seen so far."""
    if not state.seen_classes:
        raise UsageError("cannot evaluate before any class arrived")
    seen = np.asarray(sorted(state.seen_classes))
    eligible = np.isin(test_dataset.labels.astype(np.int64), seen)
    n_eligible = int(eligible.sum())
    if n_eligible == 0:
        raise UsageError("no test records belong to the seen classes")
    pset = state.to_prototype_set()
    queries = test_dataset.vectors[eligible]
    truth = test_dataset.labels[eligible].astype(np.int64)
    predicted = predict_labels(queries, pset, config)
    return float((predicted == truth).sum() / n_eligible)


def run_plan(
    train: EmbeddingDataset,
    test: EmbeddingDataset,
    plan: IncrementPlan,
    config: DecisionConfig = DecisionConfig(),
    n_runs: int = 1,
) -> IncrementalState:
    """Execute every step of the plan, repeating with derived seeds.

    Run r uses base seed ``plan.seed + r``; per-step accuracies are aggregated
    into mean and sample std across runs. The returned state is the final
    state of run 0 and carries one snapshot per step plus the aggregated
    step metrics.
    """
    if n_runs < 1:
        raise UsageError(f"n_runs must be >= 1, got {n_runs}")
    by_class = split_by_class(train)
    missing = [c for c in plan.class_order if c not in by_class]
    if missing:
        raise UsageError(f"plan names classes absent from training data: {missing}")

    steps = plan.steps()
    accuracies = np.zeros((n_runs, len(steps)))
    fit_times = np.zeros((n_runs, len(steps)))
    eval_times = np.zeros((n_runs, len(steps)))
    first_state: IncrementalState | None = None
    snapshots: list[IncrementalState] = []

    for run in range(n_runs):
        state = IncrementalState(plan, train.manifest.fingerprint(), run_seed=plan.seed + run)
        for s, class_batch in enumerate(steps):
            t0 = time.perf_counter()
            state = state.advance({cid: by_class[cid] for cid in class_batch})
            t1 = time.perf_counter()
            accuracies[run, s] = evaluate_step(state, test, config)
            t2 = time.perf_counter()
            fit_times[run, s] = t1 - t0
            eval_times[run, s] = t2 - t1
            if run == 0:
                snapshots.append(state)
        if run == 0:
            first_state = state

    metrics = []
    for s in range(len(steps)):
        std = float(np.std(accuracies[:, s], ddof=1)) if n_runs >= 2 else None
        metrics.append(
            StepMetrics(
                step=s + 1,
                n_classes=sum(len(b) for b in steps[: s + 1]),
                accuracy_mean=float(accuracies[:, s].mean()),
                accuracy_std=std,
                fit_seconds=float(fit_times[:, s].mean()),
                eval_seconds=float(eval_times[:, s].mean()),
            )
        )
    assert first_state is not None
    first_state.step_metrics = metrics
    first_state.snapshots = snapshots
    return first_state

"""Explanations: ranked prototype distances, symbolic rules, ranking traces.

Reports reference training records by index only; joining indexes back to
images is the extraction harness's job. JSON and Markdown renderings carry
the same content.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decision import distances_to_prototypes
from .errors import UsageError
from .incremental import IncrementalState
from .selection import KIND_EXEMPLAR, PrototypeSet


class UnsupportedMethodError(UsageError):
    """Raised when rules are requested from a centroid-only prototype set."""


@dataclass(frozen=True)
class RankedPrototype:
    class_id: int
    distance: float
    source_index: int | None
    kind: str
    position: tuple[int, int]  # (class_id, within-class index)


@dataclass(frozen=True)
class ExplanationReport:
    query_index: int | None
    predicted_class: int
    ground_truth: int | None
    ranking: tuple[RankedPrototype, ...]  # ascending by distance
    top: tuple[RankedPrototype, ...]
    bottom: tuple[RankedPrototype, ...]
    normalized_scores: tuple[float, ...] | None  # aligned with ranking

    def to_json_dict(self, class_names: tuple[str, ...] | None = None) -> dict:
        def entry(p: RankedPrototype, i: int) -> dict:
            out = {
                "class": p.class_id,
                "distance": p.distance,
                "source_index": p.source_index,
                "kind": p.kind,
            }
            if class_names is not None:
                out["class_name"] = class_names[p.class_id]
            if self.normalized_scores is not None:
                out["normalized_distance"] = self.normalized_scores[i]
            return out

        index_of = {p: i for i, p in enumerate(self.ranking)}
        return {
            "query_index": self.query_index,
            "predicted_class": self.predicted_class,
            "ground_truth": self.ground_truth,
            "ranking": [entry(p, i) for i, p in enumerate(self.ranking)],
            "top": [entry(p, index_of[p]) for p in self.top],
            "bottom": [entry(p, index_of[p]) for p in self.bottom],
        }


def explain(
    query: np.ndarray,
    pset: PrototypeSet,
    k_top: int = 3,
    k_bottom: int = 3,
    query_index: int | None = None,
    ground_truth: int | None = None,
) -> ExplanationReport:
    """Rank every prototype by distance to the query.

    The rank-1 entry always agrees with the winner-takes-all prediction; ties
    order by canonical prototype index.
    """
    total = pset.total_count()
    if k_top < 0 or k_bottom < 0 or k_top + k_bottom > total:
        raise UsageError(
            f"k_top + k_bottom = {k_top + k_bottom} exceeds prototype count {total}"
        )
    dists = distances_to_prototypes(query, pset)
    order = np.argsort(dists, kind="stable")
    labels = pset.stacked_labels()
    protos = pset.flat()
    ranking = tuple(
        RankedPrototype(
            class_id=int(labels[i]),
            distance=float(dists[i]),
            source_index=protos[i].source_index,
            kind=protos[i].kind,
            position=pset.position(int(i)),
        )
        for i in order
    )
    dist_sum = float(dists.sum())
    if dist_sum > 0.0:
        scores = tuple(float(dists[i]) / dist_sum for i in order)
    else:
        scores = tuple(1.0 / total for _ in order)
    return ExplanationReport(
        query_index=query_index,
        predicted_class=ranking[0].class_id,
        ground_truth=ground_truth,
        ranking=ranking,
        top=ranking[:k_top],
        bottom=ranking[len(ranking) - k_bottom :] if k_bottom else (),
        normalized_scores=scores,
    )


def report_to_markdown(
    report: ExplanationReport, class_names: tuple[str, ...] | None = None
) -> str:
    """Human layout: most similar prototypes above the query, most dissimilar below."""

    def name(cid: int) -> str:
        return class_names[cid] if class_names is not None else f"class {cid}"

    def row(p: RankedPrototype) -> str:
        src = f"train[{p.source_index}]" if p.source_index is not None else "(centroid)"
        return f"| {name(p.class_id)} | {p.distance:.3f} | {src} | {p.kind} |"

    lines = []
    header = f"# Query {report.query_index}" if report.query_index is not None else "# Query"
    lines.append(header)
    lines.append("")
    lines.append(f"Prediction: **{name(report.predicted_class)}**")
    if report.ground_truth is not None:
        lines.append(f"Ground truth: {name(report.ground_truth)}")
    lines.append("")
    lines.append("## Similar")
    lines.append("")
    lines.append("| class | l2 distance | exemplar | kind |")
    lines.append("|---|---|---|---|")
    lines.extend(row(p) for p in report.top)
    lines.append("")
    lines.append("## Dissimilar")
    lines.append("")
    lines.append("| class | l2 distance | exemplar | kind |")
    lines.append("|---|---|---|---|")
    lines.extend(row(p) for p in report.bottom)
    lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class SymbolicRule:
    class_id: int
    antecedent_sources: tuple[int, ...]  # training-record indices


@dataclass(frozen=True)
class SymbolicRuleSet:
    rules: tuple[SymbolicRule, ...]

    def render_text(self, class_names: tuple[str, ...] | None = None) -> str:
        lines = []
        for rule in self.rules:
            name = (
                class_names[rule.class_id]
                if class_names is not None
                else f"class {rule.class_id}"
            )
            clauses = " OR ".join(f"(Q ~ train[{i}])" for i in rule.antecedent_sources)
            lines.append(f"IF {clauses} THEN '{name}'")
        return "\n".join(lines) + "\n"

    def to_json_dict(self, class_names: tuple[str, ...] | None = None) -> dict:
        out = []
        for rule in self.rules:
            entry: dict = {
                "class": rule.class_id,
                "antecedent_source_indices": list(rule.antecedent_sources),
            }
            if class_names is not None:
                entry["class_name"] = class_names[rule.class_id]
            out.append(entry)
        return {"rules": out}


def emit_rules(pset: PrototypeSet, max_antecedents: int = 3) -> SymbolicRuleSet:
    """One disjunctive rule per class over its exemplar prototypes.

    Only exemplar-kind prototypes (real training records) may appear; a set
    whose classes carry no exemplars cannot be rendered as rules.
    """
    if max_antecedents < 1:
        raise UsageError(f"max_antecedents must be >= 1, got {max_antecedents}")
    rules = []
    for cid, protos in pset.per_class.items():
        sources = [p.source_index for p in protos if p.kind == KIND_EXEMPLAR]
        if not sources:
            raise UnsupportedMethodError(
                f"method {pset.method!r} produced no exemplar prototypes for class "
                f"{cid}; symbolic rules need real training records"
            )
        rules.append(SymbolicRule(class_id=cid, antecedent_sources=tuple(sources[:max_antecedents])))
    return SymbolicRuleSet(rules=tuple(rules))


def trace_ranking(
    query: np.ndarray,
    states: list[IncrementalState],
    k_top: int = 3,
    k_bottom: int = 3,
    query_index: int | None = None,
    ground_truth: int | None = None,
) -> list[ExplanationReport]:
    """One explanation per incremental snapshot, in step order.

    Prototypes that persist across snapshots keep bit-identical distances
    because both the features and the prototypes are frozen.
    """
    if not states:
        raise UsageError("no snapshots to trace")
    return [
        explain(
            query,
            state.to_prototype_set(),
            k_top=k_top,
            k_bottom=k_bottom,
            query_index=query_index,
            ground_truth=ground_truth,
        )
        for state in states
    ]

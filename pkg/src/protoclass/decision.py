"""Nearest-prototype decision rules and similarity scores.

The engine stores positive Euclidean distances; smaller distance means more
similar. The winner-takes-all rule returns the class of the single nearest
prototype; the kNN variant takes a uniform majority vote over the k nearest.
All distances are accumulated in float64 regardless of storage precision, and
ties break toward the lowest canonical prototype index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .selection import PrototypeSet

RULE_WTA = "winner_takes_all"
RULE_KNN = "knn"
TRANSFORM_RAW = "raw_distance"
TRANSFORM_EXP = "exp_normalized"


@dataclass(frozen=True)
class DecisionConfig:
    """Decision rule plus similarity transform."""

    rule: str = RULE_WTA
    k: int = 1
    similarity_transform: str = TRANSFORM_RAW

    def __post_init__(self):
        if self.rule not in (RULE_WTA, RULE_KNN):
            raise UsageError(f"unknown decision rule {self.rule!r}")
        if self.similarity_transform not in (TRANSFORM_RAW, TRANSFORM_EXP):
            raise UsageError(f"unknown similarity transform {self.similarity_transform!r}")
        if self.rule == RULE_KNN:
            if self.k < 1:
                raise UsageError(f"k must be >= 1, got {self.k}")
            if self.k % 2 == 0:
                raise UsageError(f"k must be odd, got {self.k}")


@dataclass(frozen=True)
class Prediction:
    class_id: int
    winning_prototype: tuple[int, int]  # (class_id, within-class index)
    distance: float
    scores: dict[int, float] | None = None


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two vectors, accumulated in float64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(diff @ diff))


def distances_to_prototypes(query: np.ndarray, pset: PrototypeSet) -> np.ndarray:
    """Distances from one query to every prototype, in canonical order."""
    q = np.asarray(query, dtype=np.float64)
    matrix = pset.stacked_vectors()
    if q.shape != (matrix.shape[1],):
        raise UsageError(
            f"query has dim {q.shape} but prototypes have dim {matrix.shape[1]}"
        )
    diff = matrix - q
    return np.sqrt(np.einsum("pd,pd->p", diff, diff))


def classify_wta(query: np.ndarray, pset: PrototypeSet) -> Prediction:
    """Class of the nearest prototype (minimum Euclidean distance)."""
    dists = distances_to_prototypes(query, pset)
    best = int(np.argmin(dists))
    labels = pset.stacked_labels()
    return Prediction(
        class_id=int(labels[best]),
        winning_prototype=pset.position(best),
        distance=float(dists[best]),
    )


def classify_knn(query: np.ndarray, pset: PrototypeSet, k: int) -> Prediction:
    """Uniform-weight majority vote over the k nearest prototypes.

    A vote tie goes to the tied class whose member appears earliest in the
    distance ranking; with k=1 this reduces exactly to classify_wta.
    """
    total = pset.total_count()
    if not 1 <= k <= total:
        raise UsageError(f"k={k} out of range [1, {total}]")
    dists = distances_to_prototypes(query, pset)
    order = np.argsort(dists, kind="stable")[:k]
    labels = pset.stacked_labels()
    votes: dict[int, int] = {}
    first_rank: dict[int, int] = {}
    for rank, flat in enumerate(order):
        cid = int(labels[flat])
        votes[cid] = votes.get(cid, 0) + 1
        first_rank.setdefault(cid, rank)
    best_votes = max(votes.values())
    winner = min((c for c in votes if votes[c] == best_votes), key=first_rank.get)
    flat = int(order[first_rank[winner]])
    return Prediction(
        class_id=winner,
        winning_prototype=pset.position(flat),
        distance=float(dists[flat]),
    )


def similarity_scores(query: np.ndarray, pset: PrototypeSet) -> dict[int, float]:
    """Per-class similarity in (0, 1] summing to 1.

    Each class is represented by its best (smallest) prototype distance d_c;
    the score is exp(-d_c) normalized over classes, computed with the usual
    min-shift so large distances cannot underflow the whole sum.
    """
    dists = distances_to_prototypes(query, pset)
    labels = pset.stacked_labels()
    best: dict[int, float] = {}
    for cid in pset.class_ids:
        best[cid] = float(dists[labels == cid].min())
    d_min = min(best.values())
    weights = {cid: np.exp(-(d - d_min)) for cid, d in best.items()}
    total = sum(weights.values())
    return {cid: float(w / total) for cid, w in weights.items()}


def predict(query: np.ndarray, pset: PrototypeSet, config: DecisionConfig) -> Prediction:
    """Apply the configured rule, attaching scores when requested."""
    if config.rule == RULE_KNN:
        pred = classify_knn(query, pset, config.k)
    else:
        pred = classify_wta(query, pset)
    if config.similarity_transform == TRANSFORM_EXP:
        pred = Prediction(
            class_id=pred.class_id,
            winning_prototype=pred.winning_prototype,
            distance=pred.distance,
            scores=similarity_scores(query, pset),
        )
    return pred


def predict_labels(
    queries: np.ndarray, pset: PrototypeSet, config: DecisionConfig
) -> np.ndarray:
    """Predicted class ids for a (m, d) query matrix, row by row.

    Runs the exact same per-query code path as predict(), so batch and
    single-query results can never diverge.
    """
    queries = np.asarray(queries)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for i in range(queries.shape[0]):
        if config.rule == RULE_KNN:
            out[i] = classify_knn(queries[i], pset, config.k).class_id
        else:
            out[i] = classify_wta(queries[i], pset).class_id
    return out

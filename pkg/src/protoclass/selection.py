"""Per-class prototype selection strategies and the prototype file format.

Five strategies: random exemplar sampling, k-means centroids, k-means snapped
to the nearest real exemplar, density-driven online selection, and
radius-driven online local means. All are deterministic given (data order,
seed, params); online methods are single-pass by construction.

Prototype file (little-endian):

    bytes 0-7   ASCII magic "IDEALPRO"
    u32         format version (currently 1)
    u32         d, vector dimension
    u32         prototype count
    per prototype:
        u32 class_id, u8 kind (0 centroid / 1 exemplar),
        i64 source_index (-1 when absent), u64 support, d x f32 vector

with a JSON sidecar (method, params, seed, manifest fingerprint) at
``<path>.json``.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bundle import EmbeddingDataset, EmbeddingRecord, Normalizer, split_by_class
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    TruncatedPayloadError,
    UsageError,
    VersionMismatchError,
)

PROTO_MAGIC = b"IDEALPRO"
PROTO_VERSION = 1

KIND_CENTROID = "centroid"
KIND_EXEMPLAR = "exemplar"
_KIND_CODES = {KIND_CENTROID: 0, KIND_EXEMPLAR: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

METHODS = ("random", "kmeans", "kmeans_nearest", "xdnn", "elm")

DEFAULT_KMEANS_MAX_ITERS = 300
DEFAULT_KMEANS_TOL = 1e-4
DEFAULT_KMEANS_RESTARTS = 10


@dataclass(frozen=True, eq=False)
class Prototype:
    """A representative latent-space point for one class.

    Exemplars are bit-exact copies of a training record (``source_index``
    points at it); centroids are synthetic means. Equality is bit-exact on
    the vector.
    """

    class_id: int
    vector: np.ndarray
    kind: str
    source_index: int | None
    support: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, Prototype):
            return NotImplemented
        return (
            self.class_id == other.class_id
            and self.kind == other.kind
            and self.source_index == other.source_index
            and self.support == other.support
            and self.vector.tobytes() == other.vector.tobytes()
        )

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise UsageError(f"unknown prototype kind {self.kind!r}")
        if (self.source_index is not None) != (self.kind == KIND_EXEMPLAR):
            raise UsageError("source_index must be present iff kind is exemplar")
        if self.support < 1:
            raise UsageError("prototype support must be >= 1")
        vec = np.ascontiguousarray(self.vector, dtype=np.float32)
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class BudgetSpec:
    """Per-class prototype budget: a fraction of the class or a fixed count."""

    mode: str
    value: float

    def __post_init__(self):
        if self.mode == "fraction_of_class":
            if not 0.0 < self.value <= 1.0:
                raise UsageError(f"fraction budget must be in (0, 1], got {self.value}")
        elif self.mode == "fixed_per_class":
            if self.value < 1 or int(self.value) != self.value:
                raise UsageError(f"fixed budget must be a positive integer, got {self.value}")
        else:
            raise UsageError(f"unknown budget mode {self.mode!r}")

    def resolve(self, class_size: int) -> int:
        """Number of prototypes for a class of the given size."""
        if class_size < 1:
            raise UsageError("class is empty")
        if self.mode == "fraction_of_class":
            k = max(1, int(math.floor(self.value * class_size + 0.5)))
        else:
            k = int(self.value)
        if k > class_size:
            raise UsageError(f"budget {k} exceeds class size {class_size}")
        return k

    def describe(self) -> str:
        if self.mode == "fraction_of_class":
            return f"fraction:{self.value:g}"
        return f"fixed:{int(self.value)}"


def _stack(records: Sequence[EmbeddingRecord]) -> tuple[np.ndarray, np.ndarray]:
    if not records:
        raise UsageError("class has no records")
    pairs = [(r.vector, r.index) for r in records]  # one pass over the stream
    vectors = np.stack([v for v, _ in pairs]).astype(np.float32)
    indices = np.asarray([i for _, i in pairs], dtype=np.int64)
    return vectors, indices


def select_random(
    records: Sequence[EmbeddingRecord], budget: BudgetSpec, seed: int
) -> list[Prototype]:
    """Sample k distinct exemplars uniformly without replacement."""
    vectors, indices = _stack(records)
    k = budget.resolve(len(records))
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(records), size=k, replace=False)
    return [
        Prototype(
            class_id=records[0].label,
            vector=vectors[i],
            kind=KIND_EXEMPLAR,
            source_index=int(indices[i]),
            support=1,
        )
        for i in picks
    ]


@dataclass
class KMeansResult:
    centers: np.ndarray  # (k, d) float64
    assignment: np.ndarray  # (n,) int
    inertia_history: list[float]
    final_inertia: float


def _sq_dist_matrix(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Exact squared distances (n, k); one differenced pass per center."""
    n, k = points.shape[0], centers.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    for j in range(k):
        diff = points - centers[j]
        out[:, j] = np.einsum("nd,nd->n", diff, diff)
    return out


def _kmeanspp_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding; degenerate all-duplicate mass falls back to lowest index."""
    n = points.shape[0]
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    seeds = [first]
    chosen[first] = True
    diff = points - points[first]
    best_d2 = np.einsum("nd,nd->n", diff, diff)
    while len(seeds) < k:
        candidates = np.flatnonzero(~chosen)
        weights = best_d2[candidates]
        total = float(weights.sum())
        if total <= 0.0:
            pick = int(candidates[0])
        else:
            r = rng.random() * total
            pick = int(candidates[np.searchsorted(np.cumsum(weights), r, side="right").clip(max=len(candidates) - 1)])
        seeds.append(pick)
        chosen[pick] = True
        diff = points - points[pick]
        best_d2 = np.minimum(best_d2, np.einsum("nd,nd->n", diff, diff))
    return np.asarray(seeds, dtype=np.int64)


def _repair_empty_clusters(
    points: np.ndarray, centers: np.ndarray, assignment: np.ndarray, k: int
) -> np.ndarray:
    """Reseed each empty cluster at the point farthest from its assigned centroid."""
    counts = np.bincount(assignment, minlength=k)
    if (counts > 0).all():
        return assignment
    assignment = assignment.copy()
    diffs = points - centers[assignment]
    dist_to_own = np.einsum("nd,nd->n", diffs, diffs)
    order = np.argsort(-dist_to_own, kind="stable")
    stolen: set[int] = set()
    for j in range(k):
        if counts[j] > 0:
            continue
        pick = next(
            int(i) for i in order if int(i) not in stolen and counts[assignment[i]] > 1
        )
        stolen.add(pick)
        counts[assignment[pick]] -= 1
        assignment[pick] = j
        counts[j] = 1
    return assignment


def _lloyd_single(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iters: int,
    tol: float,
) -> KMeansResult:
    n = points.shape[0]
    centers = points[_kmeanspp_seeds(points, k, rng)].copy()
    history: list[float] = []
    prev_assignment = None
    assignment = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        d2 = _sq_dist_matrix(points, centers)
        assignment = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), assignment].sum())
        history.append(inertia)
        if prev_assignment is not None and np.array_equal(assignment, prev_assignment):
            break
        if len(history) >= 2 and history[-2] > 0:
            if (history[-2] - history[-1]) / history[-2] < tol:
                break
        if inertia == 0.0:
            break
        assignment = _repair_empty_clusters(points, centers, assignment, k)
        for j in range(k):
            centers[j] = points[assignment == j].mean(axis=0)
        prev_assignment = assignment
    # final means must match the final assignment (tol break can leave them stale)
    assignment = _repair_empty_clusters(points, centers, assignment, k)
    for j in range(k):
        centers[j] = points[assignment == j].mean(axis=0)
    diffs = points - centers[assignment]
    final_inertia = float(np.einsum("nd,nd->n", diffs, diffs).sum())
    return KMeansResult(
        centers=centers,
        assignment=assignment,
        inertia_history=history,
        final_inertia=final_inertia,
    )


def lloyd_kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_KMEANS_MAX_ITERS,
    tol: float = DEFAULT_KMEANS_TOL,
    n_restarts: int = DEFAULT_KMEANS_RESTARTS,
) -> KMeansResult:
    """Best of ``n_restarts`` Lloyd runs, each seeded by the D^2 scheme.

    Restarts share one generator, so the whole procedure is a deterministic
    function of ``seed``. Within each run, the recorded inertia (sum of
    squared distances to the assigned centroid, measured right after each
    assignment step) never increases; the run with the lowest converged
    inertia wins, earlier runs winning ties.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise UsageError("k must be >= 1")
    if k > n:
        raise UsageError(f"k={k} exceeds number of points {n}")
    if n_restarts < 1:
        raise UsageError("n_restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best: KMeansResult | None = None
    for _ in range(n_restarts):
        result = _lloyd_single(points, k, rng, max_iters, tol)
        if best is None or result.final_inertia < best.final_inertia:
            best = result
        if best.final_inertia == 0.0:
            break
    return best


def kmeans_fit(
    records: Sequence[EmbeddingRecord],
    budget: BudgetSpec,
    seed: int,
    max_iters: int = DEFAULT_KMEANS_MAX_ITERS,
    tol: float = DEFAULT_KMEANS_TOL,
    n_restarts: int = DEFAULT_KMEANS_RESTARTS,
) -> list[Prototype]:
    """Cluster one class and return the k centroids as prototypes."""
    vectors, _ = _stack(records)
    k = budget.resolve(len(records))
    result = lloyd_kmeans(vectors, k, seed, max_iters=max_iters, tol=tol, n_restarts=n_restarts)
    counts = np.bincount(result.assignment, minlength=k)
    return [
        Prototype(
            class_id=records[0].label,
            vector=result.centers[j].astype(np.float32),
            kind=KIND_CENTROID,
            source_index=None,
            support=int(counts[j]),
        )
        for j in range(k)
    ]


def snap_to_nearest(
    centroids: Sequence[Prototype], records: Sequence[EmbeddingRecord]
) -> list[Prototype]:
    """Replace each centroid by its nearest class record, greedily deduplicated.

    Centroids claim records in list order; a record feeds at most one
    prototype, so a later centroid whose nearest record is taken falls back to
    the next-nearest unclaimed one. Distance ties break to the lowest index.
    """
    if not centroids:
        raise UsageError("no centroids to snap")
    vectors, indices = _stack(records)
    if len(centroids) > len(records):
        raise UsageError(
            f"{len(centroids)} centroids cannot snap to {len(records)} records"
        )
    points = vectors.astype(np.float64)
    claimed: set[int] = set()
    out: list[Prototype] = []
    for proto in centroids:
        diff = points - proto.vector.astype(np.float64)
        d2 = np.einsum("nd,nd->n", diff, diff)
        order = np.argsort(d2, kind="stable")
        pick = next(int(i) for i in order if int(i) not in claimed)
        claimed.add(pick)
        out.append(
            Prototype(
                class_id=proto.class_id,
                vector=vectors[pick],
                kind=KIND_EXEMPLAR,
                source_index=int(indices[pick]),
                support=proto.support,
            )
        )
    return out


def xdnn_fit(records: Sequence[EmbeddingRecord]) -> list[Prototype]:
    """Single-pass, parameter-free selection driven by a running density.

    Per class a running mean ``mu``, running mean of squared norms and count
    are updated per sample; the sample's density 1 / (1 + ||z - mu||^2 +
    mean_sq - ||mu||^2) is compared against the densities of the current
    prototypes. A sample beyond either extreme founds a new prototype
    (exemplar); otherwise the nearest prototype absorbs it and its vector
    moves to the running mean of its members (degrading to a centroid).
    The first sample always founds a prototype.
    """
    vectors, indices = _stack(records)
    points = vectors.astype(np.float64)
    class_id = records[0].label

    mu = np.zeros(points.shape[1], dtype=np.float64)
    mean_sq = 0.0
    count = 0
    proto_vecs: list[np.ndarray] = []
    proto_src: list[int] = []
    proto_support: list[int] = []
    proto_pristine: list[bool] = []

    for t in range(points.shape[0]):
        x = points[t]
        count += 1
        mu += (x - mu) / count
        mean_sq += (float(x @ x) - mean_sq) / count
        spread = max(mean_sq - float(mu @ mu), 0.0)

        def density(z: np.ndarray) -> float:
            diff = z - mu
            return 1.0 / (1.0 + float(diff @ diff) + spread)

        if not proto_vecs:
            proto_vecs.append(x.copy())
            proto_src.append(int(indices[t]))
            proto_support.append(1)
            proto_pristine.append(True)
            continue
        d_x = density(x)
        d_protos = [density(v) for v in proto_vecs]
        if d_x > max(d_protos) or d_x < min(d_protos):
            proto_vecs.append(x.copy())
            proto_src.append(int(indices[t]))
            proto_support.append(1)
            proto_pristine.append(True)
        else:
            dists = [float(np.sum((x - v) ** 2)) for v in proto_vecs]
            j = int(np.argmin(dists))
            proto_support[j] += 1
            proto_vecs[j] += (x - proto_vecs[j]) / proto_support[j]
            proto_pristine[j] = False

    out = []
    for vec, src, support, pristine in zip(
        proto_vecs, proto_src, proto_support, proto_pristine
    ):
        out.append(
            Prototype(
                class_id=class_id,
                vector=vec.astype(np.float32),
                kind=KIND_EXEMPLAR if pristine else KIND_CENTROID,
                source_index=src if pristine else None,
                support=support,
            )
        )
    return out


def elm_fit(records: Sequence[EmbeddingRecord], radius: float) -> list[Prototype]:
    """Single-pass local-means clustering with a fixed absorption radius.

    Each sample joins the nearest cluster mean if within ``radius`` (the mean
    then moves incrementally), otherwise it opens a new cluster. Prototypes
    are the final means in creation order.
    """
    if radius <= 0:
        raise UsageError(f"radius must be positive, got {radius}")
    vectors, _ = _stack(records)
    points = vectors.astype(np.float64)
    class_id = records[0].label

    means: list[np.ndarray] = []
    supports: list[int] = []
    for t in range(points.shape[0]):
        x = points[t]
        if means:
            dists = [math.sqrt(float(np.sum((x - m) ** 2))) for m in means]
            j = int(np.argmin(dists))
            if dists[j] <= radius:
                supports[j] += 1
                means[j] += (x - means[j]) / supports[j]
                continue
        means.append(x.copy())
        supports.append(1)
    return [
        Prototype(
            class_id=class_id,
            vector=m.astype(np.float32),
            kind=KIND_CENTROID,
            source_index=None,
            support=s,
        )
        for m, s in zip(means, supports)
    ]


def class_seed(base_seed: int, class_id: int) -> int:
    """Per-class seed; XOR keeps fits independent of class arrival order."""
    return (int(base_seed) ^ int(class_id)) & 0xFFFFFFFFFFFFFFFF


class PrototypeSet:
    """All prototypes of a trained model, grouped per class.

    Immutable once built; the flat canonical order (ascending class id, then
    per-class position) defines tie-breaking everywhere downstream.
    """

    def __init__(
        self,
        manifest_ref: dict,
        per_class: dict[int, Sequence[Prototype]],
        method: str,
        method_params: dict,
        seed: int,
        normalizer: Normalizer | None = None,
    ):
        if not per_class:
            raise UsageError("prototype set has no classes")
        dim = int(manifest_ref["dim"])
        cleaned: dict[int, tuple[Prototype, ...]] = {}
        for cid in sorted(per_class):
            protos = tuple(per_class[cid])
            if not protos:
                raise UsageError(f"class {cid} has no prototypes")
            for p in protos:
                if p.vector.shape[0] != dim:
                    raise DimensionMismatchError(
                        f"class {cid}: prototype dim {p.vector.shape[0]} != {dim}"
                    )
            cleaned[cid] = protos
        self.manifest_ref = dict(manifest_ref)
        self.per_class = cleaned
        self.method = method
        self.method_params = dict(method_params)
        self.seed = int(seed)
        self.normalizer = normalizer
        self._flat_cache: tuple[np.ndarray, np.ndarray, list[Prototype]] | None = None

    @property
    def dim(self) -> int:
        return int(self.manifest_ref["dim"])

    @property
    def class_ids(self) -> list[int]:
        return list(self.per_class)

    def total_count(self) -> int:
        return sum(len(v) for v in self.per_class.values())

    def flat(self) -> list[Prototype]:
        return self._stacked()[2]

    def _stacked(self) -> tuple[np.ndarray, np.ndarray, list[Prototype]]:
        if self._flat_cache is None:
            protos = [p for cid in self.per_class for p in self.per_class[cid]]
            matrix = np.stack([p.vector for p in protos]).astype(np.float64)
            labels = np.asarray([p.class_id for p in protos], dtype=np.int64)
            matrix.flags.writeable = False
            labels.flags.writeable = False
            self._flat_cache = (matrix, labels, protos)
        return self._flat_cache

    def stacked_vectors(self) -> np.ndarray:
        """(P, d) float64 matrix in canonical order."""
        return self._stacked()[0]

    def stacked_labels(self) -> np.ndarray:
        return self._stacked()[1]

    def position(self, flat_index: int) -> tuple[int, int]:
        """Map a canonical flat index to (class_id, within-class index)."""
        for cid, protos in self.per_class.items():
            if flat_index < len(protos):
                return cid, flat_index
            flat_index -= len(protos)
        raise UsageError(f"flat index {flat_index} out of range")


def fit_class_prototypes(
    method: str,
    records: Sequence[EmbeddingRecord],
    params: dict,
    budget: BudgetSpec | None,
    seed: int,
) -> list[Prototype]:
    if method == "random":
        return select_random(records, budget, seed)
    if method in ("kmeans", "kmeans_nearest"):
        centroids = kmeans_fit(
            records,
            budget,
            seed,
            max_iters=params.get("max_iters", DEFAULT_KMEANS_MAX_ITERS),
            tol=params.get("tol", DEFAULT_KMEANS_TOL),
            n_restarts=params.get("restarts", DEFAULT_KMEANS_RESTARTS),
        )
        if method == "kmeans":
            return centroids
        return snap_to_nearest(centroids, records)
    if method == "xdnn":
        return xdnn_fit(records)
    if method == "elm":
        if "radius" not in params:
            raise UsageError("elm requires a radius parameter")
        return elm_fit(records, params["radius"])
    raise UsageError(f"unknown method {method!r} (expected one of {METHODS})")


def fit_prototypes(
    dataset: EmbeddingDataset,
    method: str,
    params: dict | None = None,
    budget: BudgetSpec | None = None,
    seed: int = 0,
    normalizer: Normalizer | None = None,
    jobs: int = 1,
) -> PrototypeSet:
    """Fit prototypes for every class present in the dataset.

    Each class is fitted independently under seed ``base_seed XOR class_id``,
    which makes the result invariant to class arrival order. ``budget`` is
    required for random/kmeans/kmeans_nearest and ignored by the online
    methods, whose prototype counts are data-driven.
    """
    if len(dataset) == 0:
        raise UsageError("cannot fit prototypes on an empty dataset")
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r} (expected one of {METHODS})")
    params = dict(params or {})
    if method in ("random", "kmeans", "kmeans_nearest") and budget is None:
        raise UsageError(f"method {method} requires a budget")
    by_class = split_by_class(dataset)

    def fit_class(cid: int) -> tuple[int, list[Prototype]]:
        try:
            return cid, fit_class_prototypes(method, by_class[cid], params, budget, class_seed(seed, cid))
        except UsageError as exc:
            raise UsageError(f"class {cid}: {exc}") from exc

    cids = list(by_class)
    if jobs > 1 and len(cids) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fitted = dict(pool.map(fit_class, cids))
    else:
        fitted = dict(fit_class(cid) for cid in cids)

    recorded = dict(params)
    if budget is not None:
        recorded["budget_mode"] = budget.mode
        recorded["budget_value"] = budget.value
    return PrototypeSet(
        manifest_ref=dataset.manifest.fingerprint(),
        per_class=fitted,
        method=method,
        method_params=recorded,
        seed=seed,
        normalizer=normalizer,
    )


def save_prototypes(pset: PrototypeSet, path: str | Path) -> None:
    """Write the prototype file and its JSON sidecar. Byte-deterministic."""
    path = Path(path)
    protos = pset.flat()
    d = pset.dim
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sIII", PROTO_MAGIC, PROTO_VERSION, d, len(protos)))
        for p in protos:
            src = -1 if p.source_index is None else p.source_index
            fh.write(struct.pack("<IBqQ", p.class_id, _KIND_CODES[p.kind], src, p.support))
            fh.write(p.vector.astype("<f4").tobytes())
    sidecar = {
        "method": pset.method,
        "params": pset.method_params,
        "seed": pset.seed,
        "manifest_ref": pset.manifest_ref,
    }
    if pset.normalizer is not None:
        sidecar["normalizer"] = pset.normalizer.to_json_dict()
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_prototypes(path: str | Path) -> PrototypeSet:
    """Read a prototype file; the sidecar is required."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 20:
        raise TruncatedPayloadError(f"file is {len(raw)} bytes, header needs 20")
    magic, version, d, count = struct.unpack_from("<8sIII", raw)
    if magic != PROTO_MAGIC:
        raise BadMagicError(f"bad magic at offset 0: expected {PROTO_MAGIC!r}, found {magic!r}")
    if version != PROTO_VERSION:
        raise VersionMismatchError(
            f"unsupported version {version} at offset 8 (expected {PROTO_VERSION})"
        )
    rec_size = 4 + 1 + 8 + 8 + 4 * d
    expected = 20 + count * rec_size
    if len(raw) != expected:
        raise TruncatedPayloadError(
            f"header declares {count} prototypes of dim {d} ({expected} bytes) but "
            f"file has {len(raw)} bytes"
        )
    per_class: dict[int, list[Prototype]] = {}
    offset = 20
    for i in range(count):
        cid, kind_code, src, support = struct.unpack_from("<IBqQ", raw, offset)
        offset += 21
        vec = np.frombuffer(raw, dtype="<f4", count=d, offset=offset).copy()
        offset += 4 * d
        if kind_code not in _KIND_NAMES:
            raise FormatError(f"prototype {i}: unknown kind code {kind_code}")
        per_class.setdefault(cid, []).append(
            Prototype(
                class_id=cid,
                vector=vec,
                kind=_KIND_NAMES[kind_code],
                source_index=None if src < 0 else int(src),
                support=int(support),
            )
        )
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise FormatError(f"missing prototype sidecar {sidecar_path}")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable sidecar {sidecar_path}: {exc}") from exc
    try:
        manifest_ref = dict(sidecar["manifest_ref"])
        method = sidecar["method"]
        params = dict(sidecar["params"])
        seed = int(sidecar["seed"])
    except KeyError as exc:
        raise FormatError(f"sidecar {sidecar_path} is missing key {exc}") from exc
    if int(manifest_ref.get("dim", d)) != d:
        raise DimensionMismatchError(
            f"sidecar dim={manifest_ref.get('dim')} but prototype file declares d={d}"
        )
    normalizer = None
    if "normalizer" in sidecar:
        normalizer = Normalizer.from_json_dict(sidecar["normalizer"])
    return PrototypeSet(
        manifest_ref=manifest_ref,
        per_class=per_class,
        method=method,
        method_params=params,
        seed=seed,
        normalizer=normalizer,
    )

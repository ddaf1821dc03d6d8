"""Feature encoding and deterministic k-means for objects inside a cell.

Numeric feature attributes are z-scored with the population standard
deviation (a constant column becomes all zeros); text and boolean
attributes one-hot encode with categories in first-appearance order.
Clustering is Lloyd's algorithm from k-means++ seeding, driven entirely
by a seeded PCG64 generator, with squared-Euclidean distance, lowest-
index tie-breaks, and empty clusters repaired by stealing the point
farthest from its current centroid.  The same inputs and seed always
reproduce the same clustering bit for bit; sums run in ascending row
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .codq import ObjectSet
from .errors import ClusteringError, FeatureError
from .mdregress import categories_in_order
from .star_store import Value

NULL_CATEGORY = "⟨null⟩"  # ⟨null⟩

DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-6  # relative SSE improvement


@dataclass(frozen=True)
class Encoding:
    """How one source attribute became feature columns."""

    kind: str  # "zscore" | "onehot"
    mean: float = 0.0
    std: float = 0.0
    categories: tuple[Value, ...] = ()

    def to_dict(self) -> dict:
        if self.kind == "zscore":
            return {"kind": "zscore", "mean": self.mean, "std": self.std}
        return {"kind": "onehot", "categories": [str(c) for c in self.categories]}


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # n x m, float64, no nulls
    columns: tuple[str, ...]
    encodings: dict[str, Encoding]  # per source attribute

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @staticmethod
    def from_array(values: np.ndarray, columns: Optional[tuple[str, ...]] = None) -> "FeatureMatrix":
        """Wrap a raw numeric matrix (no encoding), e.g. for direct clustering."""
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise FeatureError("feature matrix must be two-dimensional")
        cols = columns if columns is not None else tuple(f"x{i}" for i in range(arr.shape[1]))
        return FeatureMatrix(values=arr, columns=cols, encodings={})

    def encoding_report(self) -> dict:
        return {name: enc.to_dict() for name, enc in self.encodings.items()}


def featurize(objects: ObjectSet, impute: bool = False) -> FeatureMatrix:
    """Encode the feature-role attributes of an object set as a real matrix.

    ``impute=True`` replaces numeric nulls with the column mean and turns
    categorical nulls into an explicit ``⟨null⟩`` category; otherwise any
    null raises, naming the attribute and object index.
    """
    schema = objects.schema
    feats = [(i, a) for i, a in enumerate(schema.attributes) if a.role == "feature"]
    if not feats:
        raise FeatureError("object set has no feature attributes")

    n = len(objects.objects)
    columns: list[str] = []
    blocks: list[np.ndarray] = []
    encodings: dict[str, Encoding] = {}

    for idx, attr in feats:
        raw = [o[idx] for o in objects.objects]
        if attr.type.value in ("integer", "real"):
            col = np.empty(n, dtype=float)
            null_at = [j for j, v in enumerate(raw) if v is None]
            if null_at and not impute:
                raise FeatureError(f"attribute {attr.name!r} is null at object {null_at[0]}")
            present = [float(v) for v in raw if v is not None]
            fill = float(np.mean(present)) if present else 0.0
            for j, v in enumerate(raw):
                col[j] = fill if v is None else float(v)
            constant = n == 0 or bool(np.all(col == col[0]))
            if constant:
                encodings[attr.name] = Encoding("zscore", mean=float(col[0]) if n else 0.0, std=0.0)
                blocks.append(np.zeros((n, 1)))
            else:
                mean = float(np.mean(col))
                std = float(np.sqrt(np.mean((col - mean) ** 2)))
                encodings[attr.name] = Encoding("zscore", mean=mean, std=std)
                blocks.append(((col - mean) / std).reshape(n, 1))
            columns.append(attr.name)
        else:
            if impute:
                vals: list[Value] = [NULL_CATEGORY if v is None else v for v in raw]
            else:
                null_at = [j for j, v in enumerate(raw) if v is None]
                if null_at:
                    raise FeatureError(f"attribute {attr.name!r} is null at object {null_at[0]}")
                vals = list(raw)
            cats = categories_in_order(vals)
            block = np.zeros((n, len(cats)))
            pos = {c: j for j, c in enumerate(cats)}
            for j, v in enumerate(vals):
                block[j, pos[v]] = 1.0
            encodings[attr.name] = Encoding("onehot", categories=tuple(cats))
            blocks.append(block)
            columns.extend(f"{attr.name}={c}" for c in cats)

    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return FeatureMatrix(values=values, columns=tuple(columns), encodings=encodings)


@dataclass(frozen=True)
class Clustering:
    k: int
    assignment: tuple[int, ...]
    centroids: np.ndarray  # k x m
    sse: float
    iterations: int
    seed: int
    sse_history: tuple[float, ...]
    max_iter: int
    tol: float

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for a in self.assignment:
            counts[a] += 1
        return counts

    def to_dict(self, encoding_report: Optional[dict] = None) -> dict:
        out = {"k": self.k, "seed": self.seed, "sse": self.sse, "iterations": self.iterations,
               "centroids": self.centroids.tolist(), "assignment": list(self.assignment),
               "sse_history": list(self.sse_history), "max_iter": self.max_iter, "tol": self.tol}
        if encoding_report is not None:
            out["encoding_report"] = encoding_report
        return out


def _sq_dists_to(x: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = x - center
    return np.einsum("ij,ij->i", diff, diff)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists_to(x, x[chosen[0]])
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = min(int(np.searchsorted(np.cumsum(d2), r, side="right")), n - 1)
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists_to(x, x[idx]))
    return x[chosen].copy()


def kmeans(m: Union[FeatureMatrix, np.ndarray], k: int, seed: int,
           max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> Clustering:
    """Deterministic Lloyd k-means; fully determined by (matrix, k, seed, max_iter, tol).

    Stops when the relative SSE improvement drops to ``tol`` or after
    ``max_iter`` iterations.  An update that would raise SSE through
    floating-point noise is discarded, so the recorded SSE history is
    non-increasing by construction.
    """
    x = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    n = x.shape[0]
    if k < 1:
        raise ClusteringError("k must be at least 1")
    if k > n:
        raise ClusteringError(f"k={k} exceeds the {n} available objects")
    if max_iter < 1:
        raise ClusteringError("max_iter must be at least 1")
    if tol < 0:
        raise ClusteringError("tol must be non-negative")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(x, k, rng)

    best_assign = np.zeros(n, dtype=int)
    prev_sse = float("inf")
    history: list[float] = []
    iterations = 0

    for _ in range(max_iter):
        iterations += 1
        d2 = np.empty((n, k))
        for j in range(k):
            d2[:, j] = _sq_dists_to(x, centroids[j])
        assign = np.argmin(d2, axis=1)  # first minimum wins: lowest-index tie-break

        counts = np.bincount(assign, minlength=k)
        if np.any(counts == 0):
            stolen: set[int] = set()
            for j in np.flatnonzero(counts == 0):
                own = d2[np.arange(n), assign].copy()
                own[list(stolen)] = -np.inf
                # never steal the last member of another cluster
                for p in np.argsort(-own, kind="stable"):
                    p = int(p)
                    if counts[assign[p]] > 1:
                        counts[assign[p]] -= 1
                        assign[p] = j
                        counts[j] = 1
                        stolen.add(p)
                        break

        sums = np.zeros((k, x.shape[1]))
        np.add.at(sums, assign, x)  # in ascending row order
        new_centroids = sums / np.bincount(assign, minlength=k)[:, None]

        diff = x - new_centroids[assign]
        sse = float(np.einsum("ij,ij->", diff, diff))
        if sse > prev_sse:  # floating-point wobble: keep the previous state
            iterations -= 1
            break
        centroids = new_centroids
        best_assign = assign
        history.append(sse)
        if np.isfinite(prev_sse) and (prev_sse - sse) <= tol * prev_sse:
            break
        prev_sse = sse

    return Clustering(k=k, assignment=tuple(int(a) for a in best_assign), centroids=centroids,
                      sse=history[-1] if history else 0.0, iterations=iterations, seed=seed,
                      sse_history=tuple(history), max_iter=max_iter, tol=tol)


def silhouette(m: Union[FeatureMatrix, np.ndarray], c: Clustering) -> float:
    """Mean silhouette coefficient (Euclidean); singleton members score 0.

    When both the mean intra-cluster distance and the nearest-other-cluster
    distance are zero the object contributes 0.
    """
    if c.k < 2:
        raise ClusteringError("silhouette requires at least 2 clusters")
    x = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    n = x.shape[0]
    assign = np.asarray(c.assignment)
    sizes = np.bincount(assign, minlength=c.k)
    if np.any(sizes == 0):
        raise ClusteringError("silhouette requires every cluster to be non-empty")

    membership = np.zeros((n, c.k))
    membership[np.arange(n), assign] = 1.0

    total = 0.0
    # exact pairwise distances, block by block (identical points give exactly 0)
    chunk = max(1, 4_000_000 // max(1, n * max(1, x.shape[1])))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        rows = slice(start, stop)
        block = x[rows][:, None, :] - x[None, :, :]
        dist = np.sqrt(np.einsum("cnm,cnm->cn", block, block))
        cluster_sums = dist @ membership  # chunk x k
        for local, i in enumerate(range(start, stop)):
            own = assign[i]
            if sizes[own] == 1:
                continue  # singleton contributes 0
            a = cluster_sums[local, own] / (sizes[own] - 1)
            b = min(cluster_sums[local, j] / sizes[j] for j in range(c.k) if j != own)
            denom = max(a, b)
            if denom > 0.0:
                total += (b - a) / denom
    return total / n

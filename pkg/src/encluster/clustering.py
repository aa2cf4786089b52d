"""Lloyd's k-means with k-means++ seeding and deterministic restarts.

Squared Euclidean distances are used throughout (the argmin is the same as
for plain distances and avoids the square roots).  Empty clusters are
repaired by moving the point currently farthest from its centroid into the
empty cluster, which keeps k fixed and never increases the objective.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError, ShapeError, ValidationError


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)


def _sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) matrix of squared Euclidean distances."""
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[int(rng.integers(n))]
    closest = np.sum((X - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all remaining points coincide
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[i] = X[idx]
        closest = np.minimum(closest, np.sum((X - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int,
           tol: float) -> tuple[np.ndarray, np.ndarray, float, list[float], int]:
    centroids = _kmeanspp_init(X, k, rng)
    history: list[float] = []
    prev_labels = None
    prev_inertia = np.inf
    iterations = 0
    while True:
        d2 = _sq_distances(X, centroids)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(X.shape[0]), labels].sum())
        history.append(inertia)
        if prev_labels is not None and (np.array_equal(labels, prev_labels)
                                        or prev_inertia - inertia < tol):
            break
        if iterations >= max_iter:
            break
        # Mean update; empty clusters steal the globally farthest point.
        new_centroids = centroids.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centroids[c] = X[members].mean(axis=0)
        point_d2 = d2[np.arange(X.shape[0]), labels].copy()
        for c in range(k):
            if not (labels == c).any():
                far = int(np.argmax(point_d2))
                new_centroids[c] = X[far]
                point_d2[far] = -1.0
        centroids = new_centroids
        prev_labels = labels
        prev_inertia = inertia
        iterations += 1
    return centroids, labels, inertia, history, iterations


def kmeans_fit(points, k: int, seed: int = 0, max_iter: int = 300,
               tol: float = 1e-9, n_restarts: int = 1
               ) -> tuple[ClusterModel, np.ndarray]:
    """Fit k-means; deterministic per (seed, config).

    With ``n_restarts > 1`` the algorithm reruns from fresh seedings derived
    from ``seed`` and keeps the lowest-inertia result.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("points must form a non-empty (n, d) matrix")
    if not np.isfinite(X).all():
        raise DataError("points contain non-finite values")
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > X.shape[0]:
        raise ValidationError(f"k={k} exceeds the number of points ({X.shape[0]})")
    if max_iter < 1:
        raise ValidationError("max_iter must be >= 1")
    if n_restarts < 1:
        raise ValidationError("n_restarts must be >= 1")

    best = None
    for r in range(n_restarts):
        rng = np.random.default_rng([seed, r])
        result = _lloyd(X, k, rng, max_iter, tol)
        if best is None or result[2] < best[2]:
            best = result
    centroids, labels, inertia, history, iterations = best
    model = ClusterModel(k=k, centroids=centroids, inertia=inertia,
                         n_iter=iterations, inertia_history=history)
    return model, labels


def assign(model: ClusterModel, point) -> int:
    """Nearest-centroid index; ties break toward the lowest index."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (model.centroids.shape[1],):
        raise ShapeError(f"point has shape {p.shape}, centroids are "
                         f"{model.centroids.shape[1]}-dimensional")
    d2 = np.sum((model.centroids - p) ** 2, axis=1)
    return int(np.argmin(d2))


def inertia(points, model: ClusterModel, assignments) -> float:
    """Sum of squared distances of points to their assigned centroids."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(assignments)
    if X.shape[0] != labels.shape[0]:
        raise ShapeError("points and assignments lengths differ")
    if X.shape[1] != model.centroids.shape[1]:
        raise ShapeError("points and centroids dimensions differ")
    diff = X - model.centroids[labels]
    return float(np.einsum("nd,nd->", diff, diff))


# ---------------------------------------------------------------------------
# file formats

def write_cluster_model(model: ClusterModel, path) -> None:
    """CSV: header row carrying k and dimension, then one centroid per row."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"k={model.k},dim={model.centroids.shape[1]}\n")
        for row in model.centroids:
            fh.write(",".join(repr(v) for v in row.tolist()) + "\n")


def read_cluster_model(path) -> ClusterModel:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("k="):
        raise FormatError("bad cluster model header")
    try:
        head = dict(part.split("=") for part in lines[0].split(","))
        k, dim = int(head["k"]), int(head["dim"])
    except (ValueError, KeyError):
        raise FormatError("bad cluster model header") from None
    if len(lines) - 1 != k:
        raise FormatError(f"expected {k} centroid rows, found {len(lines) - 1}")
    centroids = np.asarray([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if centroids.shape != (k, dim):
        raise FormatError("centroid rows do not match the declared dimension")
    return ClusterModel(k=k, centroids=centroids, inertia=0.0)


def write_assignments(ids, assignments, path) -> None:
    ids = list(ids)
    labels = np.asarray(assignments)
    if len(ids) != labels.shape[0]:
        raise ShapeError("ids and assignments lengths differ")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("encounter_id,cluster\n")
        for enc_id, c in zip(ids, labels.tolist()):
            fh.write(f"{enc_id},{c}\n")


def read_assignments(path) -> tuple[list[str], np.ndarray]:
    ids: list[str] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["encounter_id", "cluster"]:
            raise FormatError("bad assignments header")
        for row in reader:
            if len(row) != 2:
                raise FormatError(f"bad assignments row {row!r}")
            ids.append(row[0])
            labels.append(int(row[1]))
    return ids, np.asarray(labels, dtype=np.int64)

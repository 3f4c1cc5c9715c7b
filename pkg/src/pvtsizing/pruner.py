"""Task-space pruning: cluster corners by their metric vectors and keep the
worst corner of each cluster plus the nominal one."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAX_K = 4
MIN_SILHOUETTE = 0.25


@dataclass
class PerformanceMatrix:
    metrics: np.ndarray   # (corners, m)
    r: np.ndarray         # relative deficit sums per corner
    R: np.ndarray         # shaped rewards per corner

    def __post_init__(self) -> None:
        self.metrics = np.atleast_2d(np.asarray(self.metrics, dtype=np.float64))
        self.r = np.asarray(self.r, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        n = self.metrics.shape[0]
        if self.r.shape != (n,) or self.R.shape != (n,):
            raise ValueError("reward vectors must have one entry per corner")
        if not (np.all(np.isfinite(self.metrics)) and np.all(np.isfinite(self.r))):
            raise ValueError("performance matrix contains non-finite values")


def standardize_metrics(matrix: np.ndarray) -> np.ndarray:
    """Per-column z-score (population std); constant columns become zeros."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("standardization needs a 2-D matrix with at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std > 1e-12 * np.maximum(1.0, np.abs(mean)), std, np.inf)
    return (x - mean) / scale


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ikd,ikd->ik", diff, diff)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centroid
            rest = [i for i in range(n) if i not in chosen]
            nxt = int(rng.choice(rest))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(points, points[[nxt]])[:, 0])
    return points[chosen].copy()


def inertia(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(np.sum((points - centroids[labels]) ** 2))


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-8,
    history: list | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when no centroid moves more than ``tol`` or after ``max_iter``
    rounds. If a cluster empties, the point farthest from its centroid is
    moved into it. ``history`` (if given) receives the inertia after each
    assignment step.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)
    labels = np.zeros(n, dtype=int)
    prev_inertia = np.inf
    for _ in range(max_iter):
        d2 = _sq_dists(x, centroids)
        labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(labels == c):
                own = d2[np.arange(n), labels]
                # never strip a singleton cluster
                counts = np.bincount(labels, minlength=k)
                own = np.where(counts[labels] > 1, own, -1.0)
                far = int(np.argmax(own))
                labels[far] = c
                centroids[c] = x[far]
        cur = inertia(x, labels, centroids)
        if cur > prev_inertia + 1e-9 * max(1.0, prev_inertia):
            raise AssertionError(f"k-means inertia increased: {prev_inertia} -> {cur}")
        if history is not None:
            history.append(cur)
        new = np.array([x[labels == c].mean(axis=0) for c in range(k)])
        shift = np.max(np.linalg.norm(new - centroids, axis=1))
        centroids = new
        prev_inertia = inertia(x, labels, centroids)
        if shift < tol:
            break
    return labels, centroids


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette; singletons score 0. Returns 0 if fewer than 2 clusters."""
    x = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        return 0.0
    dist = np.sqrt(np.maximum(_sq_dists(x, x), 0.0))
    scores = np.zeros(len(x))
    for i in range(len(x)):
        own = labels == labels[i]
        if own.sum() <= 1:
            continue
        a = dist[i, own].sum() / (own.sum() - 1)
        b = min(dist[i, labels == c].mean() for c in uniq if c != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def choose_k(points: np.ndarray, seed: int = 0) -> int:
    """Best-silhouette k in 2..min(4, n-1); 1 when nothing scores >= 0.25."""
    x = np.asarray(points, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("choose_k needs at least 2 points")
    best_k, best_s = 1, -np.inf
    for k in range(2, min(MAX_K, n - 1) + 1):
        labels, _ = kmeans(x, k, seed)
        s = silhouette(x, labels)
        if s > best_s:
            best_k, best_s = k, s
    return best_k if best_s >= MIN_SILHOUETTE else 1


@dataclass
class Selection:
    tasks: list[int]          # nominal first, then ascending corner index
    labels: np.ndarray
    k: int


def select_training_tasks(perf: PerformanceMatrix, nominal_index: int, seed: int = 0) -> Selection:
    n = perf.metrics.shape[0]
    if not 0 <= nominal_index < n:
        raise ValueError(f"nominal index {nominal_index} out of range for {n} corners")
    if n < 2:
        return Selection([nominal_index], np.zeros(n, dtype=int), 1)
    z = standardize_metrics(perf.metrics)
    k = choose_k(z, seed)
    labels, _ = kmeans(z, k, seed)
    picks = set()
    for c in range(k):
        members = np.flatnonzero(labels == c)
        # argmin picks the lowest index among ties since members is sorted
        picks.add(int(members[np.argmin(perf.r[members])]))
    picks.discard(nominal_index)
    return Selection([nominal_index] + sorted(picks), labels, k)


def dump_selection_csv(
    path: str | Path,
    perf: PerformanceMatrix,
    selection: Selection,
    metric_names: Sequence[str],
    iteration: int,
    append: bool = False,
) -> None:
    """Per-corner debug rows for plotting corner clusters."""
    path = Path(path)
    new = not (append and path.exists())
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["iteration", "corner", *metric_names, "r", "R", "cluster", "selected"])
        chosen = set(selection.tasks)
        for i in range(perf.metrics.shape[0]):
            w.writerow([iteration, i, *(f"{v:.9g}" for v in perf.metrics[i]),
                        f"{perf.r[i]:.9g}", f"{perf.R[i]:.9g}", int(selection.labels[i]), int(i in chosen)])

"""Lloyd's k-means with k-means++ seeding, for multi-passage attacks.

One adversarial passage is trained per query cluster, so the clustering
must be deterministic for a fixed seed. Empty clusters are repaired by
stealing the point currently farthest from its assigned centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Clustering:
    centroids: np.ndarray  # k x dim
    assignment: np.ndarray  # point index -> cluster id
    inertia: float
    inertia_history: tuple[float, ...]  # per Lloyd iteration, after the update step

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)


def _plus_plus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[int(rng.integers(n))]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # All points coincide with a centroid; any choice is equivalent.
            centroids[i] = points[int(rng.integers(n))]
        else:
            centroids[i] = points[int(rng.choice(n, p=closest / total))]
        closest = np.minimum(closest, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def kmeans(points: np.ndarray, k: int, max_iters: int = 100, seed: int = 0) -> Clustering:
    """Cluster points into k groups by squared Euclidean distance.

    Stops when assignments no longer change or after max_iters Lloyd
    iterations, whichever comes first.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_seed(points, k, rng)

    assignment = None
    history: list[float] = []
    for _ in range(max_iters):
        distances = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = distances.argmin(axis=1)

        # Repair empty clusters before the update step by stealing the
        # globally worst-assigned point.
        for cluster in range(k):
            if not np.any(new_assignment == cluster):
                point_dist = distances[np.arange(n), new_assignment]
                donor = int(point_dist.argmax())
                new_assignment[donor] = cluster
                distances[donor, cluster] = 0.0

        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for cluster in range(k):
            centroids[cluster] = points[assignment == cluster].mean(axis=0)
        history.append(float(((points - centroids[assignment]) ** 2).sum()))

    inertia = float(((points - centroids[assignment]) ** 2).sum())
    return Clustering(
        centroids=centroids,
        assignment=assignment,
        inertia=inertia,
        inertia_history=tuple(history),
    )

"""k-means on latent embeddings and permutation-matched cluster accuracy."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..simulate import N_CLASSES

MAX_ITER = 300


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    sse_history: list[float]  # objective after each assignment step
    n_iter: int

    @property
    def sse(self) -> float:
        return self.sse_history[-1]


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] - 2.0 * x @ c.T + (c * c).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[int(rng.integers(n))]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(latents: np.ndarray, k: int = N_CLASSES, seed: int = 0,
           max_iter: int = MAX_ITER) -> KMeansResult:
    """Lloyd iterations from a seeded k-means++ start.

    Stops at an assignment fixpoint or after ``max_iter`` iterations. An empty
    cluster is moved onto the point currently farthest from its centroid.
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.ndim != 2 or len(x) < k:
        raise ValueError(f"need at least k={k} points in an (n, d) array, got shape {x.shape}")
    rng = np.random.default_rng(seed)
    centroids = kmeans_plus_plus(x, k, rng)
    assignments = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(x, centroids)
        new = np.argmin(d, axis=1)
        history.append(float(d[np.arange(len(x)), new].sum()))
        if assignments is not None and np.array_equal(new, assignments):
            break
        assignments = new
        for j in range(k):
            members = assignments == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
            else:
                point_d = d[np.arange(len(x)), assignments]
                far = int(np.argmax(point_d))
                centroids[j] = x[far]
                assignments[far] = j
    return KMeansResult(centroids, assignments, history, it)


def best_cluster_mapping(assignments, labels, n_classes: int = N_CLASSES) -> tuple[float, dict[int, int]]:
    """Best accuracy over all cluster-id -> class bijections and the mapping achieving it.

    Ties between bijections resolve to the first in lexicographic permutation order.
    """
    a = np.asarray(assignments, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if a.shape != y.shape:
        raise ValueError(f"assignments length {a.shape} does not match labels length {y.shape}")
    if len(a) == 0:
        raise ValueError("cannot score an empty assignment")
    ids = np.unique(a)
    if len(ids) > n_classes:
        raise ValueError(f"found {len(ids)} distinct cluster ids; at most {n_classes} allowed")
    # relabel ids to 0..m-1 so arbitrary integer ids are accepted
    dense = np.searchsorted(ids, a)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (dense, y), 1)
    best, best_perm = -1, None
    for perm in itertools.permutations(range(n_classes)):
        hits = int(counts[np.arange(n_classes), perm].sum())
        if hits > best:
            best, best_perm = hits, perm
    mapping = {int(ids[i]): int(best_perm[i]) for i in range(len(ids))}
    return best / len(a), mapping


def cluster_accuracy(assignments, labels) -> float:
    return best_cluster_mapping(assignments, labels)[0]

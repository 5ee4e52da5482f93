"""Lloyd's k-means with k-means++ seeding and deterministic restarts."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .linalg import as_matrix


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int = 0
    history: list = field(default_factory=list)


def restart_rng(seed, restart):
    """Independent generator for one restart; identical for a given (seed, restart)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(restart)]))


def sq_distances(points, centroids):
    """Squared Euclidean distances, shape (n, k), clipped at zero."""
    d = (np.einsum("ij,ij->i", points, points)[:, None]
         - 2.0 * points @ centroids.T
         + np.einsum("ij,ij->i", centroids, centroids)[None, :])
    return np.maximum(d, 0.0)


def _check(points, k):
    points = as_matrix(points, "points")
    n = points.shape[0]
    if n == 0 or points.size == 0:
        raise InputError("k-means needs a nonempty input")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InputError(f"k must be a positive integer, got {k}")
    if k > n:
        raise InputError(f"k={k} exceeds the number of points n={n}")
    return points


def kmeans_pp_seed(points, k, seed, rng=None):
    """Pick ``k`` rows of ``points`` by D^2-weighted sampling.

    The first row is uniform. When every remaining point coincides with a
    chosen seed (zero total weight), the next seed is drawn uniformly among
    rows not yet chosen so the result always has k rows.
    """
    points = _check(points, k)
    if rng is None:
        rng = np.random.default_rng(seed)
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = sq_distances(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(free))
        chosen.append(idx)
        closest = np.minimum(closest, sq_distances(points, points[idx:idx + 1])[:, 0])
    return points[chosen].copy()


def _lloyd(points, centroids, max_iter):
    k = centroids.shape[0]
    labels = None
    history = []
    for it in range(1, max_iter + 1):
        d = sq_distances(points, centroids)
        new_labels = np.argmin(d, axis=1)
        nearest = d[np.arange(len(points)), new_labels]
        history.append(float(nearest.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            return centroids, labels, it, history
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        # empty cluster: steal the point farthest from its own centroid
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(nearest))
            counts[labels[far]] -= 1
            labels[far] = j
            counts[j] = 1
            nearest[far] = 0.0
        onehot = np.zeros((len(points), k))
        onehot[np.arange(len(points)), labels] = 1.0
        centroids = (onehot.T @ points) / counts[:, None]
    labels = np.argmin(sq_distances(points, centroids), axis=1)
    return centroids, labels, max_iter, history


def kmeans_fit(points, k, seed=0, max_iter=300, n_init=10):
    """Cluster rows of ``points`` into ``k`` groups.

    Restart ``r`` is seeded from ``(seed, r)``; the lowest-inertia restart wins,
    ties going to the earliest restart.
    """
    points = _check(points, k)
    if max_iter < 1 or n_init < 1:
        raise InputError("max_iter and n_init must be >= 1")
    best = None
    for restart in range(n_init):
        rng = restart_rng(seed, restart)
        init = kmeans_pp_seed(points, k, seed, rng=rng)
        centroids, labels, n_iter, history = _lloyd(points, init, max_iter)
        resid = points - centroids[labels]
        inertia = float(np.einsum("ij,ij->", resid, resid))
        if best is None or inertia < best.inertia:
            best = KMeansResult(centroids, labels, inertia, n_iter, history)
    return best

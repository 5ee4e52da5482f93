"""Spectral pseudo-labels from anchor graphs.

The left singular vectors of an n x m anchor graph C span the leading
eigenvectors of the implicit n x n similarity C C^T, so the embedding costs
an SVD of C instead of an eigendecomposition of an n x n matrix.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, NumericalError, RankDeficiencyWarning, ShapeError
from .kmeans import kmeans_fit, sq_distances
from .linalg import as_matrix, svd_truncated

DEFAULT_ALPHA = 1e-3


@dataclass
class SpectralState:
    per_view_u: list
    global_u: np.ndarray
    centroids: np.ndarray
    t_dist: np.ndarray
    target: np.ndarray
    alpha: float = DEFAULT_ALPHA
    rank_deficient: bool = False

    @property
    def labels(self):
        return predict(self.target)


def degree_normalize(coeffs):
    """Scale anchor columns by ``1 / sqrt(column sum)``.

    For a row-stochastic C the implied similarity ``C diag(C^T 1)^-1 C^T``
    is itself row-stochastic, so every connected block contributes a unit
    singular value. Unused anchors (zero column) are left at zero.
    """
    coeffs = as_matrix(coeffs, "coeffs")
    degree = coeffs.sum(axis=0)
    scale = np.zeros_like(degree)
    used = degree > 0
    scale[used] = 1.0 / np.sqrt(degree[used])
    return coeffs * scale


def spectral_embed(graph, k, normalize=False):
    """Top-``k`` left singular vectors of the coefficient matrix.

    ``graph`` is an :class:`~dmcag.anchor_graph.AnchorGraph` or a bare
    (n, m) array. With ``normalize=True`` the columns are first passed
    through :func:`degree_normalize`. A :class:`RankDeficiencyWarning` is
    issued when fewer than ``k`` singular values are nonzero; the trailing
    columns are then an arbitrary orthonormal completion.
    """
    coeffs = getattr(graph, "coeffs", graph)
    coeffs = as_matrix(coeffs, "coeffs")
    if normalize:
        coeffs = degree_normalize(coeffs)
    n, m = coeffs.shape
    if k > m or k > n:
        raise InputError(f"k={k} exceeds the anchor graph shape {coeffs.shape}")
    svd = svd_truncated(coeffs, k)
    tiny = np.finfo(np.float64).eps * max(n, m) * max(svd.sigma[0], 1e-300)
    if np.any(svd.sigma <= tiny):
        warnings.warn(f"anchor graph has rank < {k}; trailing embedding columns carry no signal",
                      RankDeficiencyWarning, stacklevel=2)
    return svd.u


def concat_embeddings(per_view):
    if not per_view:
        raise InputError("no embeddings to concatenate")
    mats = [as_matrix(u, "embedding") for u in per_view]
    rows = {u.shape[0] for u in mats}
    if len(rows) != 1:
        raise ShapeError(f"embeddings disagree on sample count: {sorted(rows)}")
    return np.hstack(mats)


def student_t_assign(u, centroids, alpha=DEFAULT_ALPHA):
    """Row-stochastic soft assignment with kernel ``1 / (alpha + ||u_i - mu_j||^2)``."""
    if not alpha > 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    u = as_matrix(u, "u")
    centroids = as_matrix(centroids, "centroids")
    if u.shape[1] != centroids.shape[1]:
        raise ShapeError(f"points have {u.shape[1]} columns, centroids {centroids.shape[1]}")
    d = sq_distances(u, centroids)
    # kernel ratios are invariant to dividing by the row minimum, which avoids overflow
    w = (alpha + d.min(axis=1, keepdims=True)) / (alpha + d)
    return w / w.sum(axis=1, keepdims=True)


def sharpen_target(t):
    """Square and reweight by inverse soft cluster frequency, then renormalise rows."""
    t = as_matrix(t, "t")
    freq = t.sum(axis=0)
    if np.any(freq <= 0):
        raise NumericalError("soft assignment has an empty cluster (zero column sum)")
    w = t * t / freq
    peak = w.max(axis=1, keepdims=True)
    if np.any(peak <= 0):
        raise NumericalError("target distribution has an all-zero row")
    # scaling by the row peak first makes uniform and one-hot rows exact fixed points
    w = w / peak
    return w / w.sum(axis=1, keepdims=True)


def predict(p):
    """Hard labels ``argmax_j p_ij`` (ties go to the lowest index)."""
    return np.argmax(np.asarray(p), axis=1)


def compute_target(graphs, k, alpha=DEFAULT_ALPHA, seed=0, n_init=10, normalize=False):
    """Per-view embeddings, global k-means, and the distributions T and P."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RankDeficiencyWarning)
        per_view = [spectral_embed(g, k, normalize=normalize) for g in graphs]
    deficient = any(issubclass(w.category, RankDeficiencyWarning) for w in caught)
    u = concat_embeddings(per_view)
    km = kmeans_fit(u, k, seed=seed, n_init=n_init)
    t = student_t_assign(u, km.centroids, alpha)
    p = sharpen_target(t)
    return SpectralState(per_view, u, km.centroids, t, p, alpha, deficient)


def export_embedding(state, directory, round_index=0):
    """Write ``embedding.csv`` (U), ``target.csv`` (P) and ``embedding.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "embedding.csv", state.global_u, delimiter=",", fmt="%.17g")
    np.savetxt(directory / "target.csv", state.target, delimiter=",", fmt="%.17g")
    meta = {"k": int(state.target.shape[1]), "alpha": state.alpha, "round": int(round_index),
            "n_views": len(state.per_view_u), "rank_deficient": bool(state.rank_deficient)}
    (directory / "embedding.json").write_text(json.dumps(meta, indent=2))
    return meta

"""Per-view soft assignments and KL self-training against a fixed target."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .autoencoder import AdamState, adam_step, backward, encode
from .errors import NumericalError, ShapeError, TrainingError
from .kmeans import kmeans_fit, sq_distances
from .linalg import as_matrix


def _check_pair(z, mu):
    z = as_matrix(z, "z")
    mu = as_matrix(mu, "mu")
    if z.shape[1] != mu.shape[1]:
        raise ShapeError(f"latent width {z.shape[1]} != centroid width {mu.shape[1]}")
    return z, mu


def soft_assign(z, mu):
    """Unit-dof Student-t assignment ``q_ij ~ 1 / (1 + ||z_i - mu_j||^2)``."""
    z, mu = _check_pair(z, mu)
    d = sq_distances(z, mu)
    w = (1.0 + d.min(axis=1, keepdims=True)) / (1.0 + d)
    return w / w.sum(axis=1, keepdims=True)


def kl_loss(p, q):
    """``sum_ij p_ij log(p_ij / q_ij)`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"P {p.shape} and Q {q.shape} differ in shape")
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise NumericalError("Q has a zero entry where P is positive")
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def distance_backward(z, mu, grad_d):
    """Pull a gradient w.r.t. squared distances ``d_ij`` back to ``z`` and ``mu``."""
    row = grad_d.sum(axis=1)
    col = grad_d.sum(axis=0)
    grad_z = 2.0 * (row[:, None] * z - grad_d @ mu)
    grad_mu = 2.0 * (col[:, None] * mu - grad_d.T @ z)
    return grad_z, grad_mu


def soft_assign_backward(z, mu, grad_q, q=None):
    """Gradients w.r.t. ``z`` and ``mu`` given ``dL/dQ`` for ``Q = soft_assign(z, mu)``."""
    z, mu = _check_pair(z, mu)
    if q is None:
        q = soft_assign(z, mu)
    w = 1.0 / (1.0 + sq_distances(z, mu))
    centered = grad_q - np.sum(grad_q * q, axis=1, keepdims=True)
    return distance_backward(z, mu, -w * q * centered)


def selfsup_gradients(z, mu, p):
    """Exact gradients of ``kl_loss(p, soft_assign(z, mu))`` with ``p`` held fixed."""
    z, mu = _check_pair(z, mu)
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (z.shape[0], mu.shape[0]):
        raise ShapeError(f"P shape {p.shape} != ({z.shape[0]}, {mu.shape[0]})")
    q = soft_assign(z, mu)
    w = 1.0 / (1.0 + sq_distances(z, mu))
    grad_d = w * (p - p.sum(axis=1, keepdims=True) * q)
    return distance_backward(z, mu, grad_d)


def align_centroids(mu, z, target):
    """Permute centroid rows so cluster j of ``soft_assign(z, mu)`` matches column j of the target."""
    k = target.shape[1]
    q_lab = np.argmax(soft_assign(z, mu), axis=1)
    p_lab = np.argmax(target, axis=1)
    overlap = np.zeros((k, k))
    np.add.at(overlap, (q_lab, p_lab), 1.0)
    rows, cols = linear_sum_assignment(-overlap)
    aligned = np.empty_like(mu)
    aligned[cols] = mu[rows]
    return aligned


def init_centroids(z, k, seed=0, n_init=10):
    return kmeans_fit(z, k, seed=seed, n_init=n_init).centroids


@dataclass
class SelfsupResult:
    mus: list
    qs: list
    trace: list = field(default_factory=list)
    epochs_run: int = 0


def train_selfsup(models, views, mus, target, epochs=100, lr=1e-3, kl_weight=1.0,
                  tol=1e-3, round_index=0):
    """Adam on ``L_r^v + kl_weight * KL(P || Q^v)`` for every view, ``P`` fixed.

    Models are updated in place; centroids are copied. Training stops early
    once fewer than ``tol`` of the per-view hard assignments change between
    epochs (``tol=0`` disables early stopping).

    Returns
    -------
    SelfsupResult
        Trace rows are ``{"round", "epoch", "view", "L_r", "L_c"}`` measured
        before each update.
    """
    target = as_matrix(target, "target")
    mus = [np.array(mu, dtype=np.float64) for mu in mus]
    states = [AdamState.for_params(model.params() + [mu], lr=lr)
              for model, mu in zip(models, mus)]
    trace = []
    prev = None
    epochs_run = 0
    for epoch in range(epochs):
        labels = []
        for v, (model, x, mu, state) in enumerate(zip(models, views, mus, states)):
            z = encode(model, x)
            q = soft_assign(z, mu)
            l_c = kl_loss(target, q)
            if kl_weight != 0.0:
                grad_z, grad_mu = selfsup_gradients(z, mu, target)
                grads, l_r = backward(model, x, latent_grad=kl_weight * grad_z)
                grad_mu = kl_weight * grad_mu
            else:
                grads, l_r = backward(model, x)
                grad_mu = np.zeros_like(mu)
            if not (np.isfinite(l_r) and np.isfinite(l_c)):
                raise TrainingError("self-supervised loss is not finite", epoch=epoch, stage="selfsup")
            trace.append({"round": round_index, "epoch": epoch, "view": v, "L_r": l_r, "L_c": l_c})
            adam_step(model.params() + [mu], grads + [grad_mu], state)
            labels.append(np.argmax(q, axis=1))
        epochs_run = epoch + 1
        labels = np.concatenate(labels)
        if prev is not None and np.mean(labels != prev) < tol:
            break
        prev = labels
    qs = [soft_assign(encode(model, x), mu) for model, x, mu in zip(models, views, mus)]
    return SelfsupResult(mus, qs, trace, epochs_run)

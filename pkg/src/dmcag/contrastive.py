"""Cluster-level contrastive alignment of soft assignments across views.

Each column ``Q^v[:, j]`` describes cluster j as seen by view v. Column j of
view m and column j of view n form a positive pair; every other column of
either view is a negative. Similarity is cosine similarity, so the
self-pair contributes exactly ``exp(1 / tau)`` to the denominator and is
subtracted out.
"""

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import AdamState, adam_step, backward, encode
from .errors import InputError, NumericalError, ShapeError, TrainingError
from .selfsup import soft_assign, soft_assign_backward


@dataclass
class ContrastiveConfig:
    tau: float = 1.0
    entropy_weight: float = 1.0
    epochs: int = 50
    lr: float = 1e-4
    train_centroids: bool = True
    recon_weight: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")
        if self.epochs < 0 or self.lr < 0:
            raise InputError("epochs and lr must be non-negative")


def column_similarity(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise NumericalError("cosine similarity of a zero vector")
    return float(a @ b / (na * nb))


def _unit_columns(q):
    norms = np.linalg.norm(q, axis=0)
    if np.any(norms == 0):
        raise NumericalError("soft assignment has an all-zero column")
    return q / norms, norms


def _pair_terms(um, un, tau):
    """Loss of anchor view m against view n plus gradients w.r.t. the unit columns."""
    k = um.shape[1]
    s_mm = um.T @ um
    s_mn = um.T @ un
    e_mm = np.exp(s_mm / tau)
    e_mn = np.exp(s_mn / tau)
    denom = e_mm.sum(axis=1) + e_mn.sum(axis=1) - np.exp(1.0 / tau)
    if np.any(denom <= 0):
        raise NumericalError("contrastive denominator is not positive")
    loss = -np.mean(np.diag(s_mn) / tau - np.log(denom))
    g_mn = -(np.eye(k) - e_mn / denom[:, None]) / (k * tau)
    g_mm = (e_mm / denom[:, None]) / (k * tau)
    grad_um = um @ (g_mm + g_mm.T) + un @ g_mn.T
    grad_un = um @ g_mn
    return float(loss), grad_um, grad_un


def _unit_backward(u, norms, grad_u):
    return (grad_u - u * np.sum(u * grad_u, axis=0)) / norms


def _check_views(qs):
    qs = [np.asarray(q, dtype=np.float64) for q in qs]
    if len({q.shape for q in qs}) != 1:
        raise ShapeError(f"soft assignments disagree in shape: {[q.shape for q in qs]}")
    return qs


def pair_contrastive_loss(qm, qn, tau=1.0):
    """Contrastive loss with the columns of ``qm`` as anchors against ``qn``."""
    if not tau > 0:
        raise InputError(f"tau must be positive, got {tau}")
    qm, qn = _check_views([qm, qn])
    um, _ = _unit_columns(qm)
    un, _ = _unit_columns(qn)
    return _pair_terms(um, un, tau)[0]


def entropy_term(q):
    """``sum_j s_j log s_j`` with ``s_j`` the column mean of ``q``."""
    s = np.asarray(q, dtype=np.float64).mean(axis=0)
    s = s[s > 0]
    return float(np.sum(s * np.log(s)))


def label_consistency_terms(qs, tau=1.0, entropy_weight=1.0, with_grad=False):
    """Contrastive sum, entropy sum and (optionally) ``dL/dQ^v`` for every view."""
    if len(qs) < 2:
        raise InputError("label consistency needs at least two views")
    if not tau > 0:
        raise InputError(f"tau must be positive, got {tau}")
    qs = _check_views(qs)
    units = [_unit_columns(q) for q in qs]
    grads_u = [np.zeros_like(q) for q in qs]
    contrast = 0.0
    for m in range(len(qs)):
        for n in range(len(qs)):
            if m == n:
                continue
            loss, g_m, g_n = _pair_terms(units[m][0], units[n][0], tau)
            contrast += 0.5 * loss
            grads_u[m] += 0.5 * g_m
            grads_u[n] += 0.5 * g_n
    entropy = sum(entropy_term(q) for q in qs)
    if not with_grad:
        return contrast, entropy, None
    grads = []
    for q, (u, norms), g_u in zip(qs, units, grads_u):
        g = _unit_backward(u, norms, g_u)
        s = q.mean(axis=0)
        g = g + entropy_weight * (np.log(s) + 1.0) / q.shape[0]
        grads.append(g)
    return contrast, entropy, grads


def label_consistency_loss(qs, tau=1.0, entropy_weight=1.0):
    contrast, entropy, _ = label_consistency_terms(qs, tau, entropy_weight)
    return contrast + entropy_weight * entropy


def label_consistency_gradients(models, views, mus, config):
    """Loss and gradients of the label-consistency objective w.r.t. encoders and centroids.

    Returns ``(loss, contrast, entropy, model_grads, mu_grads, qs)``.
    """
    zs = [encode(model, x) for model, x in zip(models, views)]
    qs = [soft_assign(z, mu) for z, mu in zip(zs, mus)]
    contrast, entropy, grads_q = label_consistency_terms(
        qs, config.tau, config.entropy_weight, with_grad=True)
    model_grads, mu_grads = [], []
    for model, x, z, mu, q, g_q in zip(models, views, zs, mus, qs, grads_q):
        g_z, g_mu = soft_assign_backward(z, mu, g_q, q=q)
        grads, _ = backward(model, x, latent_grad=g_z, recon_weight=config.recon_weight)
        model_grads.append(grads)
        mu_grads.append(g_mu)
    return contrast + config.entropy_weight * entropy, contrast, entropy, model_grads, mu_grads, qs


@dataclass
class ContrastiveResult:
    mus: list
    qs: list
    trace: list = field(default_factory=list)


def train_contrastive(models, views, mus, config=None, round_index=0):
    """Adam on the label-consistency objective; models are updated in place.

    Decoder parameters only move when ``config.recon_weight > 0``. Trace rows
    are ``{"round", "epoch", "L_Q", "entropy"}`` measured before each update.
    """
    config = config or ContrastiveConfig()
    mus = [np.array(mu, dtype=np.float64) for mu in mus]
    params = []
    for model, mu in zip(models, mus):
        params += model.params() + ([mu] if config.train_centroids else [])
    state = AdamState.for_params(params, lr=config.lr)
    trace = []
    for epoch in range(config.epochs):
        loss, contrast, entropy, model_grads, mu_grads, _ = label_consistency_gradients(
            models, views, mus, config)
        if not np.isfinite(loss):
            raise TrainingError("label-consistency loss is not finite", epoch=epoch, stage="contrastive")
        trace.append({"round": round_index, "epoch": epoch, "L_Q": loss, "entropy": entropy})
        grads = []
        for g, g_mu in zip(model_grads, mu_grads):
            grads += g + ([g_mu] if config.train_centroids else [])
        adam_step(params, grads, state)
    qs = [soft_assign(encode(model, x), mu) for model, x, mu in zip(models, views, mus)]
    return ContrastiveResult(mus, qs, trace)

"""Anchor selection and the simplex-constrained anchor-graph QP.

For a latent sample ``z`` (length l) and anchors ``A`` (m x l, one anchor per
row) the coefficient row ``c`` minimises

    ||z - A^T c||^2 + gamma ||c||^2   subject to  c >= 0, sum(c) = 1.

Expanding gives ``c^T G c - 2 b^T c + const`` with ``G = A A^T + gamma I`` and
``b = A z``. ``G`` is shared by every row, so a full graph costs one m x m
Gram matrix plus n small active-set solves.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, NumericalError, ShapeError
from .kmeans import kmeans_fit
from .linalg import as_matrix, frobenius_norm_sq

MAX_ORACLE_POINTS = 200


@dataclass
class AnchorGraph:
    anchors: np.ndarray
    coeffs: np.ndarray
    gamma: float
    objective: float
    seed: int = -1
    kkt_residual: float = 0.0

    @property
    def m(self):
        return self.anchors.shape[0]


def simplex_qp_objective(c, z, anchors, gamma):
    r = np.asarray(z, dtype=np.float64) - anchors.T @ c
    return float(r @ r + gamma * (c @ c))


def kkt_residual(c, gram, b):
    """Largest violation of the KKT conditions of ``min c'Gc - 2b'c`` on the simplex.

    Uses the half-gradient ``G c - b``; the multiplier of the equality
    constraint is estimated on the support of ``c``.
    """
    grad = gram @ c - b
    support = c > 0
    nu = -grad[support].mean() if support.any() else 0.0
    mu = grad + nu
    stationarity = np.abs(mu[support]).max(initial=0.0)
    dual = max(0.0, -mu[~support].min(initial=0.0))
    slack = np.abs(c * mu).max(initial=0.0)
    primal = max(abs(c.sum() - 1.0), max(0.0, -c.min()))
    return float(max(stationarity, dual, slack, primal))


def _solve_equality(gram, b, free):
    """Minimiser of the quadratic on the affine hull ``sum(c_F) = 1``."""
    f = len(free)
    kkt = np.zeros((f + 1, f + 1))
    kkt[:f, :f] = gram[np.ix_(free, free)]
    kkt[:f, f] = 1.0
    kkt[f, :f] = 1.0
    rhs = np.append(b[free], 1.0)
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:f], sol[f]


def _project_simplex(v):
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    v = np.atleast_2d(v)
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, v.shape[1] + 1)
    rho = np.count_nonzero(u - css / idx > 0, axis=1)
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


def _projected_gradient(gram, b, c0, iters=20000):
    step = 1.0 / (2.0 * max(np.linalg.eigvalsh(gram).max(), 1e-300))
    c = c0.copy()
    y, t = c.copy(), 1.0
    for _ in range(iters):
        c_next = _project_simplex(y - step * 2.0 * (gram @ y - b))[0]
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = c_next + ((t - 1.0) / t_next) * (c_next - c)
        c, t = c_next, t_next
    return c


def _active_set(gram, b, tol, max_iter):
    m = len(b)
    vertex = np.diag(gram) - 2.0 * b
    start = int(np.argmin(vertex))
    c = np.zeros(m)
    c[start] = 1.0
    free = [start]
    for _ in range(max_iter):
        x, nu = _solve_equality(gram, b, free)
        if np.all(x >= 0.0):
            c[:] = 0.0
            c[free] = x
            mu = gram @ c - b + nu
            mu[free] = np.inf
            j = int(np.argmin(mu))
            if mu[j] >= -tol:
                return c, True
            free = sorted(free + [j])
            continue
        # blocked step toward x; drop the first coordinate that hits zero
        cur = c[free]
        shrinking = x < 0.0
        ratios = np.full(len(free), np.inf)
        ratios[shrinking] = cur[shrinking] / (cur[shrinking] - x[shrinking])
        step = ratios.min()
        cur = cur + step * (x - cur)
        c[free] = cur
        drop = {free[i] for i in np.flatnonzero(ratios <= step)}
        drop |= {free[i] for i in np.flatnonzero(cur <= 0.0)}
        for i in drop:
            c[i] = 0.0
        free = [i for i in free if i not in drop]
        if not free:
            return c, False
    return c, False


def _finish(c):
    c = np.maximum(c, 0.0)
    return c / c.sum()


def solve_simplex_qp_gram(gram, b, tol=1e-13, max_iter=None):
    """Simplex QP from a precomputed Gram matrix and linear term."""
    m = len(b)
    if max_iter is None:
        max_iter = 10 * m + 20
    scale = max(1.0, float(np.abs(gram).max()), float(np.abs(b).max()))
    c, ok = _active_set(gram, b, tol * scale, max_iter)
    if not ok or kkt_residual(_finish(c), gram, b) > 1e-9 * scale:
        start = _finish(c) if c.sum() > 0 else np.full(m, 1.0 / m)
        c = _projected_gradient(gram, b, start)
    return _finish(c)


def solve_simplex_qp(z_row, anchors, gamma):
    """Optimal simplex weights of one latent sample over the anchors.

    Parameters
    ----------
    z_row : array (l,)
    anchors : array (m, l)
    gamma : float
        Ridge weight, ``gamma >= 0``.

    Returns
    -------
    numpy.ndarray, shape (m,)
    """
    anchors = as_matrix(anchors, "anchors")
    z_row = np.asarray(z_row, dtype=np.float64).ravel()
    if not np.all(np.isfinite(z_row)) or not np.isfinite(gamma):
        raise NumericalError("QP inputs must be finite")
    if gamma < 0:
        raise InputError(f"gamma must be >= 0, got {gamma}")
    if anchors.shape[0] == 0:
        raise InputError("at least one anchor is required")
    if anchors.shape[1] != z_row.shape[0]:
        raise ShapeError(f"anchor dimension {anchors.shape[1]} != sample dimension {z_row.shape[0]}")
    gram = anchors @ anchors.T + gamma * np.eye(anchors.shape[0])
    return solve_simplex_qp_gram(gram, anchors @ z_row)


def select_anchors(z, m, seed=0, n_init=10):
    """k-means centroids of the latent rows, one anchor per row."""
    z = as_matrix(z, "z")
    if m > z.shape[0]:
        raise InputError(f"anchor count m={m} exceeds n={z.shape[0]}")
    return kmeans_fit(z, m, seed=seed, n_init=n_init).centroids


def anchor_coefficients(z, anchors, gamma):
    """Solve every row QP; returns ``(coeffs, objective, worst_kkt_residual)``."""
    z = as_matrix(z, "z")
    anchors = as_matrix(anchors, "anchors")
    if gamma < 0:
        raise InputError(f"gamma must be >= 0, got {gamma}")
    if anchors.shape[1] != z.shape[1]:
        raise ShapeError(f"anchor dimension {anchors.shape[1]} != latent dimension {z.shape[1]}")
    m = anchors.shape[0]
    gram = anchors @ anchors.T + gamma * np.eye(m)
    lin = z @ anchors.T
    coeffs = np.empty((z.shape[0], m))
    worst = 0.0
    for i in range(z.shape[0]):
        coeffs[i] = solve_simplex_qp_gram(gram, lin[i])
        worst = max(worst, kkt_residual(coeffs[i], gram, lin[i]))
    objective = frobenius_norm_sq(z - coeffs @ anchors) + gamma * frobenius_norm_sq(coeffs)
    return coeffs, objective, worst


def build_anchor_graph(z, m, gamma=1.0, seed=0, anchors=None, n_init=10):
    """Anchors by k-means on ``z`` and the row-simplex coefficient matrix.

    ``anchors`` may be supplied to skip the k-means step.
    """
    z = as_matrix(z, "z")
    if anchors is None:
        anchors = select_anchors(z, m, seed=seed, n_init=n_init)
    coeffs, objective, worst = anchor_coefficients(z, anchors, gamma)
    return AnchorGraph(np.asarray(anchors, dtype=np.float64), coeffs, float(gamma),
                       objective, int(seed), worst)


def full_subspace_oracle(x, gamma):
    """Row-simplex self-expressive matrix S (n x n) with a zero diagonal.

    Row i expresses sample i by all other samples. Only meant as a reference
    for small problems.
    """
    x = as_matrix(x, "x")
    n = x.shape[0]
    if n > MAX_ORACLE_POINTS:
        raise InputError(f"oracle limited to n <= {MAX_ORACLE_POINTS}, got {n}")
    if n < 2:
        raise InputError("oracle needs at least two points")
    s = np.zeros((n, n))
    for i in range(n):
        others = np.delete(np.arange(n), i)
        s[i, others] = solve_simplex_qp(x[i], x[others], gamma)
    return s


def export_anchor_graph(graph, directory, prefix="view0"):
    """Write ``<prefix>_coeffs.csv``, ``<prefix>_anchors.csv`` and ``<prefix>_graph.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / f"{prefix}_coeffs.csv", graph.coeffs, delimiter=",", fmt="%.17g")
    np.savetxt(directory / f"{prefix}_anchors.csv", graph.anchors, delimiter=",", fmt="%.17g")
    meta = {"gamma": graph.gamma, "m": graph.m, "seed": graph.seed,
            "objective": graph.objective, "n": int(graph.coeffs.shape[0]),
            "latent_dim": int(graph.anchors.shape[1])}
    (directory / f"{prefix}_graph.json").write_text(json.dumps(meta, indent=2))
    return meta


def load_anchor_graph(directory, prefix="view0"):
    directory = Path(directory)
    meta = json.loads((directory / f"{prefix}_graph.json").read_text())
    coeffs = np.loadtxt(directory / f"{prefix}_coeffs.csv", delimiter=",", ndmin=2)
    anchors = np.loadtxt(directory / f"{prefix}_anchors.csv", delimiter=",", ndmin=2)
    return AnchorGraph(anchors, coeffs, meta["gamma"], meta["objective"], meta["seed"])

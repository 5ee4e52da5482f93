"""Dense linear algebra helpers and a one-sided Jacobi truncated SVD."""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError, ShapeError

_EPS = np.finfo(np.float64).eps


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite, C-contiguous float64 2-D array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains NaN or Inf")
    return arr


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def frobenius_norm_sq(a):
    a = np.asarray(a, dtype=np.float64)
    return float(np.vdot(a, a))


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    def reconstruct(self):
        return (self.u * self.sigma) @ self.vt


def _round_robin(m):
    """Tournament schedule: m-1 (or m) rounds of disjoint column pairs."""
    players = list(range(m)) + ([-1] if m % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(p), max(p)) for p in pairs if -1 not in p]
        rounds.append((np.array([p for p, _ in pairs], dtype=np.intp),
                       np.array([q for _, q in pairs], dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _one_sided_jacobi(a, max_sweeps, tol):
    """Orthogonalise the columns of ``a`` (n >= m) by plane rotations.

    Returns ``(w, v)`` with ``a @ v = w`` and mutually orthogonal columns of w.
    """
    w = a.copy()
    m = w.shape[1]
    v = np.eye(m)
    if m < 2:
        return w, v
    schedule = _round_robin(m)
    for _ in range(max_sweeps):
        worst = 0.0
        for p, q in schedule:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            scale = np.sqrt(alpha * beta)
            with np.errstate(divide="ignore", invalid="ignore"):
                off = np.where(scale > 0, np.abs(gamma) / scale, 0.0)
            worst = max(worst, float(off.max(initial=0.0)))
            rotate = off > tol
            if not rotate.any():
                continue
            p, q = p[rotate], q[rotate]
            alpha, beta, gamma = alpha[rotate], beta[rotate], gamma[rotate]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.hypot(1.0, t)
            s = c * t
            wp, wq = w[:, p], w[:, q]
            w[:, p] = c * wp - s * wq
            w[:, q] = s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if worst <= tol:
            return w, v
    raise NumericalError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")


def _complete_orthonormal(u, keep):
    """Replace columns of ``u`` not flagged in ``keep`` by an orthonormal completion."""
    n = u.shape[0]
    basis = [u[:, j] for j in range(u.shape[1]) if keep[j]]
    fill = []
    for e in range(n):
        if len(basis) + len(fill) == u.shape[1]:
            break
        x = np.zeros(n)
        x[e] = 1.0
        for _ in range(2):
            for b in basis + fill:
                x -= (b @ x) * b
        norm = np.linalg.norm(x)
        if norm > 0.5:
            fill.append(x / norm)
    out = u.copy()
    missing = [j for j in range(u.shape[1]) if not keep[j]]
    for j, col in zip(missing, fill):
        out[:, j] = col
    return out


def svd_truncated(a, r, max_sweeps=60, tol=None):
    """Top-``r`` singular triplets of ``a`` via one-sided Jacobi.

    Rotations act on the thinner dimension. Each left singular vector is
    signed so that its largest-magnitude entry is positive, and left vectors
    belonging to zero singular values are completed to an orthonormal set.

    Parameters
    ----------
    a : array_like, shape (n, m)
    r : int
        Number of triplets, ``1 <= r <= min(n, m)``.

    Returns
    -------
    SvdResult
        ``u`` (n, r), ``sigma`` (r,) descending, ``vt`` (r, m).
    """
    a = as_matrix(a, "a")
    n, m = a.shape
    if not isinstance(r, (int, np.integer)) or r < 1 or r > min(n, m):
        raise ShapeError(f"rank r={r} out of range for shape {a.shape}")
    transposed = n < m
    work = a.T if transposed else a
    if tol is None:
        tol = max(work.shape[0], 1) * _EPS
    w, v = _one_sided_jacobi(work, max_sweeps, tol)
    sigma = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-sigma, kind="stable")
    sigma, w, v = sigma[order], w[:, order], v[:, order]
    cutoff = _EPS * max(work.shape) * (sigma[0] if sigma.size else 0.0)
    keep = sigma > cutoff
    left = np.zeros_like(w)
    left[:, keep] = w[:, keep] / sigma[keep]
    if not keep.all():
        left = _complete_orthonormal(left, keep)
        sigma = np.where(keep, sigma, 0.0)
    if transposed:
        u, vt = v, left.T
    else:
        u, vt = left, v.T
    u, vt, sigma = u[:, :r].copy(), vt[:r].copy(), sigma[:r].copy()
    pivot = np.argmax(np.abs(u), axis=0)
    flip = u[pivot, np.arange(r)] < 0
    u[:, flip] *= -1.0
    vt[flip] *= -1.0
    return SvdResult(u=u, sigma=sigma, vt=vt)


def check_positive(value, name):
    if not value > 0:
        raise InputError(f"{name} must be positive, got {value}")

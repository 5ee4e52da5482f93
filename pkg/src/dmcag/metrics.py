"""Clustering accuracy, normalized mutual information and adjusted Rand index."""

import warnings

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import comb

from .errors import DegenerateMetricWarning, InputError


def _labels(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise InputError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise InputError("empty labelings")
    return pred, truth


def contingency(pred, truth):
    """Counts ``n_ab`` of samples with predicted cluster a and true class b."""
    pred, truth = _labels(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth):
    """Best fraction of agreement over one-to-one matchings of cluster ids to classes.

    The contingency table is zero-padded to square before the assignment, so
    surplus clusters are simply left unmatched.
    """
    table = contingency(pred, truth)
    size = max(table.shape)
    square = np.zeros((size, size), dtype=np.int64)
    square[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(-square)
    return float(square[rows, cols].sum() / table.sum())


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth):
    """Mutual information normalised by the geometric mean of the two entropies.

    Returns 0 (with a :class:`DegenerateMetricWarning`) when either labeling
    has a single cluster.
    """
    table = contingency(pred, truth)
    n = table.sum()
    h_pred = _entropy(table.sum(axis=1), n)
    h_true = _entropy(table.sum(axis=0), n)
    if h_pred == 0 or h_true == 0:
        warnings.warn("NMI is undefined for a single-cluster labeling; returning 0",
                      DegenerateMetricWarning, stacklevel=2)
        return 0.0
    joint = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return float(min(max(mi / np.sqrt(h_pred * h_true), 0.0), 1.0))


def ari(pred, truth):
    """Adjusted Rand index from pair counts; 1.0 when the expected and maximal index coincide."""
    table = contingency(pred, truth)
    n = int(table.sum())
    sum_cells = comb(table, 2).sum()
    sum_rows = comb(table.sum(axis=1), 2).sum()
    sum_cols = comb(table.sum(axis=0), 2).sum()
    expected = sum_rows * sum_cols / comb(n, 2) if n > 1 else 0.0
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def evaluate(pred, truth):
    """Metrics report ``{acc, nmi, ari, n, k_pred, k_true}``."""
    pred, truth = _labels(pred, truth)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateMetricWarning)
        score = nmi(pred, truth)
    return {"acc": accuracy(pred, truth), "nmi": score, "ari": ari(pred, truth),
            "n": int(pred.size), "k_pred": int(np.unique(pred).size),
            "k_true": int(np.unique(truth).size)}

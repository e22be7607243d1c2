"""Clustering-quality metrics and the k-means++ baseline.

Rand index, NMI, and unsupervised accuracy all reduce to a contingency
table, so labels may be arbitrary integers (no contiguity assumed) and
every metric is invariant under relabeling of either argument.
"""

import numpy as np
from scipy.optimize import linear_sum_assignment

MAX_DISTINCT_LABELS = 64


def _as_labels(x, name):
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D label vector")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValueError(f"{name} labels must be integers")
        arr = arr.astype(np.int64)
    return arr


def contingency_table(truth, pred):
    """Counts matrix indexed by (distinct truth label, distinct pred label)."""
    t = _as_labels(truth, "truth")
    p = _as_labels(pred, "pred")
    if t.size != p.size:
        raise ValueError(f"length mismatch: {t.size} vs {p.size}")
    t_vals, t_idx = np.unique(t, return_inverse=True)
    p_vals, p_idx = np.unique(p, return_inverse=True)
    table = np.zeros((t_vals.size, p_vals.size), dtype=np.int64)
    np.add.at(table, (t_idx, p_idx), 1)
    return table


def _pairs(counts):
    c = counts.astype(np.float64)
    return c * (c - 1.0) / 2.0


def rand_index(truth, pred):
    """Fraction of sample pairs clustered consistently in both labelings."""
    table = contingency_table(truth, pred)
    n = table.sum()
    if n < 2:
        raise ValueError("rand index needs at least 2 samples")
    total = n * (n - 1) / 2.0
    tp = _pairs(table).sum()
    fn = _pairs(table.sum(axis=1)).sum() - tp
    fp = _pairs(table.sum(axis=0)).sum() - tp
    tn = total - tp - fn - fp
    return (tp + tn) / total


def nmi(truth, pred):
    """2*MI / (H(truth) + H(pred)), natural logs.

    Degenerate cases are pinned: 1 when both labelings are constant
    (both entropies zero), 0 whenever MI is zero otherwise.
    """
    table = contingency_table(truth, pred).astype(np.float64)
    n = table.sum()
    pij = table / n
    pi = pij.sum(axis=1)
    pj = pij.sum(axis=0)
    h_u = -np.sum(pi[pi > 0] * np.log(pi[pi > 0]))
    h_v = -np.sum(pj[pj > 0] * np.log(pj[pj > 0]))
    mask = pij > 0
    mi = np.sum(pij[mask] * np.log(pij[mask] / np.outer(pi, pj)[mask]))
    if h_u + h_v == 0.0:
        return 1.0
    if mi <= 0.0:
        return 0.0
    return 2.0 * mi / (h_u + h_v)


def acc(truth, pred):
    """Best one-to-one label-matching accuracy (Hungarian assignment)."""
    table = contingency_table(truth, pred)
    if max(table.shape) > MAX_DISTINCT_LABELS:
        raise ValueError(f"more than {MAX_DISTINCT_LABELS} distinct labels")
    rows, cols = linear_sum_assignment(-table)
    return table[rows, cols].sum() / table.sum()


def kmeans_plusplus(records, k, rng, max_iters=100):
    """k-means++ seeding followed by Lloyd iterations.

    Runs until the assignment reaches a fixpoint or max_iters; fully
    deterministic for a given rng state. Returns the label vector.
    """
    x = np.asarray(records, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            # All remaining points coincide with a chosen center.
            idx = rng.integers(n)
        centers[c] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[c]) ** 2, axis=1))

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iters):
        dists = np.empty((n, k))
        for c in range(k):
            dists[:, c] = np.sum((x - centers[c]) ** 2, axis=1)
        new_labels = np.argmin(dists, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
            else:
                # Re-seed an empty cluster on the point farthest from its center.
                farthest = int(np.argmax(dists[np.arange(n), labels]))
                centers[c] = x[farthest]
                labels[farthest] = c
    return labels

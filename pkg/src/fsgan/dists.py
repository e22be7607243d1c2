"""Discrete distributions over fixed bins, with KL / JS / Wasserstein-1.

All divergences are in natural-log units, so the JS divergence is bounded
by ln 2 and matches the generalized-JSD convention used by the generator
objective oracle.
"""

from dataclasses import dataclass

import numpy as np

PROB_TOL = 1e-12
EDGE_TOL = 1e-12
SMOOTHING_EPS = 1e-9  # additive histogram smoothing so KL stays finite


@dataclass(frozen=True)
class DiscreteDist:
    """Probability vector over K contiguous bins."""

    probs: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        edges = np.asarray(self.edges, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "edges", edges)
        if probs.ndim != 1 or edges.ndim != 1 or edges.size != probs.size + 1:
            raise ValueError(
                f"need K probs and K+1 edges, got {probs.size} and {edges.size}")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly ascending")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError("probabilities must be non-negative and sum to 1")

    @property
    def n_bins(self):
        return self.probs.size

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def _require_shared_edges(p, q):
    if p.edges.size != q.edges.size or np.max(np.abs(p.edges - q.edges)) > EDGE_TOL:
        raise ValueError("distributions are binned over different edges")


def histogram(values, bin_count=100, lo=0.0, hi=1.0):
    """Equal-width histogram as a smoothed DiscreteDist.

    Values outside [lo, hi] are clipped into the boundary bins; the
    counts/n probabilities get SMOOTHING_EPS added and renormalized so no
    bin is exactly empty.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    if not lo < hi:
        raise ValueError(f"bad range [{lo}, {hi})")
    counts, edges = np.histogram(np.clip(x, lo, hi), bins=bin_count, range=(lo, hi))
    probs = counts / x.size + SMOOTHING_EPS
    probs /= probs.sum()
    return DiscreteDist(probs, edges)


def _kl_vec(p, q):
    # 0 * log 0 = 0 convention; p>0 against q=0 yields +inf.
    mask = p > 0
    if np.any(q[mask] == 0):
        return np.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_divergence(p, q):
    """KL(p || q) in nats. Infinite if q lacks mass where p has some."""
    _require_shared_edges(p, q)
    return _kl_vec(p.probs, q.probs)


def js_divergence(p, q):
    """Jensen-Shannon divergence in nats; symmetric, bounded by ln 2."""
    _require_shared_edges(p, q)
    m = 0.5 * (p.probs + q.probs)
    return 0.5 * _kl_vec(p.probs, m) + 0.5 * _kl_vec(q.probs, m)


def generalized_js_divergence(dists, weights):
    """Weighted JSD of several distributions: sum_m w_m KL(P_m || mix).

    Equals the mixing entropy H(w) when the supports are pairwise
    disjoint.
    """
    if len(dists) != len(weights) or not dists:
        raise ValueError("need one weight per distribution")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
        raise ValueError("weights must be a probability vector")
    for d in dists[1:]:
        _require_shared_edges(dists[0], d)
    mix = np.zeros_like(dists[0].probs)
    for wm, d in zip(w, dists):
        mix += wm * d.probs
    total = 0.0
    for wm, d in zip(w, dists):
        if wm > 0:
            total += wm * _kl_vec(d.probs, mix)
    return total


def mixture(dists, weights):
    """Convex combination of distributions sharing bin edges."""
    if len(dists) != len(weights) or not dists:
        raise ValueError("need one weight per distribution")
    for d in dists[1:]:
        _require_shared_edges(dists[0], d)
    w = np.asarray(weights, dtype=np.float64)
    probs = np.zeros_like(dists[0].probs)
    for wm, d in zip(w, dists):
        probs += wm * d.probs
    return DiscreteDist(probs / probs.sum(), dists[0].edges)


def wasserstein1(p, q):
    """1-D earth-mover distance in units of the binned variable."""
    _require_shared_edges(p, q)
    cdf_gap = np.abs(np.cumsum(p.probs) - np.cumsum(q.probs))
    widths = np.diff(p.edges)
    return float(np.sum(cdf_gap * widths))

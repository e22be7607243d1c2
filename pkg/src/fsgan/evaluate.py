"""Model-quality evaluation: clustering scores, distribution distances,
and synthesis-balance shares.

The packet-value projection (mean normalized byte) turns records into
scalars; real-vs-model distances are computed between histograms of
those projections. Shares report how the classifier distributes its
labels over a freshly synthesized pool, the balance view of synthesis.
"""

from dataclasses import dataclass

import numpy as np

from . import clustering, dists, gan
from .data import component_membership, packet_values


@dataclass
class EvalReport:
    """One model-vs-dataset evaluation."""

    ri: float = None
    nmi: float = None
    acc: float = None
    js: float = None
    kl: float = None
    wasserstein: float = None
    shares: np.ndarray = None

    def share_values(self):
        return None if self.shares is None else np.asarray(self.shares)


def synthesize_pool(banks, weights, n, rng):
    """Sample n records from a weighted collection of generator banks.

    Per-bank counts follow the weights by largest remainder, so the pool
    size is exact and the allocation deterministic.
    """
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    counts = np.floor(w * n).astype(int)
    remainder = n - counts.sum()
    if remainder > 0:
        order = np.argsort(-(w * n - counts), kind="stable")
        counts[order[:remainder]] += 1
    parts = []
    for bank, count in zip(banks, counts):
        if count > 0:
            samples, _ = gan.synthesize_batch(bank, count, rng)
            parts.append(samples)
    return np.vstack(parts)


def share_entropy(shares):
    """Entropy (nats) of a share vector; ln M means perfectly balanced."""
    s = np.asarray(shares, dtype=np.float64)
    s = s[s > 0]
    return float(-np.sum(s * np.log(s)))


def label_shares(labels, n_classes):
    """Fraction of items assigned to each class; sums to 1."""
    counts = np.bincount(np.asarray(labels), minlength=n_classes).astype(np.float64)
    return counts / counts.sum()


def component_shares(samples, spec):
    """Fraction of synthetic samples landing in each mixture component."""
    owners = component_membership(samples, spec)
    return label_shares(owners, spec.n_components)


def evaluate_model(head, banks, bank_weights, dataset, rng, n_samples=2000,
                   bins=100, lo=0.0, hi=1.0):
    """Score a model against a dataset.

    Clustering metrics compare pseudo-labels with the dataset's ground
    truth (skipped when unlabeled); distances compare the packet-value
    histograms of the real records and a synthesized pool; shares are
    the pseudo-label distribution over that pool.
    """
    report = EvalReport()
    pseudo = gan.pseudo_label(head, dataset.records)
    if dataset.labels is not None:
        report.ri = clustering.rand_index(dataset.labels, pseudo)
        report.nmi = clustering.nmi(dataset.labels, pseudo)
        report.acc = clustering.acc(dataset.labels, pseudo)
    pool = synthesize_pool(banks, bank_weights, n_samples, rng)
    real_hist = dists.histogram(packet_values(dataset.records), bins, lo, hi)
    model_hist = dists.histogram(packet_values(pool), bins, lo, hi)
    report.js = dists.js_divergence(real_hist, model_hist)
    report.kl = dists.kl_divergence(real_hist, model_hist)
    report.wasserstein = dists.wasserstein1(real_hist, model_hist)
    report.shares = label_shares(gan.pseudo_label(head, pool), head.n_classes)
    return report

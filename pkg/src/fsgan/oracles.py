"""Closed-form equilibrium oracles for the local multi-generator game.

These evaluate what the classifier and generators converge to, directly
from distributions, independent of any network training path. The test
suite uses them to cross-check the trained system.
"""

import numpy as np

from .dists import generalized_js_divergence, js_divergence, mixture

PROB_TOL = 1e-12


def optimal_classifier_oracle(pi, component_densities):
    """Posterior over generators for a point with the given densities.

    Entry m is pi_m * density_m / sum_i pi_i * density_i: a weighted
    normalization of the per-generator densities at the point.
    """
    w = np.asarray(pi, dtype=np.float64)
    d = np.asarray(component_densities, dtype=np.float64)
    if w.shape != d.shape or w.ndim != 1:
        raise ValueError("pi and densities must be 1-D vectors of equal length")
    if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
        raise ValueError("pi must be a probability vector")
    if np.any(d < 0):
        raise ValueError("densities must be non-negative")
    joint = w * d
    total = joint.sum()
    if total == 0.0:
        raise ValueError("all component densities are zero at this point")
    return joint / total


def generator_objective_oracle(data_dist, generator_dists, pi, lam):
    """Equilibrium objective the generator bank minimizes.

    2*JSD(data || model) - lam * JSD_pi(generators), where model is the
    pi-mixture of the generator distributions. Natural-log units; zero
    when every generator distribution equals the data distribution, and
    -lam * H(pi) when the generators are mutually disjoint while their
    mixture matches the data.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    w = np.asarray(pi, dtype=np.float64)
    if len(generator_dists) != w.size:
        raise ValueError("need one mixing weight per generator distribution")
    model = mixture(generator_dists, w)
    fit_term = 2.0 * js_divergence(data_dist, model)
    diversity_term = generalized_js_divergence(generator_dists, w)
    return fit_term - lam * diversity_term

"""The local three-player game: generator bank vs shared discriminator/
classifier trunk.

One site couples M generators (sampled through mixing weights pi) with a
trunk network whose two heads score realness (logistic) and producing
generator (softmax). A training iteration follows the local-synthesis
loop: synthesize a fake mini-batch, update the shared trunk/head
parameters by descending the combined classifier+discriminator loss,
then update the selected generators by descending the non-saturating
generator loss.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import sample_minibatch

PROB_FLOOR = 1e-12  # clamp applied to every probability before log

DEFAULT_NOISE_DIM = 100
DEFAULT_GEN_LAYERS = 8
DEFAULT_TRUNK_LAYERS = 6
DEFAULT_FEATURE_DIM = 16


@dataclass
class TrainConfig:
    """Hyper-parameters of local training and federated coordination."""

    n_sites: int = 1
    n_generators: int = 3
    lam: float = 0.5             # diversity weight on the classifier term
    batch_size: int = 100
    local_iters: int = 200       # iterations per site per round
    rounds: int = 30
    scheme: str = "c1"           # c1: generators+trunk federated, c2: trunk only
    record_dim: int = 1
    noise_dim: int = DEFAULT_NOISE_DIM
    gen_layers: int = DEFAULT_GEN_LAYERS
    trunk_layers: int = DEFAULT_TRUNK_LAYERS
    feature_dim: int = DEFAULT_FEATURE_DIM
    gen_hidden: int = 0    # fixed hidden width; 0 = geometric interpolation
    trunk_hidden: int = 0
    lr_generator: float = 2e-4
    lr_head: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    adam_epsilon: float = 1e-8
    seed: int = 0
    mixing: np.ndarray = None    # defaults to uniform over generators
    participation: float = 1.0   # fraction of sites per round
    retain_adam: bool = True     # keep optimizer moments across broadcasts
    simultaneous_updates: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        for name in ("n_sites", "n_generators", "batch_size", "rounds",
                     "local_iters", "record_dim", "noise_dim"):
            if getattr(self, name) < (0 if name in ("rounds", "local_iters") else 1):
                raise ValueError(f"{name} must be positive")
        if self.scheme not in ("c1", "c2"):
            raise ValueError(f"scheme must be 'c1' or 'c2', got {self.scheme!r}")
        if not 0.0 < self.participation <= 1.0:
            raise ValueError("participation must be in (0, 1]")
        if self.mixing is not None:
            self.mixing = np.asarray(self.mixing, dtype=np.float64)

    def mixing_weights(self):
        if self.mixing is None:
            return np.full(self.n_generators, 1.0 / self.n_generators)
        return self.mixing


class GeneratorBank:
    """M generator networks sampled through mixing weights pi."""

    def __init__(self, generators, mixing):
        if not generators:
            raise ValueError("need at least one generator")
        dims = {(g.input_dim, g.output_dim) for g in generators}
        if len(dims) != 1:
            raise ValueError(f"generators disagree on dimensions: {sorted(dims)}")
        pi = np.asarray(mixing, dtype=np.float64)
        if pi.shape != (len(generators),):
            raise ValueError("need one mixing weight per generator")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("mixing weights must form a probability vector")
        self.generators = list(generators)
        self.mixing = pi

    @property
    def size(self):
        return len(self.generators)

    @property
    def noise_dim(self):
        return self.generators[0].input_dim

    @property
    def record_dim(self):
        return self.generators[0].output_dim

    def copy(self):
        return GeneratorBank([g.copy() for g in self.generators], self.mixing.copy())


class SharedHead:
    """Trunk shared by the discriminator and classifier, plus their heads."""

    def __init__(self, trunk, disc_head, cls_head):
        if disc_head.input_dim != trunk.output_dim or cls_head.input_dim != trunk.output_dim:
            raise ValueError("head input widths must match the trunk output")
        if disc_head.output_dim != 1:
            raise ValueError("discriminator head must be a single logistic unit")
        self.trunk = trunk
        self.disc_head = disc_head
        self.cls_head = cls_head

    @property
    def record_dim(self):
        return self.trunk.input_dim

    @property
    def n_classes(self):
        return self.cls_head.output_dim

    def parameters(self):
        """The shared parameter group (trunk + both heads)."""
        return (self.trunk.parameters() + self.disc_head.parameters()
                + self.cls_head.parameters())

    def copy(self):
        return SharedHead(self.trunk.copy(), self.disc_head.copy(), self.cls_head.copy())


def build_generator(record_dim, noise_dim=DEFAULT_NOISE_DIM,
                    n_layers=DEFAULT_GEN_LAYERS, rng=None, hidden=0):
    """Generator MLP: noise in, logistic-squashed record out.

    Hidden widths interpolate geometrically by default; a nonzero
    `hidden` pins every hidden layer to that width instead (useful when
    record_dim is tiny and the geometric funnel gets too narrow).
    """
    if hidden:
        dims = [noise_dim] + [hidden] * (n_layers - 1) + [record_dim]
    else:
        dims = nn.geometric_dims(noise_dim, record_dim, n_layers)
    return nn.DenseNet(dims, output_activation="logistic", rng=rng)


def build_shared_head(record_dim, n_generators, feature_dim=DEFAULT_FEATURE_DIM,
                      n_layers=DEFAULT_TRUNK_LAYERS, rng=None, hidden=0):
    """Trunk + logistic discriminator head + softmax classifier head.

    The trunk provides n_layers - 1 of the network depth; the heads are
    the final layer, so discriminator and classifier have n_layers
    layers total and share everything below. Hidden widths follow the
    same geometric-default / fixed-override rule as build_generator.
    """
    if n_layers < 2:
        raise ValueError("need at least 2 layers (trunk + head)")
    if hidden:
        trunk_dims = [record_dim] + [hidden] * (n_layers - 2) + [feature_dim]
    else:
        trunk_dims = nn.geometric_dims(record_dim, feature_dim, n_layers - 1)
    trunk = nn.DenseNet(trunk_dims, output_activation="leaky_relu", rng=rng)
    disc = nn.DenseNet([feature_dim, 1], output_activation="logistic", rng=rng)
    cls = nn.DenseNet([feature_dim, n_generators], output_activation="softmax", rng=rng)
    return SharedHead(trunk, disc, cls)


def build_bank(config, rng):
    gens = [
        build_generator(config.record_dim, config.noise_dim, config.gen_layers,
                        rng, config.gen_hidden)
        for _ in range(config.n_generators)
    ]
    return GeneratorBank(gens, config.mixing_weights())


def sample_noise(noise_dim, batch_size, rng):
    """Standard-normal noise batch feeding the generators."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return rng.standard_normal((batch_size, noise_dim))


def _grouped_rows(ids, n_groups):
    return [np.flatnonzero(ids == m) for m in range(n_groups)]


def _synthesize_traced(bank, batch_size, rng):
    ids = rng.choice(bank.size, size=batch_size, p=bank.mixing)
    noise = sample_noise(bank.noise_dim, batch_size, rng)
    samples = np.empty((batch_size, bank.record_dim))
    traces = [None] * bank.size
    groups = _grouped_rows(ids, bank.size)
    for m, rows in enumerate(groups):
        if rows.size:
            traces[m] = nn.mlp_forward(bank.generators[m], noise[rows])
            samples[rows] = traces[m].output
    return samples, ids, groups, traces


def synthesize_batch(bank, batch_size, rng):
    """Draw generator ids from pi and synthesize one record per row."""
    samples, ids, _, _ = _synthesize_traced(bank, batch_size, rng)
    return samples, ids


# ---------------------------------------------------------------------------
# Losses (mini-batch forms); *_probs variants recompute from raw outputs.


def _clamped_log(p):
    return np.log(np.maximum(p, PROB_FLOOR))


def classifier_loss_probs(cls_probs, generator_ids):
    picked = cls_probs[np.arange(len(generator_ids)), generator_ids]
    return float(-np.mean(_clamped_log(picked)))


def discriminator_loss_probs(d_real, d_fake):
    return float(-np.mean(_clamped_log(d_real) + _clamped_log(1.0 - d_fake)))


def generator_loss_probs(d_fake, cls_probs, generator_ids, lam):
    picked = cls_probs[np.arange(len(generator_ids)), generator_ids]
    return float(-np.mean(_clamped_log(d_fake) + lam * _clamped_log(picked)))


def classifier_output(head, records):
    feats = nn.mlp_forward(head.trunk, records).output
    return nn.mlp_forward(head.cls_head, feats).output


def discriminator_output(head, records):
    feats = nn.mlp_forward(head.trunk, records).output
    return nn.mlp_forward(head.disc_head, feats).output[:, 0]


def classifier_loss(head, samples, generator_ids):
    """Cross-entropy of the classifier against the producing generators."""
    return classifier_loss_probs(classifier_output(head, samples), generator_ids)


def discriminator_loss(head, real_batch, fake_batch):
    """Two-sided log loss of the realness head."""
    return discriminator_loss_probs(discriminator_output(head, real_batch),
                                    discriminator_output(head, fake_batch))


def generator_loss(head, fake_batch, generator_ids, lam):
    """Non-saturating generator objective with the diversity term."""
    feats = nn.mlp_forward(head.trunk, fake_batch).output
    d_fake = nn.mlp_forward(head.disc_head, feats).output[:, 0]
    cls = nn.mlp_forward(head.cls_head, feats).output
    return generator_loss_probs(d_fake, cls, generator_ids, lam)


def pseudo_label(head, records):
    """Argmax generator id per record; ties resolve to the lowest index."""
    return np.argmax(classifier_output(head, records), axis=1)


# ---------------------------------------------------------------------------
# Local training


@dataclass
class IterationReport:
    """Pre-update loss values of one local iteration."""

    loss_c: float
    loss_d: float
    loss_g: float


class LocalSite:
    """One edge server: dataset + generator bank + shared trunk."""

    def __init__(self, site_id, dataset, bank, head, config, rng):
        if dataset.record_dim != head.record_dim or bank.record_dim != head.record_dim:
            raise nn.ShapeError("dataset, bank, and head disagree on record_dim")
        self.site_id = site_id
        self.dataset = dataset
        self.bank = bank
        self.head = head
        self.config = config
        self.rng = rng
        self.adam_head = nn.AdamState.for_params(
            head.parameters(), config.lr_head, config.adam_beta1,
            config.adam_beta2, config.adam_epsilon)
        self.adam_generators = [
            nn.AdamState.for_params(g.parameters(), config.lr_generator,
                                    config.adam_beta1, config.adam_beta2,
                                    config.adam_epsilon)
            for g in bank.generators
        ]

    def theta(self):
        return self.head.parameters()

    def omega(self):
        return [g.parameters() for g in self.bank.generators]


def _cls_prob_gradient(cls_probs, ids, scale):
    """d(loss)/d(probs) for -scale * mean(log C[id]) with the prob floor."""
    g = np.zeros_like(cls_probs)
    rows = np.arange(len(ids))
    picked = cls_probs[rows, ids]
    live = picked >= PROB_FLOOR
    g[rows[live], ids[live]] = -scale / (len(ids) * picked[live])
    return g


def _head_pass(head, records):
    trunk_trace = nn.mlp_forward(head.trunk, records)
    disc_trace = nn.mlp_forward(head.disc_head, trunk_trace.output)
    cls_trace = nn.mlp_forward(head.cls_head, trunk_trace.output)
    return trunk_trace, disc_trace, cls_trace


def _accumulate(into, grads):
    if into is None:
        return list(grads)
    for a, g in zip(into, grads):
        a += g
    return into


def _interleave(w_grads, b_grads):
    out = []
    for w, b in zip(w_grads, b_grads):
        out.append(w)
        out.append(b)
    return out


def local_train_iteration(site, config=None):
    """One full local-synthesis step; returns the pre-update losses."""
    cfg = site.config if config is None else config
    B = cfg.batch_size
    head = site.head

    real = sample_minibatch(site.dataset, B, site.rng)
    fake, ids, groups, gen_traces = _synthesize_traced(site.bank, B, site.rng)

    trunk_r, disc_r, _ = _head_pass(head, real)
    trunk_f, disc_f, cls_f = _head_pass(head, fake)
    d_real = disc_r.output[:, 0]
    d_fake = disc_f.output[:, 0]
    c_fake = cls_f.output

    report = IterationReport(
        loss_c=classifier_loss_probs(c_fake, ids),
        loss_d=discriminator_loss_probs(d_real, d_fake),
        loss_g=generator_loss_probs(d_fake, c_fake, ids, cfg.lam),
    )
    if not all(np.isfinite(v) for v in (report.loss_c, report.loss_d, report.loss_g)):
        raise nn.DivergenceError(
            f"non-finite loss at site {site.site_id}: {report}")

    # Shared-parameter gradients: combined classifier + discriminator loss.
    g_real = (-1.0 / (B * d_real))[:, None]
    gw_d, gb_d, gfeat_r = nn.mlp_backward(head.disc_head, disc_r, g_real)
    gw_t, gb_t, _ = nn.mlp_backward(head.trunk, trunk_r, gfeat_r)

    g_fake_d = (1.0 / (B * (1.0 - d_fake)))[:, None]
    dw, db, gfeat_f = nn.mlp_backward(head.disc_head, disc_f, g_fake_d)
    gw_d = _accumulate(gw_d, dw)
    gb_d = _accumulate(gb_d, db)

    g_cls = _cls_prob_gradient(c_fake, ids, 1.0)
    gw_c, gb_c, gfeat_c = nn.mlp_backward(head.cls_head, cls_f, g_cls)

    tw, tb, _ = nn.mlp_backward(head.trunk, trunk_f, gfeat_f + gfeat_c)
    gw_t = _accumulate(gw_t, tw)
    gb_t = _accumulate(gb_t, tb)

    theta_grads = (_interleave(gw_t, gb_t) + _interleave(gw_d, gb_d)
                   + _interleave(gw_c, gb_c))

    if cfg.simultaneous_updates:
        gen_input_grad = _generator_input_gradient(head, trunk_f, disc_f, cls_f,
                                                   ids, cfg.lam, B)
        nn.adam_step(head.parameters(), theta_grads, site.adam_head)
    else:
        # Algorithm order: update theta first, then push the generators
        # through the refreshed heads.
        nn.adam_step(head.parameters(), theta_grads, site.adam_head)
        trunk_f2, disc_f2, cls_f2 = _head_pass(head, fake)
        gen_input_grad = _generator_input_gradient(head, trunk_f2, disc_f2, cls_f2,
                                                   ids, cfg.lam, B)

    for m, rows in enumerate(groups):
        if rows.size == 0:
            continue
        gw, gb, _ = nn.mlp_backward(site.bank.generators[m], gen_traces[m],
                                    gen_input_grad[rows])
        nn.adam_step(site.bank.generators[m].parameters(), _interleave(gw, gb),
                     site.adam_generators[m])
    return report


def _generator_input_gradient(head, trunk_trace, disc_trace, cls_trace, ids, lam, B):
    """d(generator loss)/d(fake records), leaving head parameters alone."""
    d_fake = disc_trace.output[:, 0]
    g_d = (-1.0 / (B * d_fake))[:, None]
    _, _, gfeat_d = nn.mlp_backward(head.disc_head, disc_trace, g_d)
    gfeat = gfeat_d
    if lam != 0.0:
        g_c = _cls_prob_gradient(cls_trace.output, ids, lam)
        _, _, gfeat_c = nn.mlp_backward(head.cls_head, cls_trace, g_c)
        gfeat = gfeat_d + gfeat_c
    _, _, gx = nn.mlp_backward(head.trunk, trunk_trace, gfeat)
    return gx

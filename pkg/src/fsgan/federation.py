"""Global model coordination across sites.

Each round the participating sites run their local iterations, the
coordinator forms the weighted parameter average (trunk/heads always;
generators too under scheme c1), and the result is broadcast back to
every site. Communication is simulated in-process; the per-round count
of uploaded parameters is reported so the c1-vs-c2 cost comparison is
quantifiable.

Seed streams (all descend from config.seed): [seed, 0] shared model
init, [seed, 1, site_id] per-site training, [seed, 2] coordinator
participation draws, [seed, 3, round] evaluation sampling.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .evaluate import evaluate_model
from .gan import (GeneratorBank, IterationReport, LocalSite, SharedHead,
                  build_bank, build_shared_head, local_train_iteration)


@dataclass
class Coordinator:
    """Aggregation weights plus the per-round participation rule."""

    site_weights: np.ndarray
    scheme: str = "c1"
    participation: float = 1.0
    round_counter: int = 0

    def __post_init__(self):
        w = np.asarray(self.site_weights, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("site weights must form a probability vector")
        self.site_weights = w
        if self.scheme not in ("c1", "c2"):
            raise ValueError(f"scheme must be 'c1' or 'c2', got {self.scheme!r}")

    @classmethod
    def for_datasets(cls, datasets, scheme="c1", participation=1.0):
        sizes = np.array([len(d) for d in datasets], dtype=np.float64)
        return cls(sizes / sizes.sum(), scheme, participation)

    def select_participants(self, rng):
        """Non-empty subset of site ids for this round, in id order."""
        n = self.site_weights.size
        count = max(1, round(self.participation * n))
        if count >= n:
            return list(range(n))
        chosen = rng.choice(n, size=count, replace=False)
        return sorted(int(i) for i in chosen)

    def effective_weights(self, participants):
        w = self.site_weights[participants]
        return w / w.sum()


@dataclass
class RoundReport:
    """Bookkeeping for one completed communication round."""

    round_index: int
    participants: list
    site_losses: dict                 # site_id -> mean IterationReport
    params_uploaded: int
    duration: float
    metrics: object = None            # EvalReport when an eval set was given


@dataclass
class FederatedModel:
    """Global model after training: shared head plus generator banks."""

    head: SharedHead
    bank: GeneratorBank = None        # global bank (scheme c1 only)
    site_banks: list = field(default_factory=list)
    site_weights: np.ndarray = None

    def sampling_banks(self):
        """Banks and weights to synthesize from, whichever scheme ran."""
        if self.bank is not None:
            return [self.bank], np.array([1.0])
        return self.site_banks, self.site_weights


def average_params(param_lists, weights):
    """Weighted average of aligned parameter lists (one list per site)."""
    if len(param_lists) != len(weights) or not param_lists:
        raise ValueError("need one weight per parameter list")
    shapes = [tuple(p.shape for p in params) for params in param_lists]
    if any(s != shapes[0] for s in shapes[1:]):
        raise nn.ShapeError("architecture mismatch across sites")
    out = []
    for arrays in zip(*param_lists):
        acc = weights[0] * arrays[0]
        for w, a in zip(weights[1:], arrays[1:]):
            acc += w * a
        out.append(acc)
    return out


def aggregate(sites, weights, scheme):
    """Eq.-(4)-style aggregation: returns (theta0, omega0-or-None).

    theta0 averages the shared trunk/head parameters of the given sites;
    under scheme c1 omega0 additionally averages the generators,
    position m with position m.
    """
    w = np.asarray(weights, dtype=np.float64)
    theta0 = average_params([s.theta() for s in sites], w)
    if scheme != "c1":
        return theta0, None
    n_gen = sites[0].bank.size
    if any(s.bank.size != n_gen for s in sites):
        raise nn.ShapeError("generator counts differ across sites")
    omega0 = [
        average_params([s.omega()[m] for s in sites], w) for m in range(n_gen)
    ]
    return theta0, omega0


def broadcast(theta0, omega0, sites, scheme, reset_adam=False):
    """Install the global parameters into every site (omega under c1)."""
    for site in sites:
        _copy_group(site.theta(), theta0)
        if scheme == "c1":
            if omega0 is None:
                raise ValueError("scheme c1 broadcast needs generator parameters")
            for gen, params in zip(site.bank.generators, omega0):
                gen.set_parameters(params)
        if reset_adam:
            site.adam_head.reset()
            for state in site.adam_generators:
                state.reset()
    return sites


def _copy_group(dst_params, src_params):
    if len(dst_params) != len(src_params):
        raise nn.ShapeError("parameter group size mismatch")
    for dst, src in zip(dst_params, src_params):
        if dst.shape != src.shape:
            raise nn.ShapeError(f"parameter shape mismatch {dst.shape} vs {src.shape}")
        np.copyto(dst, src)


def _param_count(params):
    return sum(p.size for p in params)


def _train_site(site, iters):
    sums = np.zeros(3)
    for _ in range(iters):
        rep = local_train_iteration(site)
        sums += (rep.loss_c, rep.loss_d, rep.loss_g)
    if iters == 0:
        return IterationReport(float("nan"), float("nan"), float("nan"))
    return IterationReport(*(sums / iters))


def run_round(sites, coordinator, config, coord_rng, eval_fn=None):
    """One communication round: local training, aggregate, broadcast."""
    start = time.perf_counter()
    participants = coordinator.select_participants(coord_rng)
    active = [sites[d] for d in participants]

    if config.threads > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            losses = list(pool.map(lambda s: _train_site(s, config.local_iters), active))
    else:
        losses = [_train_site(s, config.local_iters) for s in active]

    weights = coordinator.effective_weights(participants)
    theta0, omega0 = aggregate(active, weights, coordinator.scheme)
    broadcast(theta0, omega0, sites, coordinator.scheme,
              reset_adam=not config.retain_adam)

    uploaded = len(active) * _param_count(active[0].theta())
    if coordinator.scheme == "c1":
        uploaded += len(active) * sum(_param_count(g) for g in active[0].omega())

    coordinator.round_counter += 1
    report = RoundReport(
        round_index=coordinator.round_counter,
        participants=participants,
        site_losses={s.site_id: rep for s, rep in zip(active, losses)},
        params_uploaded=uploaded,
        duration=time.perf_counter() - start,
    )
    if eval_fn is not None:
        report.metrics = eval_fn(coordinator.round_counter)
    return report


def build_sites(config, datasets):
    """Sites with a common initial model and independent RNG streams."""
    init_rng = np.random.default_rng([config.seed, 0])
    template_bank = build_bank(config, init_rng)
    template_head = build_shared_head(config.record_dim, config.n_generators,
                                      config.feature_dim, config.trunk_layers,
                                      init_rng, config.trunk_hidden)
    sites = []
    for d, dataset in enumerate(datasets):
        rng = np.random.default_rng([config.seed, 1, d])
        sites.append(LocalSite(d, dataset, template_bank.copy(),
                               template_head.copy(), config, rng))
    return sites


def run_training(config, datasets, eval_dataset=None, on_round=None):
    """Run the full J-round coordination loop.

    Returns (round reports, FederatedModel). When eval_dataset is given,
    each report carries the global model's evaluation against it.
    """
    if len(datasets) != config.n_sites:
        raise ValueError(f"expected {config.n_sites} datasets, got {len(datasets)}")
    sites = build_sites(config, datasets)
    coordinator = Coordinator.for_datasets(datasets, config.scheme, config.participation)
    coord_rng = np.random.default_rng([config.seed, 2])

    def eval_fn(round_index):
        model = _snapshot(sites, coordinator, config)
        banks, weights = model.sampling_banks()
        return evaluate_model(model.head, banks, weights, eval_dataset,
                              np.random.default_rng([config.seed, 3, round_index]))

    reports = []
    for _ in range(config.rounds):
        try:
            report = run_round(sites, coordinator, config, coord_rng,
                               eval_fn if eval_dataset is not None else None)
        except nn.DivergenceError as exc:
            exc.round_index = coordinator.round_counter
            raise
        reports.append(report)
        if on_round is not None:
            on_round(report)
    return reports, _snapshot(sites, coordinator, config)


def _snapshot(sites, coordinator, config):
    """Materialize the current global model from the site states."""
    theta0, omega0 = aggregate(sites, coordinator.site_weights, coordinator.scheme)
    head = sites[0].head.copy()
    _copy_group(head.parameters(), theta0)
    bank = None
    if coordinator.scheme == "c1":
        bank = sites[0].bank.copy()
        for gen, params in zip(bank.generators, omega0):
            gen.set_parameters(params)
    return FederatedModel(
        head=head,
        bank=bank,
        site_banks=[s.bank.copy() for s in sites],
        site_weights=coordinator.site_weights.copy(),
    )

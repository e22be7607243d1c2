"""Experiment orchestration shared by the CLI subcommands.

Dataset resolution, the train/evaluate/compare pipelines, and the
metrics.csv emission all live here so they are drivable from Python as
well as the command line. Every pipeline is deterministic given
(config, seed): data generation draws from the [seed, 4] stream,
holdout sets from [seed, 5], and comparison baselines from [seed, 6].
"""

import csv
import io
import os
from dataclasses import dataclass, replace

import numpy as np

from . import clustering, data, dists, evaluate, federation, model_io

CSV_COLUMNS = ["round", "scope", "loss_c", "loss_d", "loss_g", "nmi", "acc",
               "ri", "jsd_real_vs_model", "kl", "wasserstein", "params_uploaded"]

COMPARISON_COLUMNS = ["method", "seed", "ri", "nmi", "acc", "js"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if not np.isfinite(value):
        return ""
    return format(float(value), ".12g")


def resolve_dataset(config):
    """The training dataset: an FSGD file if configured, else a fresh mixture."""
    if config.data:
        return data.ingest_payloads(config.data)
    rng = np.random.default_rng([config.seed, 4])
    return data.generate_mixture(config.mixture_spec(), config.n, rng)


def resolve_holdout(config):
    """Held-out labeled data for round evaluation (None when unavailable)."""
    if config.holdout_n <= 0 or config.data:
        return None
    rng = np.random.default_rng([config.seed, 5])
    return data.generate_mixture(config.mixture_spec(), config.holdout_n, rng)


def metrics_rows(reports):
    """MetricsRow records for a list of RoundReports (site rows + global row)."""
    rows = []
    for report in reports:
        for site_id in sorted(report.site_losses):
            losses = report.site_losses[site_id]
            rows.append([report.round_index, f"site:{site_id}",
                         _fmt(losses.loss_c), _fmt(losses.loss_d), _fmt(losses.loss_g),
                         "", "", "", "", "", "", ""])
        m = report.metrics
        rows.append([report.round_index, "global", "", "", "",
                     _fmt(m.nmi if m else None), _fmt(m.acc if m else None),
                     _fmt(m.ri if m else None), _fmt(m.js if m else None),
                     _fmt(m.kl if m else None), _fmt(m.wasserstein if m else None),
                     _fmt(report.params_uploaded)])
    return rows


def write_metrics_csv(path, reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(metrics_rows(reports))
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def write_histogram(path, dist):
    """gnuplot-ready dump: bin_center <tab> probability per line."""
    with open(path, "w") as fh:
        for center, prob in zip(dist.centers, dist.probs):
            fh.write(f"{_fmt(center)}\t{_fmt(prob)}\n")
    return path


@dataclass
class TrainOutcome:
    reports: list
    model: federation.FederatedModel
    dataset: object
    holdout: object
    metrics_path: str = None
    model_path: str = None


def run_train(config, out_dir=None):
    """The full train pipeline; writes metrics.csv/model.bin when out_dir set."""
    dataset = resolve_dataset(config)
    if config.record_dim != dataset.record_dim:
        config = replace(config, record_dim=dataset.record_dim)
    plan = config.partition_plan()
    part_rng = np.random.default_rng([config.seed, 4, 1])
    site_data = data.partition(dataset, plan, part_rng)
    holdout = resolve_holdout(config)
    eval_set = holdout if holdout is not None else (
        dataset if dataset.labels is not None else None)

    reports, model = federation.run_training(config.train_config(), site_data,
                                             eval_dataset=eval_set)
    outcome = TrainOutcome(reports, model, dataset, holdout)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        outcome.metrics_path = write_metrics_csv(
            os.path.join(out_dir, "metrics.csv"), reports)
        outcome.model_path = model_io.save_model(
            os.path.join(out_dir, "model.bin"), model.head, model.bank)
        _dump_model_histograms(out_dir, config, model, dataset)
    return outcome


def _dump_model_histograms(out_dir, config, model, dataset):
    rng = np.random.default_rng([config.seed, 3, 0])
    banks, weights = model.sampling_banks()
    pool = evaluate.synthesize_pool(banks, weights, config.eval_samples, rng)
    write_histogram(os.path.join(out_dir, "hist_real.tsv"),
                    dists.histogram(data.packet_values(dataset.records),
                                    config.bins, config.hist_lo, config.hist_hi))
    write_histogram(os.path.join(out_dir, "hist_model.tsv"),
                    dists.histogram(data.packet_values(pool),
                                    config.bins, config.hist_lo, config.hist_hi))
    for m, bank_gen in enumerate(banks[0].generators if banks else []):
        samples, _ = _single_generator_pool(bank_gen, config.eval_samples, rng)
        write_histogram(os.path.join(out_dir, f"hist_gen{m}.tsv"),
                        dists.histogram(data.packet_values(samples),
                                        config.bins, config.hist_lo, config.hist_hi))


def _single_generator_pool(gen, n, rng):
    from . import gan, nn

    noise = gan.sample_noise(gen.input_dim, n, rng)
    return nn.mlp_forward(gen, noise).output, None


def run_evaluation(config, head, bank, dataset, out_dir=None):
    """Score a stored model against a dataset; optionally dump histograms."""
    if head.record_dim != dataset.record_dim:
        raise ValueError(
            f"model expects record_dim {head.record_dim}, dataset has "
            f"{dataset.record_dim}")
    banks = [bank] if bank is not None else []
    if not banks:
        raise ValueError("checkpoint carries no generator bank to sample from")
    rng = np.random.default_rng([config.seed, 3, 0])
    report = evaluate.evaluate_model(head, banks, np.ones(len(banks)), dataset,
                                     rng, config.eval_samples, config.bins,
                                     config.hist_lo, config.hist_hi)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        pool = evaluate.synthesize_pool(banks, np.ones(len(banks)),
                                        config.eval_samples,
                                        np.random.default_rng([config.seed, 3, 0]))
        write_histogram(os.path.join(out_dir, "hist_real.tsv"),
                        dists.histogram(data.packet_values(dataset.records),
                                        config.bins, config.hist_lo, config.hist_hi))
        write_histogram(os.path.join(out_dir, "hist_model.tsv"),
                        dists.histogram(data.packet_values(pool),
                                        config.bins, config.hist_lo, config.hist_hi))
    return report


def kmeans_site_baseline(config, site_data, eval_set):
    """Per-site k-means++ under the same data-access constraints.

    Each site clusters only its local records (k = generator count); its
    centroids then label the global held-out set by nearest centroid.
    Returns the across-site mean of each clustering metric.
    """
    scores = []
    for d, site in enumerate(site_data):
        rng = np.random.default_rng([config.seed, 6, d])
        local_labels = clustering.kmeans_plusplus(site.records, config.generators, rng)
        centers = np.stack([
            site.records[local_labels == c].mean(axis=0)
            if np.any(local_labels == c) else site.records.mean(axis=0)
            for c in range(config.generators)
        ])
        gaps = np.linalg.norm(eval_set.records[:, None, :] - centers[None], axis=2)
        pred = np.argmin(gaps, axis=1)
        scores.append((clustering.rand_index(eval_set.labels, pred),
                       clustering.nmi(eval_set.labels, pred),
                       clustering.acc(eval_set.labels, pred)))
    return tuple(np.mean(scores, axis=0))


def run_compare(config, out_dir=None):
    """FS-GAN vs the lam=0 ablation vs per-site k-means++, seed by seed."""
    rows = []
    for offset in range(config.compare_seeds):
        seed = config.seed + offset
        fs_cfg = replace(config, seed=seed)
        fg_cfg = replace(config, seed=seed, lam=0.0)

        for method, cfg in (("fs-gan", fs_cfg), ("f-gan", fg_cfg)):
            outcome = run_train(cfg)
            final = outcome.reports[-1].metrics if outcome.reports else None
            rows.append([method, seed,
                         _fmt(final.ri if final else None),
                         _fmt(final.nmi if final else None),
                         _fmt(final.acc if final else None),
                         _fmt(final.js if final else None)])

        km_cfg = replace(config, seed=seed)
        dataset = resolve_dataset(km_cfg)
        plan = km_cfg.partition_plan()
        site_data = data.partition(dataset, plan,
                                   np.random.default_rng([km_cfg.seed, 4, 1]))
        eval_set = resolve_holdout(km_cfg) or dataset
        ri, nmi, acc = kmeans_site_baseline(km_cfg, site_data, eval_set)
        rows.append(["kmeans++", seed, _fmt(ri), _fmt(nmi), _fmt(acc), ""])

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "comparison.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COMPARISON_COLUMNS)
            writer.writerows(rows)
    return rows


def run_synth_data(config, out_dir):
    """Generate a mixture dataset and store it as FSGD; returns a summary."""
    rng = np.random.default_rng([config.seed, 4])
    dataset = data.generate_mixture(config.mixture_spec(), config.n, rng)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "dataset.fsgd")
    data.write_fsgd(path, dataset)
    shares = evaluate.label_shares(dataset.labels, config.mixture_components)
    return path, dataset, shares

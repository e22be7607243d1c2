"""Command-line entry point.

Subcommands: synth-data, train, evaluate, compare. Flags override the
config file; exit codes are 0 success, 2 config error, 3 training
divergence, 4 evaluation error.
"""

import argparse
import sys

from . import data, model_io, pipeline
from .config import ConfigError, load_config
from .evaluate import share_entropy
from .nn import DivergenceError, ShapeError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_EVALUATION = 4


def _add_common_flags(parser):
    parser.add_argument("--config", metavar="PATH", help="key=value config file")
    parser.add_argument("--seed", type=int, help="global RNG seed")
    parser.add_argument("--scheme", choices=["c1", "c2"], help="coordination scheme")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="classifier diversity weight")
    parser.add_argument("--sites", type=int, help="number of edge sites")
    parser.add_argument("--generators", type=int, help="generators per site")
    parser.add_argument("--rounds", type=int, help="communication rounds")
    parser.add_argument("--local-iters", type=int, help="iterations per site per round")
    parser.add_argument("--batch", type=int, help="mini-batch size")
    parser.add_argument("--threads", type=int, help="site training threads")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--data", metavar="PATH", help="FSGD dataset to train on")


_FLAG_KEYS = ("seed", "scheme", "lam", "sites", "generators", "rounds",
              "local_iters", "batch", "threads", "out", "data")


def _build_config(args):
    overrides = []
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides.append((key, value))
    return load_config(args.config, overrides)


def cmd_synth_data(args):
    config = _build_config(args)
    path, dataset, shares = pipeline.run_synth_data(config, config.out)
    print(f"wrote {path}")
    print(f"records: {len(dataset)}  record_dim: {dataset.record_dim}  "
          f"components: {config.mixture_components}")
    print("label shares: " + " ".join(f"{s:.4f}" for s in shares))
    return EXIT_OK


def cmd_train(args):
    config = _build_config(args)
    try:
        outcome = pipeline.run_train(config, out_dir=config.out)
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        print(f"last good round: {getattr(exc, 'round_index', 'unknown')}",
              file=sys.stderr)
        return EXIT_DIVERGENCE
    print(f"wrote {outcome.metrics_path}")
    print(f"wrote {outcome.model_path}")
    if outcome.reports and outcome.reports[-1].metrics is not None:
        final = outcome.reports[-1].metrics
        print(f"final round {outcome.reports[-1].round_index}: "
              f"nmi={final.nmi:.4f} acc={final.acc:.4f} ri={final.ri:.4f} "
              f"js={final.js:.4f}")
    return EXIT_OK


def cmd_evaluate(args):
    config = _build_config(args)
    if not args.model or not args.data:
        print("evaluate needs --model and --data", file=sys.stderr)
        return EXIT_CONFIG
    try:
        head, bank = model_io.load_model(args.model)
        dataset = data.ingest_payloads(args.data)
        report = pipeline.run_evaluation(config, head, bank, dataset,
                                         out_dir=config.out)
    except (ValueError, ShapeError) as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return EXIT_EVALUATION
    if report.nmi is not None:
        print(f"ri={report.ri:.4f} nmi={report.nmi:.4f} acc={report.acc:.4f}")
    else:
        print("dataset is unlabeled: clustering metrics skipped")
    print(f"js={report.js:.4f} kl={report.kl:.4f} wasserstein={report.wasserstein:.4f}")
    shares = report.share_values()
    print("generator shares: " + " ".join(f"{s:.4f}" for s in shares))
    print(f"share entropy: {share_entropy(shares):.4f}")
    return EXIT_OK


def cmd_compare(args):
    config = _build_config(args)
    try:
        rows = pipeline.run_compare(config, out_dir=config.out)
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    header = " ".join(f"{c:>10}" for c in pipeline.COMPARISON_COLUMNS)
    print(header)
    for row in rows:
        print(" ".join(f"{str(v):>10}" for v in row))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fsgan",
        description="Federated multi-generator GAN training and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate a synthetic mixture dataset")
    _add_common_flags(p)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="run federated training")
    _add_common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint against a dataset")
    _add_common_flags(p)
    p.add_argument("--model", metavar="PATH", help="model checkpoint")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="FS-GAN vs ablation vs k-means++")
    _add_common_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Experiment configuration: flat key=value files plus CLI overrides.

Every key has a default; unknown keys are rejected. Config files hold
one `key = value` pair per line, with '#' comments and blank lines
ignored. Booleans accept true/false/1/0/yes/no.
"""

from dataclasses import dataclass, fields

from .data import PartitionPlan, gaussian_mixture, leave_one_out_plan, uniform_cube_mixture
from .gan import TrainConfig


@dataclass
class ExperimentConfig:
    """Everything an experiment run needs, with documented defaults.

    Training:
      scheme 'c1'|'c2' (coordination scheme), sites, generators, rounds,
      local_iters, batch, lam (diversity weight), lr_generator, lr_head,
      participation (fraction of sites per round), retain_adam,
      simultaneous_updates, threads, seed.
    Architecture:
      record_dim, noise_dim, gen_layers, trunk_layers, feature_dim,
      gen_hidden/trunk_hidden (fixed hidden widths; 0 = geometric).
    Data (either a FSGD path in `data`, or a synthetic mixture):
      n (mixture sample count), mixture_components, mixture_kind
      'uniform'|'gaussian', mixture_gap, gaussian_sigma.
    Partitioning:
      partition 'iid'|'by-component'; site_components like '0,1;0,2;1,2'
      (empty means leave-one-out under by-component).
    Evaluation/outputs:
      holdout_n (held-out eval samples; 0 evaluates on training data),
      eval_samples (synthesized pool size), bins, hist_lo, hist_hi,
      compare_seeds (seeds per method in `compare`), out (directory).
    """

    scheme: str = "c1"
    sites: int = 1
    generators: int = 3
    rounds: int = 30
    local_iters: int = 200
    batch: int = 100
    lam: float = 0.5
    lr_generator: float = 2e-4
    lr_head: float = 2e-4
    participation: float = 1.0
    retain_adam: bool = True
    simultaneous_updates: bool = False
    threads: int = 1
    seed: int = 0

    record_dim: int = 1
    noise_dim: int = 100
    gen_layers: int = 8
    trunk_layers: int = 6
    feature_dim: int = 16
    gen_hidden: int = 0
    trunk_hidden: int = 0

    data: str = ""
    n: int = 2000
    mixture_components: int = 3
    mixture_kind: str = "uniform"
    mixture_gap: float = 0.05
    gaussian_sigma: float = 0.02

    partition: str = "iid"
    site_components: str = ""

    holdout_n: int = 2000
    eval_samples: int = 2000
    bins: int = 100
    hist_lo: float = 0.0
    hist_hi: float = 1.0
    compare_seeds: int = 3
    out: str = "out"

    def train_config(self):
        return TrainConfig(
            n_sites=self.sites,
            n_generators=self.generators,
            lam=self.lam,
            batch_size=self.batch,
            local_iters=self.local_iters,
            rounds=self.rounds,
            scheme=self.scheme,
            record_dim=self.record_dim,
            noise_dim=self.noise_dim,
            gen_layers=self.gen_layers,
            trunk_layers=self.trunk_layers,
            feature_dim=self.feature_dim,
            gen_hidden=self.gen_hidden,
            trunk_hidden=self.trunk_hidden,
            lr_generator=self.lr_generator,
            lr_head=self.lr_head,
            seed=self.seed,
            participation=self.participation,
            retain_adam=self.retain_adam,
            simultaneous_updates=self.simultaneous_updates,
            threads=self.threads,
        )

    def mixture_spec(self):
        if self.mixture_kind == "uniform":
            return uniform_cube_mixture(self.mixture_components, self.record_dim,
                                        self.mixture_gap)
        if self.mixture_kind == "gaussian":
            return gaussian_mixture(self.mixture_components, self.record_dim,
                                    self.gaussian_sigma)
        raise ConfigError(f"unknown mixture_kind {self.mixture_kind!r}")

    def partition_plan(self):
        if self.partition == "iid":
            return PartitionPlan("iid", self.sites)
        if self.partition != "by-component":
            raise ConfigError(f"unknown partition mode {self.partition!r}")
        if not self.site_components:
            return leave_one_out_plan(self.sites, self.mixture_components)
        lists = []
        for chunk in self.site_components.split(";"):
            lists.append([int(v) for v in chunk.split(",") if v.strip() != ""])
        if len(lists) != self.sites:
            raise ConfigError(
                f"site_components lists {len(lists)} sites, config has {self.sites}")
        return PartitionPlan("by-component", self.sites, lists)


class ConfigError(ValueError):
    pass


# CLI keys map onto config fields; 'lambda' is the file/flag spelling of lam.
_KEY_ALIASES = {"lambda": "lam"}


def _parse_value(raw, kind):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r}: {exc}") from None


def apply_overrides(config, pairs):
    """Set key=value pairs onto a config, validating names and types."""
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    by_name = {"str": str, "int": int, "float": float, "bool": bool}
    for key, raw in pairs:
        name = _KEY_ALIASES.get(key, key)
        if name not in kinds:
            raise ConfigError(f"unknown config key {key!r}")
        kind = kinds[name]
        if isinstance(kind, str):
            kind = by_name[kind]
        setattr(config, name, _parse_value(str(raw), kind))
    return config


def load_config(path=None, overrides=()):
    """Build a config from an optional file plus override pairs."""
    config = ExperimentConfig()
    if path is not None:
        pairs = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, raw = stripped.split("=", 1)
                pairs.append((key.strip(), raw))
        apply_overrides(config, pairs)
    apply_overrides(config, overrides)
    return config

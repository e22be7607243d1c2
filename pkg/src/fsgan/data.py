"""Datasets: synthetic separable mixtures and ingested packet payloads.

Payload ingestion starts from files, not captures: upstream tooling is
expected to strip physical/link headers and emit either the FSGD
container or a raw stream of length-prefixed payload byte strings (u32
little-endian length, then that many bytes, repeated to EOF). Records
are fixed-width byte vectors mapped to reals by b/255.

FSGD container layout (little-endian, bit-exact):

    magic  4 bytes  'FSGD'
    u8     version (0x01)
    u32    record_dim
    u32    record count n
    u8     flags (bit0: labels present)
    n * record_dim  raw record bytes
    n * u16         labels (only when flagged)
"""

import struct
from dataclasses import dataclass, field

import numpy as np

FSGD_MAGIC = b"FSGD"
FSGD_VERSION = 1
RAW_DEFAULT_RECORD_DIM = 2500

_HEADER = struct.Struct("<4sBIIB")


class FormatError(ValueError):
    """Malformed dataset file; carries the byte offset of the problem."""

    def __init__(self, offset, message):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class SeparationError(ValueError):
    """Mixture components overlap; carries the offending pair."""

    def __init__(self, first, second):
        super().__init__(f"components {first} and {second} have overlapping support")
        self.pair = (first, second)


@dataclass(frozen=True)
class UniformComponent:
    """Uniform density on a product of per-dimension intervals."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=np.float64))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("need lo < hi per dimension")
        if np.any(lo < 0) or np.any(hi > 1):
            raise ValueError("supports must lie in [0,1]")

    @property
    def dim(self):
        return self.lo.size

    def sample(self, count, rng):
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))

    def contains(self, records):
        x = np.atleast_2d(records)
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def density(self, records):
        volume = float(np.prod(self.hi - self.lo))
        return self.contains(records) / volume

    def disjoint_from(self, other):
        if isinstance(other, UniformComponent):
            # Boxes are disjoint iff some axis separates them.
            return bool(np.any((self.hi < other.lo) | (other.hi < self.lo)))
        return other.disjoint_from(self)

    def center(self):
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class GaussianComponent:
    """Isotropic Gaussian clamped into [0,1]^dim."""

    mean: np.ndarray
    sigma: float

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "mean", mean)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def dim(self):
        return self.mean.size

    def sample(self, count, rng):
        x = self.mean + self.sigma * rng.standard_normal((count, self.dim))
        return np.clip(x, 0.0, 1.0)

    def contains(self, records):
        # 4-sigma ball, the effective support under the separation rule.
        x = np.atleast_2d(records)
        d = np.linalg.norm(x - self.mean, axis=1)
        return d <= 4.0 * self.sigma

    def density(self, records):
        x = np.atleast_2d(records)
        d2 = np.sum((x - self.mean) ** 2, axis=1)
        norm = (2.0 * np.pi * self.sigma**2) ** (self.dim / 2.0)
        return np.exp(-0.5 * d2 / self.sigma**2) / norm

    def disjoint_from(self, other):
        if isinstance(other, GaussianComponent):
            gap = np.linalg.norm(self.mean - other.mean)
            return gap >= 8.0 * max(self.sigma, other.sigma)
        # Gaussian vs box: keep the 4-sigma ball clear of the box.
        nearest = np.clip(self.mean, other.lo, other.hi)
        return np.linalg.norm(self.mean - nearest) >= 4.0 * self.sigma

    def center(self):
        return self.mean


@dataclass
class MixtureSpec:
    """A separable mixture: components plus their sampling proportions."""

    components: list
    proportions: np.ndarray
    require_separation: bool = True

    def __post_init__(self):
        props = np.asarray(self.proportions, dtype=np.float64)
        self.proportions = props
        if props.size != len(self.components) or not self.components:
            raise ValueError("need one proportion per component")
        if np.any(props < 0) or abs(props.sum() - 1.0) > 1e-12:
            raise ValueError("proportions must form a probability vector")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"components disagree on dimension: {sorted(dims)}")
        if self.require_separation:
            self.check_separation()

    @property
    def record_dim(self):
        return self.components[0].dim

    @property
    def n_components(self):
        return len(self.components)

    def check_separation(self):
        for i in range(len(self.components)):
            for j in range(i + 1, len(self.components)):
                if not self.components[i].disjoint_from(self.components[j]):
                    raise SeparationError(i, j)

    def densities_at(self, point):
        """Per-component density values at one point (Prop-1 oracle input)."""
        x = np.atleast_2d(point)
        return np.array([float(c.density(x)[0]) for c in self.components])


def separated_intervals(count, gap=0.05):
    """Evenly sized disjoint intervals covering [0,1] with fixed gaps."""
    if count < 1:
        raise ValueError("count must be >= 1")
    width = (1.0 - gap * (count - 1)) / count
    if width <= 0:
        raise ValueError("gap too large for this many intervals")
    out = []
    for i in range(count):
        lo = i * (width + gap)
        out.append((lo, lo + width))
    return out


def uniform_cube_mixture(n_components, record_dim=1, gap=0.05, proportions=None):
    """Disjoint uniform hypercube components along the diagonal of [0,1]^d."""
    intervals = separated_intervals(n_components, gap)
    comps = [
        UniformComponent(np.full(record_dim, lo), np.full(record_dim, hi))
        for lo, hi in intervals
    ]
    if proportions is None:
        proportions = np.full(n_components, 1.0 / n_components)
    return MixtureSpec(comps, proportions)


def gaussian_mixture(n_components, record_dim=1, sigma=0.01, proportions=None):
    """Clamped isotropic Gaussians centered on the [0,1]^d diagonal."""
    centers = np.linspace(0.1, 0.9, n_components)
    comps = [GaussianComponent(np.full(record_dim, c), sigma) for c in centers]
    if proportions is None:
        proportions = np.full(n_components, 1.0 / n_components)
    return MixtureSpec(comps, proportions)


@dataclass
class LabeledDataset:
    """Fixed-width records in [0,1] with optional ground-truth labels."""

    records: np.ndarray
    labels: np.ndarray = None
    source: str = "synthetic"

    def __post_init__(self):
        rec = np.ascontiguousarray(self.records, dtype=np.float64)
        if rec.ndim != 2 or rec.shape[0] < 1:
            raise ValueError("records must be a non-empty (n, record_dim) matrix")
        if rec.min() < 0.0 or rec.max() > 1.0:
            raise ValueError("record values must lie in [0,1]")
        self.records = rec
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (rec.shape[0],):
                raise ValueError("need one label per record")
            self.labels = lab

    def __len__(self):
        return self.records.shape[0]

    @property
    def record_dim(self):
        return self.records.shape[1]


def generate_mixture(spec, n, rng):
    """Sample a labeled dataset from the mixture; label = component id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.require_separation:
        spec.check_separation()
    labels = rng.choice(spec.n_components, size=n, p=spec.proportions)
    records = np.empty((n, spec.record_dim))
    for m in range(spec.n_components):
        rows = np.flatnonzero(labels == m)
        if rows.size:
            records[rows] = spec.components[m].sample(rows.size, rng)
    return LabeledDataset(records, labels, source="synthetic")


def component_membership(records, spec):
    """Component index per record: containing support, else nearest center."""
    x = np.atleast_2d(np.asarray(records, dtype=np.float64))
    owner = np.full(x.shape[0], -1, dtype=np.int64)
    for m, comp in enumerate(spec.components):
        inside = comp.contains(x) & (owner < 0)
        owner[inside] = m
    missing = owner < 0
    if missing.any():
        centers = np.stack([c.center() for c in spec.components])
        gaps = np.linalg.norm(x[missing, None, :] - centers[None], axis=2)
        owner[missing] = np.argmin(gaps, axis=1)
    return owner


def packet_value(record):
    """Scalar projection of one record: mean of its entries."""
    return float(np.mean(np.asarray(record, dtype=np.float64)))


def packet_values(records):
    """Per-row packet values for a record matrix."""
    return np.atleast_2d(np.asarray(records, dtype=np.float64)).mean(axis=1)


# ---------------------------------------------------------------------------
# File formats


def _quantize(records):
    return np.rint(np.asarray(records, dtype=np.float64) * 255.0).astype(np.uint8)


def write_fsgd(path, dataset):
    """Write a dataset as an FSGD container (records quantized to bytes)."""
    raw = _quantize(dataset.records)
    n, dim = raw.shape
    flags = 1 if dataset.labels is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FSGD_MAGIC, FSGD_VERSION, dim, n, flags))
        fh.write(raw.tobytes())
        if flags:
            labels = np.asarray(dataset.labels)
            if labels.min() < 0 or labels.max() > 0xFFFF:
                raise ValueError("labels must fit in u16")
            fh.write(labels.astype("<u2").tobytes())
    return path


def write_raw_payloads(path, payloads):
    """Write variable-length payloads in the raw length-prefixed format."""
    with open(path, "wb") as fh:
        for p in payloads:
            blob = bytes(p)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
    return path


def _fit_width(row_bytes, record_dim):
    out = np.zeros(record_dim, dtype=np.uint8)
    take = min(len(row_bytes), record_dim)
    out[:take] = np.frombuffer(row_bytes[:take], dtype=np.uint8)
    return out


def _read_fsgd(blob, record_dim):
    if len(blob) < _HEADER.size:
        raise FormatError(len(blob), "truncated FSGD header")
    magic, version, dim, n, flags = _HEADER.unpack_from(blob, 0)
    if version != FSGD_VERSION:
        raise FormatError(4, f"unsupported FSGD version {version}")
    if dim < 1 or n < 1:
        raise FormatError(5, f"bad FSGD dimensions n={n} record_dim={dim}")
    offset = _HEADER.size
    body = n * dim
    if len(blob) < offset + body:
        raise FormatError(len(blob), f"truncated records (expected {body} bytes)")
    raw = np.frombuffer(blob, dtype=np.uint8, count=body, offset=offset).reshape(n, dim)
    offset += body
    labels = None
    if flags & 1:
        need = 2 * n
        if len(blob) < offset + need:
            raise FormatError(len(blob), f"truncated labels (expected {need} bytes)")
        labels = np.frombuffer(blob, dtype="<u2", count=n, offset=offset).astype(np.int64)
        offset += need
    if len(blob) != offset:
        raise FormatError(offset, f"{len(blob) - offset} trailing bytes")
    if record_dim is not None and record_dim != dim:
        raw = np.stack([_fit_width(row.tobytes(), record_dim) for row in raw])
    return raw, labels


def _read_raw_payloads(blob, record_dim):
    dim = RAW_DEFAULT_RECORD_DIM if record_dim is None else record_dim
    rows = []
    offset = 0
    while offset < len(blob):
        if offset + 4 > len(blob):
            raise FormatError(offset, "truncated payload length prefix")
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + length > len(blob):
            raise FormatError(offset, f"truncated payload (expected {length} bytes)")
        rows.append(_fit_width(blob[offset:offset + length], dim))
        offset += length
    if not rows:
        raise FormatError(0, "no payload records in file")
    return np.stack(rows), None


def ingest_payloads(path, record_dim=None):
    """Load payload records from an FSGD container or a raw payload stream.

    Payloads are truncated or zero-padded to record_dim bytes and mapped
    to reals by b/255. For FSGD files record_dim defaults to the stored
    width; raw streams default to 2500.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] == FSGD_MAGIC:
        raw, labels = _read_fsgd(blob, record_dim)
    else:
        raw, labels = _read_raw_payloads(blob, record_dim)
    return LabeledDataset(raw.astype(np.float64) / 255.0, labels, source="ingested")


# ---------------------------------------------------------------------------
# Site partitioning and batching


@dataclass
class PartitionPlan:
    """How a dataset is split across sites.

    iid mode deals records out uniformly into equal-size shares;
    by-component mode restricts each site to the labels in its
    allow-list, modeling heterogeneous service mixes across sites.
    """

    mode: str = "iid"
    site_count: int = 1
    allow_lists: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("iid", "by-component"):
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if self.site_count < 1:
            raise ValueError("site_count must be >= 1")
        if self.mode == "by-component" and len(self.allow_lists) != self.site_count:
            raise ValueError("by-component mode needs one allow-list per site")


def leave_one_out_plan(site_count, n_components):
    """Each site holds every component except one, cycling through them."""
    lists = []
    for d in range(site_count):
        drop = d % n_components
        lists.append([m for m in range(n_components) if m != drop])
    return PartitionPlan("by-component", site_count, lists)


def partition(dataset, plan, rng):
    """Split a dataset into one LabeledDataset per site."""
    n = len(dataset)
    if plan.mode == "iid":
        order = rng.permutation(n)
        shares = np.array_split(order, plan.site_count)
    else:
        if dataset.labels is None:
            raise ValueError("by-component partitioning requires labels")
        shares = [[] for _ in range(plan.site_count)]
        for label in np.unique(dataset.labels):
            takers = [d for d, allowed in enumerate(plan.allow_lists) if label in allowed]
            if not takers:
                raise ValueError(f"label {label} is in no site's allow-list")
            rows = rng.permutation(np.flatnonzero(dataset.labels == label))
            for i, chunk in enumerate(np.array_split(rows, len(takers))):
                shares[takers[i]].extend(chunk.tolist())
        shares = [np.array(sorted(s), dtype=np.int64) for s in shares]
    out = []
    for d, rows in enumerate(shares):
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            raise ValueError(f"site {d} received no records")
        labels = None if dataset.labels is None else dataset.labels[rows]
        out.append(LabeledDataset(dataset.records[rows], labels, source=dataset.source))
    return out


def sample_minibatch(dataset, batch_size, rng):
    """Uniform with-replacement mini-batch of record rows."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(dataset) == 0:
        raise ValueError("cannot sample from an empty dataset")
    rows = rng.integers(0, len(dataset), size=batch_size)
    return dataset.records[rows]

"""Datasets and non-iid client partitioning.

The partitioner assigns client ``i`` to class group ``i mod L``. Each sample of
class ``c`` goes, with probability ``knob``, to a uniformly random client of
group ``c`` and otherwise to a uniformly random client of the whole pool. At
``knob = 0`` every shard is an iid draw; at ``knob = 1`` every shard holds a
single class.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IntegrityError, ParseError, PartitionError
from .seeding import rng as make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    label_mapping: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ConfigError("features must be a 2-D matrix")
        if y.ndim != 1 or len(y) != len(X):
            raise ConfigError(f"label count {len(y)} does not match row count {len(X)}")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if len(y) and (y.min() < 0 or y.max() >= self.num_classes):
            raise ConfigError(f"labels must lie in [0, {self.num_classes})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def check_all_classes(self) -> None:
        missing = np.flatnonzero(np.bincount(self.labels, minlength=self.num_classes) == 0)
        if len(missing):
            raise ConfigError(f"classes {missing.tolist()} have no samples")

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes, dict(self.label_mapping))


@dataclass(frozen=True)
class ClientShard:
    client_id: int
    sample_indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.sample_indices)


@dataclass(frozen=True)
class PartitionSpec:
    num_clients: int
    knob: float
    seed: int = 0
    allow_empty: bool = False

    def __post_init__(self):
        if self.num_clients < 1:
            raise ConfigError("num_clients must be >= 1")
        if not 0.0 <= self.knob <= 1.0:
            raise ConfigError(f"knob must be in [0, 1], got {self.knob}")


def generate_synthetic(
    num_samples: int,
    num_classes: int,
    feature_dim: int,
    class_separation: float,
    seed: int,
) -> LabeledDataset:
    """Balanced Gaussian mixture with one isotropic unit-variance blob per class.

    Class means are standard-normal draws scaled by ``class_separation``, so
    pairwise mean distances scale linearly with it.
    """
    if num_classes < 2 or num_samples < num_classes:
        raise ConfigError("need num_samples >= num_classes >= 2")
    if feature_dim < 1:
        raise ConfigError("feature_dim must be >= 1")
    if not class_separation > 0:
        raise ConfigError("class_separation must be > 0")
    gen = make_rng(seed, "synthetic")
    means = class_separation * gen.standard_normal((num_classes, feature_dim))
    base, extra = divmod(num_samples, num_classes)
    counts = np.full(num_classes, base)
    counts[:extra] += 1
    labels = np.repeat(np.arange(num_classes), counts)
    labels = labels[gen.permutation(num_samples)]
    features = means[labels] + gen.standard_normal((num_samples, feature_dim))
    return LabeledDataset(features, labels, num_classes)


def load_csv_dataset(path, header: bool = False) -> LabeledDataset:
    """Read ``f1,...,fd,label`` rows. Labels are remapped to 0..L-1 in sorted order."""
    rows: list[list[float]] = []
    raw_labels: list[int] = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ParseError("expected at least one feature and a label", lineno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"expected {width} columns, got {len(row)}", lineno)
            try:
                feats = [float(cell) for cell in row[:-1]]
            except ValueError as exc:
                raise ParseError(f"non-numeric feature: {exc}", lineno) from None
            try:
                lab = float(row[-1])
            except ValueError:
                raise ParseError(f"non-numeric label {row[-1]!r}", lineno) from None
            if not lab.is_integer():
                raise ParseError(f"label {row[-1]!r} is not an integer", lineno)
            rows.append(feats)
            raw_labels.append(int(lab))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    uniq = sorted(set(raw_labels))
    if len(uniq) < 2:
        raise ParseError(f"{path}: need at least two distinct labels")
    mapping = {orig: new for new, orig in enumerate(uniq)}
    if uniq != list(range(len(uniq))):
        logger.warning("%s: labels remapped to 0-based contiguous ids: %s", path, mapping)
    labels = np.array([mapping[v] for v in raw_labels], dtype=np.int64)
    return LabeledDataset(np.array(rows, dtype=np.float64), labels, len(uniq), mapping)


def train_test_split(dataset: LabeledDataset, test_fraction: float, seed: int):
    """Random held-out split; returns ``(train, test)``."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    perm = make_rng(seed, "split").permutation(len(dataset))
    n_test = int(round(test_fraction * len(dataset)))
    if n_test == 0 or n_test == len(dataset):
        raise ConfigError("dataset too small for the requested split")
    return dataset.subset(np.sort(perm[n_test:])), dataset.subset(np.sort(perm[:n_test]))


def partition_non_iid(dataset: LabeledDataset, spec: PartitionSpec) -> list[ClientShard]:
    n_clients, L = spec.num_clients, dataset.num_classes
    if len(dataset) == 0:
        raise PartitionError("cannot partition an empty dataset")
    if spec.knob == 1.0 and n_clients < L:
        raise ConfigError(
            f"knob=1 needs at least one client per class ({n_clients} clients < {L} classes)"
        )
    gen = make_rng(spec.seed, "partition")
    y = dataset.labels
    n = len(y)
    # group c holds clients c, c+L, c+2L, ...
    group_size = np.array([len(range(c, n_clients, L)) for c in range(L)])
    direct = gen.random(n) < spec.knob
    u_group = gen.random(n)
    u_pool = gen.integers(0, n_clients, size=n)
    g = group_size[y]
    direct &= g > 0  # a class with no dedicated client always falls back to the pool
    in_group = y + L * np.floor(u_group * np.maximum(g, 1)).astype(np.int64)
    owner = np.where(direct, in_group, u_pool)

    order = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[order], np.arange(n_clients + 1))
    shards = [
        ClientShard(cid, order[bounds[cid] : bounds[cid + 1]].copy()) for cid in range(n_clients)
    ]
    empty = [s.client_id for s in shards if s.size == 0]
    if empty and not spec.allow_empty:
        raise PartitionError(
            f"{len(empty)} client(s) received no samples (first: {empty[:5]}); "
            "use more samples or fewer clients, or allow empty shards"
        )
    return shards


def class_histogram(shard: ClientShard, dataset: LabeledDataset) -> np.ndarray:
    idx = np.asarray(shard.sample_indices, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= len(dataset)):
        raise IntegrityError(f"client {shard.client_id}: sample index out of range")
    return np.bincount(dataset.labels[idx], minlength=dataset.num_classes)


def partition_report(shards: list[ClientShard], dataset: LabeledDataset, spec: PartitionSpec | None = None) -> dict:
    report = {
        "num_samples": len(dataset),
        "num_classes": dataset.num_classes,
        "clients": [
            {
                "client_id": s.client_id,
                "size": s.size,
                "class_histogram": class_histogram(s, dataset).tolist(),
            }
            for s in shards
        ],
    }
    if spec is not None:
        report["spec"] = {"num_clients": spec.num_clients, "knob": spec.knob, "seed": spec.seed}
    return report


def write_partition_report(path, shards, dataset, spec=None) -> None:
    Path(path).write_text(json.dumps(partition_report(shards, dataset, spec), indent=2) + "\n")

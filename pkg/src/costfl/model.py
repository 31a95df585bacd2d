"""Small classifiers trained by local minibatch SGD, plus FedAvg and evaluation."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import AggregationError, ConfigError, IntegrityError, TrainingError
from .partition import ClientShard, LabeledDataset
from .seeding import rng as make_rng

MODEL_KINDS = ("softmax_regression", "mlp_one_hidden")


@dataclass(frozen=True)
class ModelParams:
    values: np.ndarray
    layout: tuple  # ((name, shape), ...)
    version: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        layout = tuple((str(n), tuple(int(d) for d in s)) for n, s in self.layout)
        expected = sum(int(np.prod(s)) for _, s in layout)
        if v.ndim != 1 or len(v) != expected:
            raise IntegrityError(f"parameter vector has {v.size} values, layout needs {expected}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "layout", layout)

    @property
    def num_classes(self) -> int:
        return self.layout[-1][1][0]

    @property
    def hidden(self) -> int:
        return 0 if len(self.layout) == 2 else self.layout[1][1][0]

    @property
    def feature_dim(self) -> int:
        return self.layout[0][1][0]

    def tensors(self) -> dict[str, np.ndarray]:
        out, o = {}, 0
        for name, shape in self.layout:
            size = int(np.prod(shape))
            out[name] = self.values[o : o + size].reshape(shape)
            o += size
        return out


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 0.05
    batch_size: int = 20
    local_epochs: int = 1
    model_kind: str = "softmax_regression"
    hidden: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise ConfigError("batch_size and local_epochs must be >= 1")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}")
        if self.model_kind == "mlp_one_hidden" and self.hidden < 1:
            raise ConfigError("mlp_one_hidden needs hidden >= 1")

    @property
    def hidden_units(self) -> int:
        return self.hidden if self.model_kind == "mlp_one_hidden" else 0


@dataclass(frozen=True)
class LocalTrainResult:
    client_id: int
    delta: np.ndarray
    per_sample_losses: np.ndarray
    num_samples: int


def _layout(model_kind: str, feature_dim: int, num_classes: int, hidden: int = 0):
    if model_kind == "softmax_regression":
        return (("W", (feature_dim, num_classes)), ("b", (num_classes,)))
    if model_kind == "mlp_one_hidden":
        return (
            ("W1", (feature_dim, hidden)),
            ("b1", (hidden,)),
            ("W2", (hidden, num_classes)),
            ("b2", (num_classes,)),
        )
    raise ConfigError(f"unknown model kind {model_kind!r}")


def init_params(model_kind: str, feature_dim: int, num_classes: int, seed: int, hidden: int = 0) -> ModelParams:
    """Fan-in scaled uniform weights, zero biases."""
    if feature_dim < 1 or num_classes < 2:
        raise ConfigError("feature_dim must be >= 1 and num_classes >= 2")
    if model_kind == "mlp_one_hidden" and hidden < 1:
        raise ConfigError("mlp_one_hidden needs hidden >= 1")
    layout = _layout(model_kind, feature_dim, num_classes, hidden)
    gen = make_rng(seed, "init")
    chunks = []
    for name, shape in layout:
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            chunks.append(gen.uniform(-bound, bound, size=shape).ravel())
        else:
            chunks.append(np.zeros(shape))
    return ModelParams(np.concatenate(chunks), layout, 0)


def _check_dims(params: ModelParams, dataset: LabeledDataset) -> None:
    if params.feature_dim != dataset.feature_dim or params.num_classes != dataset.num_classes:
        raise IntegrityError(
            f"model expects d={params.feature_dim}, L={params.num_classes}; "
            f"data has d={dataset.feature_dim}, L={dataset.num_classes}"
        )


def local_train(
    params: ModelParams,
    shard: ClientShard,
    dataset: LabeledDataset,
    hyper: HyperParams,
    seed: int,
    round_idx: int | None = None,
) -> LocalTrainResult:
    """Run local SGD from ``params`` and report the delta and post-training per-sample losses."""
    if shard.size == 0:
        raise TrainingError("empty shard", round_idx, shard.client_id)
    _check_dims(params, dataset)
    if params.hidden != hyper.hidden_units:
        raise IntegrityError("parameter layout does not match model_kind")
    idx = np.asarray(shard.sample_indices, dtype=np.int64)
    X = dataset.features[idx]
    y = dataset.labels[idx]
    gen = make_rng(seed, "shuffle")
    order = np.stack([gen.permutation(len(idx)) for _ in range(hyper.local_epochs)])
    L, h = params.num_classes, params.hidden
    with np.errstate(over="ignore", invalid="ignore"):
        new = kernels.sgd_epochs(params.values, X, y, order, float(hyper.learning_rate), int(hyper.batch_size), L, h)
        losses, _ = kernels.forward(new, X, y, L, h)
    if not (np.all(np.isfinite(new)) and np.all(np.isfinite(losses))):
        raise TrainingError("local training diverged (non-finite values)", round_idx, shard.client_id)
    return LocalTrainResult(shard.client_id, new - params.values, np.maximum(losses, 0.0), len(idx))


def fed_avg(base: ModelParams, results: list[LocalTrainResult]) -> ModelParams:
    """Sample-weighted average of client deltas applied to ``base``.

    Results are reduced in ascending client id order whatever order they arrive in.
    """
    if not results:
        raise AggregationError("no client results to aggregate")
    total = sum(r.num_samples for r in results)
    if total <= 0:
        raise AggregationError("total sample count is zero")
    acc = np.zeros_like(base.values)
    for r in sorted(results, key=lambda r: r.client_id):
        if r.delta.shape != base.values.shape:
            raise AggregationError(
                f"client {r.client_id}: delta length {r.delta.size} != {base.values.size}"
            )
        acc += (r.num_samples / total) * r.delta
    new = base.values + acc
    if not np.all(np.isfinite(new)):
        raise AggregationError("aggregated parameters are not finite")
    return replace(base, values=new, version=base.version + 1)


def evaluate(params: ModelParams, dataset: LabeledDataset) -> tuple[float, float]:
    """Return ``(accuracy, mean cross-entropy)``; argmax ties go to the lowest class."""
    _check_dims(params, dataset)
    losses, logits = kernels.forward(params.values, dataset.features, dataset.labels, params.num_classes, params.hidden)
    acc = float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
    return acc, float(np.mean(losses))


_MAGIC = b"COSTFLCK"


def save_checkpoint(path, params: ModelParams) -> None:
    """Binary checkpoint: magic, u32 header length, JSON header, little-endian f64 values."""
    header = json.dumps(
        {"layout": [[n, list(s)] for n, s in params.layout], "version": params.version}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(params.values.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise IntegrityError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    values = np.frombuffer(data[12 + hlen :], dtype="<f8").astype(np.float64)
    return ModelParams(values, tuple((n, tuple(s)) for n, s in header["layout"]), header["version"])

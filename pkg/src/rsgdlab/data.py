"""Datasets: synthetic teacher-network regression, MNIST IDX files, batching.

Inputs and targets are stored row-per-example ((N, n_in) / (N, n_out) float64
arrays); the network consumes transposed slices (examples as columns).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import RngStream
from .network import sigmoid

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    """Base for malformed IDX input files."""


class IdxMagicError(IdxError):
    """File does not start with the expected IDX magic number."""


class IdxTruncatedError(IdxError):
    """File ends before the declared payload is complete."""


class IdxCountMismatchError(IdxError):
    """Image file and label file declare different example counts."""


@dataclass
class LabeledDataset:
    inputs: np.ndarray            # (N, n_in)
    targets: np.ndarray           # (N, n_out)
    kind: str = "regression"      # regression | classification
    raw_labels: np.ndarray | None = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have the same example count")
        if self.kind == "classification" and self.raw_labels is None:
            raise ValueError("classification datasets need raw_labels")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_in(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_out(self) -> int:
        return self.targets.shape[1]

    def take(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            inputs=self.inputs[indices],
            targets=self.targets[indices],
            kind=self.kind,
            raw_labels=None if self.raw_labels is None else self.raw_labels[indices],
        )


def generate_teacher_dataset(n_in: int, n_out: int, count: int,
                             rng: RngStream) -> tuple[LabeledDataset, LabeledDataset]:
    """Random teacher map y = sigmoid(W_g v); first half train, second half test.

    The teacher matrix is drawn once, then all inputs; both i.i.d. standard
    normal.  The teacher has no bias term.
    """
    if count % 2 != 0:
        raise ValueError(f"count must be even (train/test split in half), got {count}")
    if n_in < 1 or n_out < 1:
        raise ValueError("dimensions must be >= 1")
    w_gen = rng.normal(n_out, n_in)
    inputs = rng.normal(count, n_in)
    targets = sigmoid(inputs @ w_gen.T)
    half = count // 2
    train = LabeledDataset(inputs=inputs[:half], targets=targets[:half])
    test = LabeledDataset(inputs=inputs[half:], targets=targets[half:])
    return train, test


def one_hot(labels: np.ndarray, n_classes: int = 10) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _read_be_u32(f, path) -> int:
    raw = f.read(4)
    if len(raw) != 4:
        raise IdxTruncatedError(f"{path}: truncated header")
    return struct.unpack(">I", raw)[0]


def load_mnist_idx(images_path, labels_path) -> LabeledDataset:
    """Parse the big-endian IDX pair; pixels scaled to [0,1], labels one-hot."""
    with open(images_path, "rb") as f:
        magic = _read_be_u32(f, images_path)
        if magic != IDX_IMAGES_MAGIC:
            raise IdxMagicError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        count = _read_be_u32(f, images_path)
        rows = _read_be_u32(f, images_path)
        cols = _read_be_u32(f, images_path)
        payload = f.read(count * rows * cols)
        if len(payload) != count * rows * cols:
            raise IdxTruncatedError(
                f"{images_path}: expected {count * rows * cols} pixel bytes, got {len(payload)}")
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as f:
        magic = _read_be_u32(f, labels_path)
        if magic != IDX_LABELS_MAGIC:
            raise IdxMagicError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        label_count = _read_be_u32(f, labels_path)
        raw = f.read(label_count)
        if len(raw) != label_count:
            raise IdxTruncatedError(
                f"{labels_path}: expected {label_count} label bytes, got {len(raw)}")
        labels = np.frombuffer(raw, dtype=np.uint8)
    if label_count != count:
        raise IdxCountMismatchError(
            f"{images_path} has {count} images but {labels_path} has {label_count} labels")
    return LabeledDataset(
        inputs=pixels.astype(np.float64) / 255.0,
        targets=one_hot(labels.astype(np.int64)),
        kind="classification",
        raw_labels=labels.astype(np.int64),
    )


def subsample(dataset: LabeledDataset, train_count: int, test_count: int,
              rng: RngStream) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint uniform train/test subsets, deterministic per stream."""
    total = train_count + test_count
    if total > len(dataset):
        raise ValueError(
            f"need {total} examples ({train_count} train + {test_count} test), "
            f"dataset has {len(dataset)}")
    picked = rng.choice(len(dataset), size=total, replace=False)
    return dataset.take(picked[:train_count]), dataset.take(picked[train_count:])


class BatchPlan:
    """Deterministic mini-batch iteration with per-epoch reshuffling."""

    def __init__(self, n_examples: int, batch_size: int, rng: RngStream):
        if batch_size < 1 or n_examples % batch_size != 0:
            raise ValueError(
                f"batch size {batch_size} must divide example count {n_examples}")
        self.n_examples = n_examples
        self.batch_size = batch_size
        self.rng = rng

    @property
    def batches_per_epoch(self) -> int:
        return self.n_examples // self.batch_size

    def epoch_batches(self):
        """Yield index arrays for one epoch; reshuffles from the stream."""
        order = self.rng.permutation(self.n_examples)
        for start in range(0, self.n_examples, self.batch_size):
            yield order[start:start + self.batch_size]


# --- flat binary dataset container ---------------------------------------

_DS_MAGIC = b"RSGD-DS"


def save_dataset(path, dataset: LabeledDataset) -> None:
    with open(path, "wb") as f:
        f.write(_DS_MAGIC)
        f.write(struct.pack("<III", dataset.n_in, dataset.n_out, len(dataset)))
        f.write(np.ascontiguousarray(dataset.inputs, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(dataset.targets, dtype="<f8").tobytes())


def load_dataset(path) -> LabeledDataset:
    with open(path, "rb") as f:
        if f.read(len(_DS_MAGIC)) != _DS_MAGIC:
            raise ValueError(f"{path}: not a dataset file (bad magic)")
        n_in, n_out, count = struct.unpack("<III", f.read(12))
        inputs = np.frombuffer(f.read(8 * count * n_in), dtype="<f8")
        targets = np.frombuffer(f.read(8 * count * n_out), dtype="<f8")
        if inputs.size != count * n_in or targets.size != count * n_out:
            raise ValueError(f"{path}: truncated dataset payload")
        return LabeledDataset(
            inputs=inputs.reshape(count, n_in).copy(),
            targets=targets.reshape(count, n_out).copy(),
        )

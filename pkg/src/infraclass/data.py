"""Dataset ingestion, seeded splitting, batching, and standardization.

Dataset text format (UTF-8, one signal per line)::

    <label>,<v1>,...,<vL>

Labels are integers in [0, 8). Floats are written with 9 significant
digits, which round-trips exactly: loading, re-writing, and re-loading a
file reproduces it byte for byte. Lines starting with '#' are ignored,
and a single header line is tolerated (detected by a non-numeric first
field).

Splitting and shuffling are portable across implementations because the
generator is pinned to the bit level. All randomness comes from splitmix64:

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z XOR (z >> 31)

Permutations use the descending Fisher-Yates walk: for i = n-1 .. 1,
draw j = output % (i + 1) and swap elements i and j. The validation set
is the first round(valid_frac * N) entries of the permuted index list,
where round(x) = floor(x + 0.5). Epoch shuffles use a fresh generator
seeded with the (epoch+1)-th output of a splitmix64 stream seeded with
the run seed, so epochs differ but a rerun reproduces every batch order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .tensor import Tensor

__all__ = ["N_CLASSES", "SignalDataset", "SplitIndices", "Batch", "SplitMix64",
           "permutation", "split", "batches", "standardize", "load_dataset",
           "save_dataset", "points_per_signal"]

N_CLASSES = 8

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """The 64-bit mixing generator documented in the module docstring."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def permutation(n: int, seed: int) -> list:
    """Fisher-Yates permutation of range(n) driven by splitmix64."""
    rng = SplitMix64(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.next() % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass
class SignalDataset:
    signals: np.ndarray   # [N, L] float64, finite
    labels: np.ndarray    # [N] int64 in [0, N_CLASSES)
    source: str = "synthetic"

    def __post_init__(self):
        self.signals = np.asarray(self.signals, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.signals.ndim != 2:
            raise DataError(f"signals must be [N, L], got {self.signals.shape}")
        if self.labels.shape != (self.signals.shape[0],):
            raise DataError(
                f"labels shape {self.labels.shape} does not match "
                f"{self.signals.shape[0]} signals")
        if not np.isfinite(self.signals).all():
            raise DataError("signals contain non-finite values")
        if self.labels.size and not (
                (self.labels >= 0) & (self.labels < N_CLASSES)).all():
            raise DataError(f"labels must lie in [0, {N_CLASSES})")

    def __len__(self) -> int:
        return self.signals.shape[0]

    @property
    def length(self) -> int:
        return self.signals.shape[1]


@dataclass(frozen=True)
class SplitIndices:
    train: tuple
    valid: tuple
    seed: int


@dataclass
class Batch:
    inputs: Tensor        # [B, 1, L] signals or [B, 3, S, L] images
    labels: np.ndarray    # [B] int64

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def split(ds, valid_frac: float = 0.2, seed: int = 0) -> SplitIndices:
    """Partition dataset indices into train/valid via a seeded permutation.

    The first round(valid_frac * N) entries of the permutation become the
    validation set, the rest the training set, both kept in drawn order.
    """
    if not 0.0 < valid_frac < 1.0:
        raise DataError(f"valid_frac must be in (0, 1), got {valid_frac}")
    n = len(ds) if not isinstance(ds, int) else ds
    perm = permutation(n, seed)
    n_valid = int(math.floor(valid_frac * n + 0.5))
    return SplitIndices(train=tuple(perm[n_valid:]), valid=tuple(perm[:n_valid]),
                        seed=seed)


def _epoch_seed(seed: int, epoch: int) -> int:
    rng = SplitMix64(seed)
    out = rng.next()
    for _ in range(epoch):
        out = rng.next()
    return out


def batches(inputs: np.ndarray, labels: np.ndarray, indices, batch_size: int = 64,
            shuffle: bool = False, seed: int = 0, epoch: int = 0,
            dtype=np.float32):
    """Yield Batch objects over the given indices.

    ``inputs`` is [N, L] (a channel axis is inserted) or [N, C, ...].
    With ``shuffle`` the index order is re-permuted per (seed, epoch);
    validation iteration passes shuffle=False and is always in-order.
    """
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    order = list(indices)
    if shuffle:
        perm = permutation(len(order), _epoch_seed(seed, epoch))
        order = [order[i] for i in perm]
    labels = np.asarray(labels, dtype=np.int64)
    for start in range(0, len(order), batch_size):
        sel = order[start:start + batch_size]
        x = np.asarray(inputs[sel], dtype=dtype)
        if x.ndim == 2:
            x = x[:, None, :]
        yield Batch(inputs=Tensor(x), labels=labels[sel])


def standardize(batch: Batch) -> Batch:
    """Shift/scale a batch by the scalar mean and population standard
    deviation of every data point it contains; a batch with spread below
    1e-12 standardizes to all zeros."""
    arr = batch.inputs.data
    if arr.size == 0:
        raise DataError("cannot standardize an empty batch")
    mu = float(arr.mean(dtype=np.float64))
    sigma = float(arr.std(dtype=np.float64))
    if sigma < 1e-12:
        out = np.zeros_like(arr)
    else:
        out = ((arr - mu) / sigma).astype(arr.dtype)
    return Batch(inputs=Tensor(out), labels=batch.labels)


def points_per_signal(batch_shape) -> int:
    """Spatial data points one signal contributes: L for [B,C,L] signal
    batches, H*W for [B,C,H,W] image batches (channels not counted)."""
    spatial = batch_shape[2:]
    n = 1
    for d in spatial:
        n *= d
    return n


def _parse_float(token: str, line_no: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise DataError(f"line {line_no}: could not parse value {token!r}") from None
    if not math.isfinite(v):
        raise DataError(f"line {line_no}: non-finite value {token!r}")
    return v


def load_dataset(path) -> SignalDataset:
    """Read the text dataset format; errors name the offending line."""
    signals = []
    labels = []
    length = None
    seen_content = False
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if not seen_content:
                seen_content = True
                try:
                    float(fields[0])
                except ValueError:
                    continue   # header line
            try:
                label = int(fields[0])
            except ValueError:
                raise DataError(
                    f"line {line_no}: label {fields[0]!r} is not an integer"
                ) from None
            if not 0 <= label < N_CLASSES:
                raise DataError(
                    f"line {line_no}: label {label} outside [0, {N_CLASSES})")
            values = [_parse_float(tok, line_no) for tok in fields[1:]]
            if length is None:
                length = len(values)
                if length == 0:
                    raise DataError(f"line {line_no}: row has no values")
            elif len(values) != length:
                raise DataError(
                    f"line {line_no}: expected {length} values, got {len(values)}")
            labels.append(label)
            signals.append(values)
    if not signals:
        raise DataError(f"{path}: no rows")
    return SignalDataset(signals=np.array(signals, dtype=np.float64),
                         labels=np.array(labels, dtype=np.int64),
                         source=str(path))


def save_dataset(ds: SignalDataset, path) -> None:
    """Write the text dataset format with 9-significant-digit floats."""
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(ds.labels, ds.signals):
            fh.write("%d,%s\n" % (label, ",".join("%.9g" % v for v in row)))

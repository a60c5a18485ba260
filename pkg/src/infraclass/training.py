"""Optimizer, learning-rate machinery, training loop, and evaluation.

The optimizer is Adam with decoupled weight decay (decay applied as a
direct shrink p <- p * (1 - lr * wd) before the moment update), beta1 0.9,
beta2 0.99, eps 1e-5 added outside the square root, and bias-corrected
moments. Three learning-rate policies drive it:

  fixed(lr)                constant rate for every parameter group
  one_cycle(lr_max)        cosine warmup from lr_max/25 to lr_max over the
                           first quarter of steps, cosine anneal to
                           lr_max/1e5 over the rest, same rate everywhere
  slice(lr_min, lr_max)    constant per-group rates, geometrically
                           interpolated from lr_min (group closest to the
                           input) to lr_max (the head)

Validation runs after every epoch in eval mode and never touches
parameters; the state with the best validation accuracy is retained and
restored into the returned model. Histories serialize to a canonical
JSON string so identical runs compare byte for byte.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import ops
from .data import Batch, batches, points_per_signal, standardize
from .errors import ConfigError, DataError, NumericError
from .tensor import GradTape, Tensor, backward

__all__ = ["FixedLr", "OneCyclePolicy", "SlicePolicy", "TrainConfig",
           "OneCycleSchedule", "one_cycle_lr", "discriminative_lrs",
           "AdamState", "adam_step", "LrFindResult", "lr_find",
           "EvalReport", "evaluate", "TrainResult", "train", "history_json"]


# ---------------------------------------------------------------------------
# learning-rate policies

@dataclass(frozen=True)
class FixedLr:
    lr: float

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")


@dataclass(frozen=True)
class OneCyclePolicy:
    lr_max: float

    def validate(self) -> None:
        if self.lr_max <= 0:
            raise ConfigError(f"lr_max must be > 0, got {self.lr_max}")


@dataclass(frozen=True)
class SlicePolicy:
    lr_min: float
    lr_max: float

    def validate(self) -> None:
        if self.lr_min <= 0 or self.lr_max <= 0:
            raise ConfigError(
                f"slice rates must be > 0, got ({self.lr_min}, {self.lr_max})")
        if self.lr_min > self.lr_max:
            raise ConfigError(
                f"lr_min must be <= lr_max, got ({self.lr_min}, {self.lr_max})")


@dataclass(frozen=True)
class TrainConfig:
    approach: str = "direct"            # direct | wavelet
    epochs: int = 20
    batch_size: int = 64
    lr_policy: object = FixedLr(1e-3)
    seed: int = 0
    weight_decay: float = 0.01
    precision: str = "float32"

    def validate(self) -> None:
        if self.approach not in ("direct", "wavelet"):
            raise ConfigError(f"approach must be direct|wavelet, got "
                              f"{self.approach!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got "
                              f"{self.weight_decay}")
        if self.precision not in ("float32", "float64"):
            raise ConfigError(f"precision must be float32|float64, got "
                              f"{self.precision!r}")
        self.lr_policy.validate()

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64


# ---------------------------------------------------------------------------
# schedules

@dataclass(frozen=True)
class OneCycleSchedule:
    lr_max: float
    total_steps: int
    pct_start: float = 0.25
    div: float = 25.0
    div_final: float = 1e5

    def validate(self) -> None:
        if self.lr_max <= 0:
            raise ConfigError(f"lr_max must be > 0, got {self.lr_max}")
        if self.total_steps < 4:
            raise ConfigError(
                f"total_steps must be >= 4, got {self.total_steps}")
        if not 0.0 < self.pct_start < 1.0:
            raise ConfigError(f"pct_start must be in (0,1), got {self.pct_start}")

    @property
    def peak_step(self) -> int:
        return int(math.floor(self.pct_start * self.total_steps))


def one_cycle_lr(sched: OneCycleSchedule, step: int) -> float:
    """Learning rate at an integer step of the one-cycle schedule.

    Cosine rise from lr_max/div to lr_max over steps [0, peak], cosine
    fall from lr_max to lr_max/div_final over [peak, total]. The three
    anchors (start, peak, end) are returned exactly.
    """
    sched.validate()
    if not 0 <= step <= sched.total_steps:
        raise ConfigError(
            f"step {step} outside [0, {sched.total_steps}]")
    peak = sched.peak_step
    lr_start = sched.lr_max / sched.div
    lr_end = sched.lr_max / sched.div_final
    if step == 0:
        return lr_start
    if step == peak:
        return sched.lr_max
    if step == sched.total_steps:
        return lr_end
    if step < peak:
        frac = 0.5 * (1.0 - math.cos(math.pi * step / peak))
        return lr_start + (sched.lr_max - lr_start) * frac
    frac = 0.5 * (1.0 + math.cos(math.pi * (step - peak)
                                 / (sched.total_steps - peak)))
    return lr_end + (sched.lr_max - lr_end) * frac


def discriminative_lrs(lr_min: float, lr_max: float, n_groups: int) -> list:
    """Geometric per-group rates from lr_min (input end) to lr_max (head).

    A single group gets lr_max.
    """
    if n_groups < 1:
        raise ConfigError(f"n_groups must be >= 1, got {n_groups}")
    if lr_min <= 0 or lr_max <= 0 or lr_min > lr_max:
        raise ConfigError(
            f"need 0 < lr_min <= lr_max, got ({lr_min}, {lr_max})")
    if n_groups == 1:
        return [lr_max]
    ratio = lr_max / lr_min
    return [lr_min * ratio ** (g / (n_groups - 1)) for g in range(n_groups)]


# ---------------------------------------------------------------------------
# optimizer

class AdamState:
    """First/second moment estimates plus step counter, keyed by name."""

    def __init__(self, named_params, beta1: float = 0.9, beta2: float = 0.99,
                 eps: float = 1e-5):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in named_params}
        self.v = {name: np.zeros_like(p.data) for name, p in named_params}


def adam_step(named_params, grads: dict, state: AdamState, lr,
              weight_decay: float = 0.0) -> None:
    """One in-place Adam update.

    ``lr`` is a scalar or a dict mapping parameter name to its rate
    (discriminative slices). Decay shrinks the parameter before the
    moment update; eps sits outside the square root.
    """
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    per_name = isinstance(lr, dict)
    for name, p in named_params:
        g = grads[name]
        if g is None:
            raise NumericError(f"parameter {name} has no gradient")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {name}")
        rate = lr[name] if per_name else lr
        if weight_decay:
            p.data *= (1.0 - rate * weight_decay)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# learning-rate finder

@dataclass
class LrFindResult:
    suggestion: Optional[float]
    lrs: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    smoothed: list = field(default_factory=list)


def lr_find(model, data_batches, loss_fn: Callable, start: float = 1e-7,
            end: float = 10.0, n_iter: int = 100,
            weight_decay: float = 0.0) -> LrFindResult:
    """Geometric learning-rate sweep with loss tracking.

    ``data_batches`` is a non-empty sequence cycled as needed;
    ``loss_fn(model, batch, tape)`` returns a scalar loss Tensor. The
    loss curve is exponentially smoothed (alpha 0.98, bias-corrected)
    and the sweep aborts once the smoothed loss exceeds 4x its best.
    The suggestion is the rate at the steepest negative slope of the
    smoothed curve; model weights are restored bit-equal on exit.
    """
    if n_iter < 2:
        raise ConfigError(f"n_iter must be >= 2, got {n_iter}")
    if not 0 < start < end:
        raise ConfigError(f"need 0 < start < end, got ({start}, {end})")
    data_batches = list(data_batches)
    if not data_batches:
        raise DataError("lr_find needs at least one batch")

    snapshot = model.copy_state()
    named = [(name, p) for g in model.parameter_groups() for name, p in g.named]
    params = [p for _, p in named]
    state = AdamState(named)
    alpha = 0.98
    avg = 0.0
    best = math.inf
    result = LrFindResult(suggestion=None)
    try:
        for k in range(n_iter):
            lr_k = start * (end / start) ** (k / (n_iter - 1))
            batch = data_batches[k % len(data_batches)]
            tape = GradTape()
            loss = loss_fn(model, batch, tape)
            value = float(loss.item())
            if not math.isfinite(value):
                break
            avg = alpha * avg + (1.0 - alpha) * value
            smooth = avg / (1.0 - alpha ** (k + 1))
            result.lrs.append(lr_k)
            result.losses.append(value)
            result.smoothed.append(smooth)
            if smooth > 4.0 * best:
                break
            best = min(best, smooth)
            backward(loss, tape, params)
            adam_step(named, {n: p.grad for n, p in named}, state, lr_k,
                      weight_decay)
    finally:
        model.load_state_dict(snapshot)
        for p in params:
            p.grad = None

    if len(result.smoothed) >= 2:
        slopes = np.gradient(np.asarray(result.smoothed))
        idx = int(np.argmin(slopes))
        if slopes[idx] < 0:
            result.suggestion = result.lrs[idx]
    return result


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class EvalReport:
    accuracy: float
    loss: float
    confusion: np.ndarray          # [C, C] ints, rows true, cols predicted
    precision: np.ndarray          # [C]
    recall: np.ndarray             # [C]

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum())


def _forward_loss(model, batch: Batch, tape):
    logits = model.forward(batch.inputs, tape=tape,
                           mode="train" if tape is not None else "eval")
    loss, probs = ops.softmax_cross_entropy(logits, batch.labels, tape=tape)
    return logits, loss, probs


def evaluate(model, inputs, labels, indices, batch_size: int = 64,
             n_classes: int = 8, dtype=np.float32) -> EvalReport:
    """Accuracy, mean loss, confusion, and per-class precision/recall.

    Batches are standardized from their own contents, exactly as during
    training; the model runs in eval mode and no gradients are recorded.
    """
    indices = list(indices)
    if not indices:
        raise DataError("evaluation needs a non-empty index set")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    loss_sum = 0.0
    for batch in batches(inputs, labels, indices, batch_size, dtype=dtype):
        batch = standardize(batch)
        logits, loss, _ = _forward_loss(model, batch, tape=None)
        loss_sum += float(loss.item()) * batch.size
        pred = np.argmax(logits.data, axis=1)
        np.add.at(confusion, (batch.labels, pred), 1)
    total = confusion.sum()
    diag = np.diag(confusion).astype(np.float64)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(col > 0, diag / col, 0.0)
        recall = np.where(row > 0, diag / row, 0.0)
    return EvalReport(accuracy=float(diag.sum() / total),
                      loss=loss_sum / total,
                      confusion=confusion, precision=precision, recall=recall)


# ---------------------------------------------------------------------------
# training loop

@dataclass
class TrainResult:
    model: object
    history: list                   # one dict per epoch
    report: EvalReport              # of the retained best state
    best_epoch: int
    best_accuracy: float
    epoch_seconds: list
    n_train_batches: int
    points_per_signal: int


def _group_rates(policy, model, sched: Optional[OneCycleSchedule],
                 step: int, named) -> object:
    if isinstance(policy, FixedLr):
        return policy.lr
    if isinstance(policy, OneCyclePolicy):
        return one_cycle_lr(sched, step)
    groups = model.parameter_groups()
    rates = discriminative_lrs(policy.lr_min, policy.lr_max, len(groups))
    per_name = {}
    for rate, group in zip(rates, groups):
        for name, _ in group.named:
            per_name[name] = rate
    return per_name


def train(model, inputs, labels, split_idx, cfg: TrainConfig,
          n_classes: int = 8, log=None) -> TrainResult:
    """Run the full training loop and return the best-accuracy model.

    ``inputs`` is [N, L] signals or [N, C, H, W] images; ``split_idx``
    carries the train/valid index lists. Every batch (train and valid)
    is standardized from its own contents. Validation runs after each
    epoch in eval mode; the best-accuracy state is retained and loaded
    back into the model before returning.
    """
    cfg.validate()
    named = [(name, p) for g in model.parameter_groups() for name, p in g.named]
    params = [p for _, p in named]
    state = AdamState(named)
    n_train_batches = math.ceil(len(split_idx.train) / cfg.batch_size)
    total_steps = cfg.epochs * n_train_batches
    sched = None
    if isinstance(cfg.lr_policy, OneCyclePolicy):
        sched = OneCycleSchedule(lr_max=cfg.lr_policy.lr_max,
                                 total_steps=total_steps)
    slice_rates = None
    if isinstance(cfg.lr_policy, SlicePolicy):
        slice_rates = _group_rates(cfg.lr_policy, model, None, 0, named)

    history = []
    epoch_seconds = []
    best_accuracy = -1.0
    best_epoch = -1
    best_state = None
    ppsig = None
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        loss_sum = 0.0
        n_seen = 0
        for bi, batch in enumerate(batches(inputs, labels, split_idx.train,
                                           cfg.batch_size, shuffle=True,
                                           seed=cfg.seed, epoch=epoch - 1,
                                           dtype=cfg.dtype)):
            batch = standardize(batch)
            if ppsig is None:
                ppsig = points_per_signal(batch.inputs.shape)
            tape = GradTape()
            _, loss, _ = _forward_loss(model, batch, tape)
            value = float(loss.item())
            if not math.isfinite(value):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch} step {bi}")
            loss_sum += value * batch.size
            n_seen += batch.size
            backward(loss, tape, params)
            if slice_rates is not None:
                rates = slice_rates
            elif sched is not None:
                rates = one_cycle_lr(sched, step)
            else:
                rates = cfg.lr_policy.lr
            adam_step(named, {n: p.grad for n, p in named}, state, rates,
                      cfg.weight_decay)
            step += 1
        report = evaluate(model, inputs, labels, split_idx.valid,
                          cfg.batch_size, n_classes, dtype=cfg.dtype)
        epoch_seconds.append(time.perf_counter() - t0)
        history.append({"epoch": epoch,
                        "train_loss": loss_sum / n_seen,
                        "valid_loss": report.loss,
                        "accuracy": report.accuracy})
        if report.accuracy > best_accuracy:
            best_accuracy = report.accuracy
            best_epoch = epoch
            best_state = model.copy_state()
        if log is not None:
            log(f"epoch {epoch}/{cfg.epochs} train_loss "
                f"{history[-1]['train_loss']:.4f} valid_loss "
                f"{report.loss:.4f} accuracy {report.accuracy:.4f} "
                f"({epoch_seconds[-1]:.1f}s)")

    model.load_state_dict(best_state)
    final = evaluate(model, inputs, labels, split_idx.valid, cfg.batch_size,
                     n_classes, dtype=cfg.dtype)
    return TrainResult(model=model, history=history, report=final,
                       best_epoch=best_epoch, best_accuracy=best_accuracy,
                       epoch_seconds=epoch_seconds,
                       n_train_batches=n_train_batches,
                       points_per_signal=ppsig)


def history_json(history: list, confusion=None) -> str:
    """Canonical JSON for a training history (byte-stable across reruns)."""
    doc = {"epochs": [{"epoch": h["epoch"],
                       "train_loss": h["train_loss"],
                       "valid_loss": h["valid_loss"],
                       "accuracy": h["accuracy"]} for h in history]}
    if confusion is not None:
        doc["confusion"] = np.asarray(confusion).astype(int).tolist()
    return json.dumps(doc, separators=(",", ":"))

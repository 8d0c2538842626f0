"""Mini-batch training with early stopping and early realignment, plus
class-prior estimation and prior-scaled scoring.

The loop is deterministic end to end: per-epoch shuffles come from the
base shuffle seed plus the epoch index, dropout masks from a derived
substream, so identical (seeds, config, data) give bit-identical
parameters. Early stopping compares each epoch's held-out cross
entropy against the previous one and stops once the improvement falls
below the configured tolerance; the best-dev epoch is tracked
separately from the final one.

Early realignment relabels every training frame after epoch R with the
model's best guess *within the frame's label group* (the desk-scale
analog of a forced alignment constrained by the transcript), resets
the learning rate to its initial value, and keeps training the same
weights on the new labels.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time

import numpy as np

from .data import Dataset, group_members
from .network import Network, backward, forward
from .numerics import NumericError, ParameterError, Rng, ShapeError
from .optim import (
    OptimizerConfig,
    OptimizerState,
    PerEpochHalving,
    accuracy,
    anneal,
    cross_entropy,
    make_optimizer_step,
    momentum_schedule,
)

# Offset separating the dropout substream from per-epoch shuffle seeds.
DROPOUT_STREAM_OFFSET = 2**32

LOG_CSV_COLUMNS = ["epoch", "train_ce", "dev_ce", "dev_acc", "lr", "mu", "labels_changed"]


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss."""


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 512
    max_epochs: int = 10
    tolerance: float = 1e-3  # min dev-CE improvement (nats) to continue
    dropout_p: float = 0.0
    realign_epoch: int = 0  # 0 = disabled
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ParameterError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.tolerance < 0:
            raise ParameterError(f"tolerance must be >= 0, got {self.tolerance}")
        if not 0.0 <= self.dropout_p <= 0.5:
            raise ParameterError(f"dropout_p must be in [0, 0.5], got {self.dropout_p}")
        if self.realign_epoch < 0:
            raise ParameterError(f"realign_epoch must be >= 0, got {self.realign_epoch}")


@dataclasses.dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_ce: float
    dev_ce: float
    dev_acc: float
    lr: float
    mu: float
    labels_changed: float  # fraction relabeled at this epoch's realignment (0 otherwise)
    wall_clock: float


@dataclasses.dataclass
class TrainLog:
    records: list[EpochRecord] = dataclasses.field(default_factory=list)
    best_epoch: int = 0
    best_dev_ce: float = math.inf
    best_params: list[np.ndarray] | None = None
    stopped_early: bool = False

    def deterministic_view(self):
        """Log contents minus wall-clock, for reproducibility checks."""
        return [
            (r.epoch, r.train_ce, r.dev_ce, r.dev_acc, r.lr, r.mu, r.labels_changed)
            for r in self.records
        ]


def evaluate(net: Network, d: Dataset, batch_size: int = 4096) -> tuple[float, float]:
    """(cross entropy, accuracy) of the net on a dataset, inference mode."""
    total_nll = 0.0
    correct = 0
    n = d.num_frames
    for lo in range(0, n, batch_size):
        rows = slice(lo, min(lo + batch_size, n))
        yhat = forward(net, d.frames[rows]).yhat
        labels = d.labels[rows]
        total_nll += cross_entropy(yhat, labels) * (rows.stop - rows.start)
        correct += int((yhat.argmax(axis=1) == labels).sum())
    return total_nll / n, correct / n


def predict_scores(net: Network, frames: np.ndarray, batch_size: int = 4096) -> np.ndarray:
    """Posterior matrix for a frame block, evaluated in batches."""
    outs = [
        forward(net, frames[lo : lo + batch_size]).yhat
        for lo in range(0, frames.shape[0], batch_size)
    ]
    return np.concatenate(outs, axis=0)


def fraction_labels_changed(old_labels, new_labels) -> float:
    """Hamming fraction between two labelings of the same frames."""
    old = np.asarray(old_labels)
    new = np.asarray(new_labels)
    if old.shape != new.shape:
        raise ShapeError(f"label sequences differ in length: {old.shape} vs {new.shape}")
    return float((old != new).mean())


def realign_labels(net: Network, d: Dataset, batch_size: int = 4096) -> np.ndarray:
    """Relabel each frame with the model's most probable class within
    the group of its current label (constrained realignment)."""
    members = group_members(d.group_of)
    yhat = predict_scores(net, d.frames, batch_size)
    new_labels = np.empty_like(d.labels)
    groups = d.group_of[d.labels]
    for gid, cls in enumerate(members):
        rows = np.flatnonzero(groups == gid)
        if rows.size:
            new_labels[rows] = cls[yhat[np.ix_(rows, cls)].argmax(axis=1)]
    return new_labels


def train(
    net: Network,
    train_set: Dataset,
    dev_set: Dataset,
    opt_cfg: OptimizerConfig,
    train_cfg: TrainConfig,
) -> tuple[Network, TrainLog]:
    """Shuffled mini-batch training with early stopping (and optional
    early realignment when train_cfg.realign_epoch > 0).

    Returns the final-epoch network; the best-dev-CE epoch and its
    parameter snapshot are flagged in the log.
    """
    if train_cfg.realign_epoch >= train_cfg.max_epochs and train_cfg.realign_epoch > 0:
        raise ParameterError(
            f"realign_epoch {train_cfg.realign_epoch} must be < max_epochs {train_cfg.max_epochs}"
        )
    params = net.get_params()
    state = OptimizerState.for_params(params, opt_cfg)
    step_fn = make_optimizer_step(opt_cfg.kind)
    dropout_rng = Rng(train_cfg.shuffle_seed).derive(DROPOUT_STREAM_OFFSET)
    current_train = train_set
    n = train_set.num_frames
    log = TrainLog()

    prev_dev_ce, _ = evaluate(net, dev_set)
    log.best_dev_ce = prev_dev_ce
    log.best_params = [p.copy() for p in params]

    for epoch in range(1, train_cfg.max_epochs + 1):
        t_start = time.perf_counter()
        order = Rng(train_cfg.shuffle_seed + epoch).permutation(n)

        for lo in range(0, n, train_cfg.batch_size):
            rows = order[lo : lo + train_cfg.batch_size]
            batch = current_train.frames[rows]
            batch_labels = current_train.labels[rows]
            batch_ce = math.nan

            def gradient_fn(at_params):
                nonlocal batch_ce
                at_net = net.with_params(at_params)
                trace = forward(
                    at_net,
                    batch,
                    train=True,
                    dropout_p=train_cfg.dropout_p,
                    rng=dropout_rng,
                )
                batch_ce = cross_entropy(trace.yhat, batch_labels)
                return backward(at_net, trace, batch_labels)

            state.mu = momentum_schedule(state.t, opt_cfg.momentum)
            try:
                params = step_fn(params, gradient_fn, state)
            except NumericError as e:
                raise DivergenceError(
                    f"non-finite values at step {state.t} (lr={state.eps:g}): {e}"
                ) from e
            if not math.isfinite(batch_ce):
                raise DivergenceError(
                    f"training cross entropy became non-finite at step {state.t} "
                    f"(lr={state.eps:g})"
                )
            state.t += 1
            state.eps = anneal(state.eps, opt_cfg.anneal, step=state.t)

        net.set_params(params)
        if isinstance(opt_cfg.anneal, PerEpochHalving):
            state.eps = anneal(state.eps, opt_cfg.anneal, epoch_boundary=True)

        train_ce, _ = evaluate(net, current_train)
        dev_ce, dev_acc = evaluate(net, dev_set)

        labels_changed = 0.0
        realigned = train_cfg.realign_epoch > 0 and epoch == train_cfg.realign_epoch
        if realigned:
            new_labels = realign_labels(net, current_train)
            labels_changed = fraction_labels_changed(current_train.labels, new_labels)
            current_train = current_train.replace(labels=new_labels)
            state.eps = opt_cfg.learning_rate  # reset after realignment

        log.records.append(
            EpochRecord(
                epoch=epoch,
                train_ce=train_ce,
                dev_ce=dev_ce,
                dev_acc=dev_acc,
                lr=state.eps,
                mu=state.mu,
                labels_changed=labels_changed,
                wall_clock=time.perf_counter() - t_start,
            )
        )
        if dev_ce < log.best_dev_ce:
            log.best_dev_ce = dev_ce
            log.best_epoch = epoch
            log.best_params = [p.copy() for p in params]

        if realigned:
            # The new labels invalidate the previous dev CE as a
            # stopping baseline; start fresh so the post-realignment
            # adjustment phase is not cut short.
            prev_dev_ce = math.inf
            continue
        if prev_dev_ce - dev_ce < train_cfg.tolerance:
            log.stopped_early = epoch < train_cfg.max_epochs
            break
        prev_dev_ce = dev_ce

    return net, log


def realign_train(
    net: Network,
    train_set: Dataset,
    dev_set: Dataset,
    opt_cfg: OptimizerConfig,
    train_cfg: TrainConfig,
) -> tuple[Network, TrainLog]:
    """Training with early realignment; requires realign_epoch > 0."""
    if train_cfg.realign_epoch < 1:
        raise ParameterError("realign_train requires realign_epoch >= 1")
    return train(net, train_set, dev_set, opt_cfg, train_cfg)


def estimate_priors(labels, num_classes: int, smoothing: float = 0.5) -> np.ndarray:
    """Smoothed class priors (count_k + a) / (N + a*K)."""
    labels = np.asarray(labels)
    if smoothing < 0:
        raise ParameterError(f"smoothing must be >= 0, got {smoothing}")
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    if smoothing == 0 and (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ParameterError(
            f"class {missing} unseen; zero prior would make scaled scores undefined "
            "(use smoothing > 0)"
        )
    return (counts + smoothing) / (labels.size + smoothing * num_classes)


def scaled_scores(yhat: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """Posterior-over-prior scores yhat_k / prior_k.

    Rows are deliberately *not* renormalized: these are unscaled
    classifier scores for a downstream decoder, not probabilities.
    """
    yhat = np.asarray(yhat, dtype=np.float64)
    priors = np.asarray(priors, dtype=np.float64)
    if yhat.ndim != 2 or priors.shape != (yhat.shape[1],):
        raise ShapeError(
            f"scaled_scores expects (n, K) posteriors and K priors, "
            f"got {yhat.shape} and {priors.shape}"
        )
    if (priors <= 0).any():
        raise ParameterError("priors must be strictly positive")
    return yhat / priors[None, :]


def write_log_csv(log: TrainLog, path, start_epoch: int = 0) -> None:
    """One row per epoch: epoch, train_ce, dev_ce, dev_acc, lr, mu,
    labels_changed. Appends (without header) when start_epoch > 0."""
    mode = "a" if start_epoch > 0 else "w"
    with open(path, mode, newline="") as f:
        writer = csv.writer(f)
        if start_epoch == 0:
            writer.writerow(LOG_CSV_COLUMNS)
        for r in log.records:
            writer.writerow(
                [
                    r.epoch + start_epoch,
                    f"{r.train_ce:.12g}",
                    f"{r.dev_ce:.12g}",
                    f"{r.dev_acc:.12g}",
                    f"{r.lr:.12g}",
                    f"{r.mu:.12g}",
                    f"{r.labels_changed:.12g}",
                ]
            )


def log_summary(log: TrainLog, start_epoch: int = 0) -> dict:
    final = log.records[-1]
    return {
        "epochs": final.epoch + start_epoch,
        "final": {"train_ce": final.train_ce, "dev_ce": final.dev_ce, "dev_acc": final.dev_acc},
        "best_epoch": log.best_epoch + start_epoch,
        "best_dev_ce": log.best_dev_ce,
        "stopped_early": log.stopped_early,
        "wall_clock_total": sum(r.wall_clock for r in log.records),
    }

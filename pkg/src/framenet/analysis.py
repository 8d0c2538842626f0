"""Coding-property metrics for trained networks: lifetime activation
probabilities (with scree ordering and a dispersion score), code
length, and frame-error decomposition grouped by base class.

A hidden unit counts as active on an input when its output is strictly
positive. Lifetime activation probability is the fraction of sampled
inputs that activate the unit; the code length of a layer is how many
of its units fire for an input, averaged over the sample. Both are
estimated from the same kind of seeded, without-replacement sample, so
the identity sum(probabilities) == mean code length holds per layer.

All operations are read-only with respect to the network.
"""

from __future__ import annotations

import csv
import dataclasses

import numpy as np

from .data import Dataset
from .network import Network, chain_shapes, forward
from .numerics import ParameterError, Rng, ShapeError

# Sample-size ceiling for activation statistics.
DEFAULT_SAMPLE_N = 512_000

ANALYSIS_BATCH = 4096


@dataclasses.dataclass(frozen=True)
class LayerCoding:
    """Per-hidden-layer coding statistics."""

    width: int
    probabilities: np.ndarray  # per-unit activation probability, unit order
    scree: np.ndarray  # same values sorted non-increasing
    mean_probability: float
    dispersion: float
    code_length: float


@dataclasses.dataclass(frozen=True)
class AnalysisReport:
    layers: list[LayerCoding]
    sample_n: int


@dataclasses.dataclass(frozen=True)
class GroupedConfusion:
    """Per-group frame counts: correct, wrong-but-same-group, and
    out-of-group argmax predictions. correct + within + out == occurrences."""

    occurrences: np.ndarray
    correct: np.ndarray
    within: np.ndarray
    out: np.ndarray

    @property
    def num_groups(self) -> int:
        return self.occurrences.shape[0]

    def overall_accuracy(self) -> float:
        return float(self.correct.sum() / self.occurrences.sum())


def _sample_rows(frames: np.ndarray, sample_n: int, rng: Rng) -> np.ndarray:
    n = frames.shape[0]
    if sample_n < 1:
        raise ParameterError(f"sample_n must be >= 1, got {sample_n}")
    if sample_n > n:
        raise ParameterError(f"sample_n {sample_n} exceeds available frames {n}")
    # Permutation prefix: growing sample_n with the same seed only adds
    # rows, so streamed statistics are consistent across sample sizes.
    return rng.permutation(n)[:sample_n]


def _active_counts(net: Network, frames: np.ndarray, rows: np.ndarray):
    """Per-layer (per-unit active counts, total active counts) over rows."""
    unit_counts = None
    for lo in range(0, rows.size, ANALYSIS_BATCH):
        trace = forward(net, frames[rows[lo : lo + ANALYSIS_BATCH]])
        active = [
            (a.reshape(a.shape[0], -1) > 0).sum(axis=0, dtype=np.int64)
            for a in trace.activations
        ]
        if unit_counts is None:
            unit_counts = active
        else:
            unit_counts = [u + a for u, a in zip(unit_counts, active)]
    return unit_counts


def activation_probabilities(
    net: Network, frames: np.ndarray, sample_n: int, rng: Rng
) -> list[np.ndarray]:
    """Per-hidden-layer vectors of lifetime activation probabilities,
    estimated over a seeded without-replacement sample (inference mode,
    so no dropout is involved)."""
    rows = _sample_rows(frames, sample_n, rng)
    counts = _active_counts(net, frames, rows)
    if counts is None:
        raise ParameterError("network has no hidden layers to analyze")
    return [c / sample_n for c in counts]


def scree(probs: np.ndarray) -> np.ndarray:
    """Activation probabilities sorted in decreasing order."""
    return np.sort(np.asarray(probs))[::-1].copy()


def dispersion(probs: np.ndarray) -> float:
    """How evenly units share coding responsibility, as the normalized
    entropy of probs / sum(probs): 1.0 for a perfectly flat scree, 0.0
    for a single dominant unit (or a silent layer)."""
    p = np.asarray(probs, dtype=np.float64)
    if p.size == 0:
        raise ParameterError("dispersion of an empty probability vector")
    if (p < 0).any():
        raise ParameterError("activation probabilities must be >= 0")
    total = p.sum()
    if total == 0.0:
        return 0.0
    if p.size == 1:
        return 1.0  # one unit is trivially flat
    q = p / total
    nz = q[q > 0]
    h = float(-(nz * np.log(nz)).sum())
    return h / float(np.log(p.size))


def code_length(net: Network, frames: np.ndarray, sample_n: int, rng: Rng) -> list[float]:
    """Mean number of active units per hidden layer over a seeded sample."""
    rows = _sample_rows(frames, sample_n, rng)
    counts = _active_counts(net, frames, rows)
    if counts is None:
        raise ParameterError("network has no hidden layers to analyze")
    return [float(c.sum()) / sample_n for c in counts]


def layer_widths(net: Network) -> list[int]:
    """Hidden-layer sizes as analyzed (conv layers count pooled units)."""
    states = chain_shapes(net.input_layout, net.specs)
    widths = []
    for state in states[1:-1]:
        widths.append(state[1] if state[0] == "flat" else int(np.prod(state[1])))
    return widths


def analyze_coding(net: Network, d: Dataset, sample_n: int | None, rng: Rng) -> AnalysisReport:
    """Full per-layer coding report over min(N, sample_n) frames."""
    n = d.num_frames
    sample_n = min(n, DEFAULT_SAMPLE_N if sample_n is None else sample_n)
    probs = activation_probabilities(net, d.frames, sample_n, rng)
    layers = []
    for p in probs:
        layers.append(
            LayerCoding(
                width=p.size,
                probabilities=p,
                scree=scree(p),
                mean_probability=float(p.mean()),
                dispersion=dispersion(p),
                code_length=float(p.sum()),
            )
        )
    return AnalysisReport(layers=layers, sample_n=sample_n)


def grouped_confusion(yhat: np.ndarray, labels, group_of) -> GroupedConfusion:
    """Decompose argmax predictions per true-label group into correct,
    within-group errors, and out-of-group errors. Argmax ties break
    toward the lowest class index, matching accuracy()."""
    yhat = np.asarray(yhat)
    labels = np.asarray(labels)
    group_of = np.asarray(group_of)
    if yhat.ndim != 2 or labels.shape != (yhat.shape[0],):
        raise ShapeError(
            f"grouped_confusion expects (n, K) scores and n labels, "
            f"got {yhat.shape} and {labels.shape}"
        )
    if group_of.shape != (yhat.shape[1],):
        raise ShapeError(
            f"group_of must have one entry per class: got {group_of.shape} for K={yhat.shape[1]}"
        )
    pred = yhat.argmax(axis=1)
    true_groups = group_of[labels]
    pred_groups = group_of[pred]
    g = int(group_of.max()) + 1

    occurrences = np.bincount(true_groups, minlength=g)
    correct = np.bincount(true_groups[pred == labels], minlength=g)
    within = np.bincount(
        true_groups[(pred != labels) & (pred_groups == true_groups)], minlength=g
    )
    out = occurrences - correct - within
    return GroupedConfusion(
        occurrences=occurrences, correct=correct, within=within, out=out
    )


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def write_scree_csv(report: AnalysisReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["layer", "rank", "probability"])
        for li, layer in enumerate(report.layers, start=1):
            for rank, p in enumerate(layer.scree, start=1):
                w.writerow([li, rank, f"{p:.12g}"])


def write_code_length_csv(report: AnalysisReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["layer", "mean_active", "width"])
        for li, layer in enumerate(report.layers, start=1):
            w.writerow([li, f"{layer.code_length:.12g}", layer.width])


def write_confusion_csv(conf: GroupedConfusion, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["group", "occurrences", "correct", "within", "out"])
        for g in range(conf.num_groups):
            w.writerow(
                [g, conf.occurrences[g], conf.correct[g], conf.within[g], conf.out[g]]
            )


__all__ = [
    "AnalysisReport",
    "GroupedConfusion",
    "LayerCoding",
    "activation_probabilities",
    "analyze_coding",
    "code_length",
    "dispersion",
    "grouped_confusion",
    "layer_widths",
    "scree",
    "write_code_length_csv",
    "write_confusion_csv",
    "write_scree_csv",
]

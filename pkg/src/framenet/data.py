"""Frame datasets: synthetic generation, splicing, normalization,
label corruption, and binary/CSV file I/O.

A dataset is a bag of feature frames with integer class labels and a
class -> group map (many subclasses per group, the way clustered
sub-phonetic states roll up to a base phone). Frames generated
synthetically are laid out class-contiguous so that context splicing
sees mostly same-class neighbours, mimicking the temporal coherence of
real frame streams.
"""

from __future__ import annotations

import csv
import dataclasses
import struct
from pathlib import Path

import numpy as np

from .numerics import NumericError, ParameterError, Rng, ShapeError

DATASET_MAGIC = b"FRN1"
DATASET_VERSION = 1
STD_FLOOR = 1e-8


class FormatError(ValueError):
    """A dataset or checkpoint file violates its declared format."""


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Feature frames plus labels and the class->group map.

    frames:      (N, D) float64
    labels:      (N,) int64 in [0, num_classes)
    group_of:    (num_classes,) int64 mapping class -> group id
    true_labels: originals when ``labels`` has been corrupted, else None
    grid_dims:   (T, F) with T*F == D for spatially structured features
    """

    frames: np.ndarray
    labels: np.ndarray
    num_classes: int
    group_of: np.ndarray
    true_labels: np.ndarray | None = None
    grid_dims: tuple[int, int] | None = None

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        group_of = np.ascontiguousarray(self.group_of, dtype=np.int64)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "group_of", group_of)
        if self.true_labels is not None:
            object.__setattr__(
                self, "true_labels", np.ascontiguousarray(self.true_labels, dtype=np.int64)
            )
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise FormatError(f"frames must be (N>=1, D>=1), got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise FormatError("frames contain non-finite values")
        if labels.shape != (frames.shape[0],):
            raise FormatError(
                f"labels: expected {frames.shape[0]} entries, got shape {labels.shape}"
            )
        k = self.num_classes
        if k < 1:
            raise FormatError(f"num_classes must be >= 1, got {k}")
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise FormatError(f"labels: value outside [0, {k})")
        if group_of.shape != (k,):
            raise FormatError(f"group_of: expected {k} entries, got shape {group_of.shape}")
        g = self.num_groups
        if group_of.min() < 0 or g > k:
            raise FormatError("group_of: group ids must lie in [0, G) with G <= K")
        if self.true_labels is not None:
            tl = self.true_labels
            if tl.shape != labels.shape:
                raise FormatError("true_labels: length mismatch with labels")
            if tl.size and (tl.min() < 0 or tl.max() >= k):
                raise FormatError(f"true_labels: value outside [0, {k})")
        if self.grid_dims is not None:
            t, f = self.grid_dims
            if t * f != frames.shape[1]:
                raise FormatError(
                    f"grid_dims: {t}x{f} != feature dimension {frames.shape[1]}"
                )
        for arr in (frames, labels, group_of, self.true_labels):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def num_groups(self) -> int:
        return int(self.group_of.max()) + 1

    def replace(self, **kw) -> "Dataset":
        return dataclasses.replace(self, **kw)


@dataclasses.dataclass(frozen=True)
class SyntheticSpec:
    """Hierarchical Gaussian cluster generator parameters.

    K = groups * subclasses classes; class (g, s) has mean equal to a
    group mean (drawn at group_separation scale) plus a subclass offset
    (drawn at subclass_separation scale).
    """

    groups: int
    subclasses: int
    base_dim: int
    frames_per_class: int
    group_separation: float
    subclass_separation: float
    noise_std: float
    seed: int = 0

    def __post_init__(self):
        for name in ("groups", "subclasses", "base_dim", "frames_per_class"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("group_separation", "subclass_separation"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.noise_std < 0:
            raise ParameterError(f"noise_std must be >= 0, got {self.noise_std}")

    @property
    def num_classes(self) -> int:
        return self.groups * self.subclasses


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Sample the hierarchical Gaussian mixture described by ``spec``.

    Class k = g * subclasses + s. Rows are class-contiguous (all frames
    of class 0, then class 1, ...). Deterministic per seed.
    """
    rng = Rng(spec.seed)
    g, s, d = spec.groups, spec.subclasses, spec.base_dim
    group_means = rng.normal((g, d), std=spec.group_separation)
    offsets = rng.normal((g, s, d), std=spec.subclass_separation)
    class_means = group_means[:, None, :] + offsets  # (g, s, d)

    n_per = spec.frames_per_class
    k = spec.num_classes
    noise = rng.normal((k * n_per, d), std=spec.noise_std) if spec.noise_std > 0 else 0.0
    frames = np.repeat(class_means.reshape(k, d), n_per, axis=0) + noise
    labels = np.repeat(np.arange(k, dtype=np.int64), n_per)
    group_of = np.arange(k, dtype=np.int64) // s
    return Dataset(frames=frames, labels=labels, num_classes=k, group_of=group_of)


def splice(frames: np.ndarray, context: int) -> np.ndarray:
    """Concatenate each row with its +-context neighbours.

    Row i of the result is frames[i-c] .. frames[i+c] side by side;
    rows past either end replicate the edge frame. Output is
    (N, D * (2c + 1)), a (2c+1, D) time-by-feature grid per row.
    """
    if context < 0:
        raise ParameterError(f"context must be >= 0, got {context}")
    frames = np.asarray(frames, dtype=np.float64)
    if context == 0:
        return frames.copy()
    n = frames.shape[0]
    idx = np.arange(n)[:, None] + np.arange(-context, context + 1)[None, :]
    np.clip(idx, 0, n - 1, out=idx)
    return frames[idx].reshape(n, -1)


def splice_dataset(d: Dataset, context: int) -> Dataset:
    """Dataset-level splice; records the (2c+1, D) grid layout."""
    if context == 0:
        return d
    return d.replace(frames=splice(d.frames, context), grid_dims=(2 * context + 1, d.dim))


def normalize_global(train: Dataset) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Zero-mean/unit-std each feature dimension over the whole set.

    Returns the normalized dataset plus the (mean, std) stats so dev and
    test splits can be transformed identically. Stds are floored at
    1e-8, so constant dimensions map to zero instead of blowing up.
    """
    if train.num_frames < 2:
        raise ParameterError("normalize_global needs at least 2 frames")
    mean = train.frames.mean(axis=0)
    std = np.maximum(train.frames.std(axis=0), STD_FLOOR)
    return apply_normalization(train, mean, std), mean, std


def apply_normalization(d: Dataset, mean: np.ndarray, std: np.ndarray) -> Dataset:
    if mean.shape != (d.dim,) or std.shape != (d.dim,):
        raise ShapeError(
            f"normalization stats of dim {mean.shape}/{std.shape} do not match data dim {d.dim}"
        )
    return d.replace(frames=(d.frames - mean) / std)


def group_members(group_of: np.ndarray) -> list[np.ndarray]:
    """Class ids belonging to each group, indexed by group id."""
    g = int(group_of.max()) + 1
    return [np.flatnonzero(group_of == i) for i in range(g)]


def corrupt_labels(d: Dataset, within_group_rate: float, rng: Rng) -> Dataset:
    """Independently replace each label, with the given probability, by a
    uniformly chosen *different* subclass of the same group.

    Originals are preserved in ``true_labels``. Mirrors alignment noise,
    which confuses states of similar sounds rather than arbitrary ones.
    """
    if not 0.0 <= within_group_rate <= 1.0:
        raise ParameterError(f"corruption rate must be in [0,1], got {within_group_rate}")
    members = group_members(d.group_of)
    if within_group_rate > 0 and min(len(m) for m in members) < 2:
        raise ParameterError(
            "within-group corruption needs >= 2 subclasses per group"
        )
    labels = d.labels.copy()
    if within_group_rate > 0:
        flip = rng.uniform(d.num_frames) < within_group_rate
        # Uniform over the S_g - 1 siblings: draw an index below the
        # current label's position-excluded member list.
        pos_in_group = np.zeros(d.num_classes, dtype=np.int64)
        for m in members:
            pos_in_group[m] = np.arange(len(m))
        draws = rng.uniform(d.num_frames)
        for i in np.flatnonzero(flip):
            m = members[d.group_of[labels[i]]]
            j = int(draws[i] * (len(m) - 1))
            j = min(j, len(m) - 2)
            if j >= pos_in_group[labels[i]]:
                j += 1
            labels[i] = m[j]
    return d.replace(labels=labels, true_labels=d.labels)


def corrupt_labels_uniform(d: Dataset, rate: float, rng: Rng) -> Dataset:
    """Replace each label, with the given probability, by a uniformly
    chosen different class anywhere in [0, K) — the unconstrained
    variant of corrupt_labels, offered as an explicit option."""
    if not 0.0 <= rate <= 1.0:
        raise ParameterError(f"corruption rate must be in [0,1], got {rate}")
    if rate > 0 and d.num_classes < 2:
        raise ParameterError("uniform corruption needs >= 2 classes")
    labels = d.labels.copy()
    if rate > 0:
        flip = rng.uniform(d.num_frames) < rate
        draws = rng.integers(0, d.num_classes - 1, size=d.num_frames)
        idx = np.flatnonzero(flip)
        new = draws[idx]
        new[new >= labels[idx]] += 1
        labels[idx] = new
    return d.replace(labels=labels, true_labels=d.labels)


def subset(d: Dataset, rows: np.ndarray) -> Dataset:
    """Row subset as a new dataset (class map unchanged)."""
    rows = np.asarray(rows)
    return d.replace(
        frames=d.frames[rows],
        labels=d.labels[rows],
        true_labels=None if d.true_labels is None else d.true_labels[rows],
    )


def split_train_dev(d: Dataset, dev_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random row split. dev_fraction == 0 evaluates on the
    training rows themselves (dev aliases train)."""
    if not 0.0 <= dev_fraction < 1.0:
        raise ParameterError(f"dev_fraction must be in [0, 1), got {dev_fraction}")
    if dev_fraction == 0.0:
        return d, d
    perm = Rng(seed).permutation(d.num_frames)
    n_dev = max(1, int(round(d.num_frames * dev_fraction)))
    if n_dev >= d.num_frames:
        raise ParameterError("dev split would consume every frame")
    return subset(d, np.sort(perm[n_dev:])), subset(d, np.sort(perm[:n_dev]))


def permute_columns(d: Dataset, rng: Rng) -> Dataset:
    """Apply a fixed seeded permutation to the feature columns.

    Control experiment: destroys local feature structure while keeping
    the per-class information content identical.
    """
    perm = rng.permutation(d.dim)
    return d.replace(frames=d.frames[:, perm])


# ---------------------------------------------------------------------------
# Binary dataset format (little-endian):
#   magic "FRN1", u32 version=1, u64 N, u32 D, u32 K, u32 G,
#   u8 has_true_labels, u8 has_grid, [u32 T, u32 F if has_grid],
#   N*D float32 frames row-major, N u32 labels, K u32 group_of,
#   [N u32 true_labels].
# ---------------------------------------------------------------------------


def save_dataset(d: Dataset, path) -> None:
    path = Path(path)
    has_tl = d.true_labels is not None
    has_grid = d.grid_dims is not None
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(
            struct.pack(
                "<IQIIIBB",
                DATASET_VERSION,
                d.num_frames,
                d.dim,
                d.num_classes,
                d.num_groups,
                int(has_tl),
                int(has_grid),
            )
        )
        if has_grid:
            f.write(struct.pack("<II", *d.grid_dims))
        f.write(np.ascontiguousarray(d.frames, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(d.labels, dtype="<u4").tobytes())
        f.write(np.ascontiguousarray(d.group_of, dtype="<u4").tobytes())
        if has_tl:
            f.write(np.ascontiguousarray(d.true_labels, dtype="<u4").tobytes())


def _read_exact(f, n: int, field: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated dataset file while reading {field}")
    return buf


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != DATASET_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}")
        version, n, dim, k, g, has_tl, has_grid = struct.unpack(
            "<IQIIIBB", _read_exact(f, 26, "header")
        )
        if version != DATASET_VERSION:
            raise FormatError(f"unsupported dataset version {version}")
        if n < 1 or dim < 1:
            raise FormatError(f"header: N={n}, D={dim} must both be >= 1")
        if not 1 <= g <= k:
            raise FormatError(f"header: need 1 <= G <= K, got G={g}, K={k}")
        grid = None
        if has_grid:
            t, fdim = struct.unpack("<II", _read_exact(f, 8, "grid_dims"))
            grid = (t, fdim)
        frames = np.frombuffer(
            _read_exact(f, 4 * n * dim, "frames"), dtype="<f4"
        ).reshape(n, dim)
        labels = np.frombuffer(_read_exact(f, 4 * n, "labels"), dtype="<u4").astype(np.int64)
        group_of = np.frombuffer(_read_exact(f, 4 * k, "group_of"), dtype="<u4").astype(
            np.int64
        )
        true_labels = None
        if has_tl:
            true_labels = np.frombuffer(
                _read_exact(f, 4 * n, "true_labels"), dtype="<u4"
            ).astype(np.int64)
        if f.read(1):
            raise FormatError("trailing bytes after dataset body")
    if labels.max() >= k:
        raise FormatError(f"labels: value {labels.max()} >= K={k}")
    if group_of.max() >= g:
        raise FormatError(f"group_of: value {group_of.max()} >= G={g}")
    try:
        return Dataset(
            frames=frames.astype(np.float64),
            labels=labels,
            num_classes=k,
            group_of=group_of,
            true_labels=true_labels,
            grid_dims=grid,
        )
    except NumericError as e:
        raise FormatError(str(e)) from e


def load_csv(path) -> Dataset:
    """CSV import: header row f0,...,f{D-1},label. Groups default to the
    identity map (every class its own group)."""
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty CSV file") from None
        dim = len(header) - 1
        expected = [f"f{i}" for i in range(dim)] + ["label"]
        if dim < 1 or header != expected:
            raise FormatError("CSV header must be f0,...,f{D-1},label")
        frames, labels = [], []
        for row_num, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise FormatError(f"CSV row {row_num}: expected {dim + 1} fields")
            frames.append([float(v) for v in row[:dim]])
            labels.append(int(row[dim]))
    if not frames:
        raise FormatError("CSV file has no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise FormatError("CSV labels must be non-negative")
    k = int(labels.max()) + 1
    return Dataset(
        frames=np.asarray(frames, dtype=np.float64),
        labels=labels,
        num_classes=k,
        group_of=np.arange(k, dtype=np.int64),
    )

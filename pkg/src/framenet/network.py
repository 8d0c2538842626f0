"""Feedforward frame classifiers: dense, convolutional, and locally
untied hidden layers with a softmax output, plus hand-coded
backpropagation and checkpoint I/O.

Hidden layers use the rectifier max(z, 0); its sub-gradient at exactly
zero is taken to be zero, so units that never activate stay dead in the
backward pass as well. Convolution is valid (no padding), stride 1;
pooling is non-overlapping max pooling and trailing rows/columns that
do not fill a block are dropped. Locally untied layers run the same
computation with an independent filter block at every output position.
"""

from __future__ import annotations

import dataclasses
import struct
from pathlib import Path

import numpy as np

from .data import FormatError
from .numerics import (
    ParameterError,
    Rng,
    ShapeError,
    DEFAULT_INIT_SCALE,
    ensure_finite,
    gaussian_init,
    matmul,
)

CHECKPOINT_MAGIC = b"FNW1"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# Layer and network description
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Dense:
    units: int

    def __post_init__(self):
        if self.units < 1:
            raise ParameterError(f"Dense units must be >= 1, got {self.units}")


@dataclasses.dataclass(frozen=True)
class Conv:
    maps: int
    filter_t: int
    filter_f: int
    pool_t: int
    pool_f: int

    def __post_init__(self):
        if self.maps < 1:
            raise ParameterError(f"Conv maps must be >= 1, got {self.maps}")
        if self.filter_t < 1 or self.filter_f < 1:
            raise ParameterError("Conv filter dims must be >= 1")
        if self.pool_t < 1 or self.pool_f < 1:
            raise ParameterError("Conv pool dims must be >= 1")


@dataclasses.dataclass(frozen=True)
class Untied:
    maps: int
    filter_t: int
    filter_f: int
    pool_t: int
    pool_f: int

    def __post_init__(self):
        if self.maps < 1:
            raise ParameterError(f"Untied maps must be >= 1, got {self.maps}")
        if self.filter_t < 1 or self.filter_f < 1:
            raise ParameterError("Untied filter dims must be >= 1")
        if self.pool_t < 1 or self.pool_f < 1:
            raise ParameterError("Untied pool dims must be >= 1")


@dataclasses.dataclass(frozen=True)
class SoftmaxOutput:
    classes: int

    def __post_init__(self):
        if self.classes < 2:
            raise ParameterError(f"SoftmaxOutput needs >= 2 classes, got {self.classes}")


LayerSpec = Dense | Conv | Untied | SoftmaxOutput


@dataclasses.dataclass(frozen=True)
class FlatInput:
    dim: int


@dataclasses.dataclass(frozen=True)
class GridInput:
    t: int
    f: int


InputLayout = FlatInput | GridInput


def input_dim(layout: InputLayout) -> int:
    return layout.dim if isinstance(layout, FlatInput) else layout.t * layout.f


def _conv_out_dims(spec, t, f):
    if spec.filter_t > t or spec.filter_f > f:
        raise ParameterError(
            f"filter {spec.filter_t}x{spec.filter_f} larger than grid {t}x{f}"
        )
    t1, f1 = t - spec.filter_t + 1, f - spec.filter_f + 1
    tp, fp = t1 // spec.pool_t, f1 // spec.pool_f
    if tp < 1 or fp < 1:
        raise ParameterError(
            f"pool {spec.pool_t}x{spec.pool_f} leaves no complete block on {t1}x{f1} maps"
        )
    return t1, f1, tp, fp


def chain_shapes(layout: InputLayout, specs) -> list:
    """Validate the layer chain and return the running representation
    shape before each layer: ("flat", d) or ("grid", (c, t, f))."""
    specs = tuple(specs)
    if not specs or not isinstance(specs[-1], SoftmaxOutput):
        raise ParameterError("network must end with a SoftmaxOutput layer")
    if sum(isinstance(s, SoftmaxOutput) for s in specs) != 1:
        raise ParameterError("network must contain exactly one SoftmaxOutput layer")
    if isinstance(layout, FlatInput):
        state = ("flat", layout.dim)
    else:
        state = ("grid", (1, layout.t, layout.f))
    states = [state]
    for spec in specs:
        if isinstance(spec, (Conv, Untied)):
            if state[0] != "grid":
                raise ParameterError(
                    "Conv/Untied layers require a grid representation "
                    "(they may not follow a Dense layer or a flat input)"
                )
            c, t, f = state[1]
            _, _, tp, fp = _conv_out_dims(spec, t, f)
            state = ("grid", (spec.maps, tp, fp))
        elif isinstance(spec, Dense):
            d = state[1] if state[0] == "flat" else int(np.prod(state[1]))
            state = ("flat", spec.units)
        else:  # SoftmaxOutput
            state = ("flat", spec.classes)
        states.append(state)
    return states


@dataclasses.dataclass
class Network:
    """Layer specs plus learned parameters (one [W, b] pair per layer)."""

    input_layout: InputLayout
    specs: tuple[LayerSpec, ...]
    params: list[list[np.ndarray]]
    init_seed: int | None = None

    @property
    def num_classes(self) -> int:
        return self.specs[-1].classes

    def get_params(self) -> list[np.ndarray]:
        return [arr for pair in self.params for arr in pair]

    def with_params(self, flat: list[np.ndarray]) -> "Network":
        if len(flat) != 2 * len(self.params):
            raise ShapeError(
                f"expected {2 * len(self.params)} parameter tensors, got {len(flat)}"
            )
        pairs = [[flat[2 * i], flat[2 * i + 1]] for i in range(len(self.params))]
        return dataclasses.replace(self, params=pairs)

    def set_params(self, flat: list[np.ndarray]) -> None:
        self.params = self.with_params(flat).params


def _param_shapes(layout: InputLayout, specs):
    """(W shape, b shape) per layer under the chained representation."""
    states = chain_shapes(layout, specs)
    shapes = []
    for spec, state in zip(specs, states[:-1]):
        if isinstance(spec, (Conv, Untied)):
            c, t, f = state[1]
            t1, f1, _, _ = _conv_out_dims(spec, t, f)
            if isinstance(spec, Conv):
                shapes.append(
                    ((spec.maps, c, spec.filter_t, spec.filter_f), (spec.maps,))
                )
            else:
                shapes.append(
                    (
                        (t1, f1, spec.maps, c, spec.filter_t, spec.filter_f),
                        (t1, f1, spec.maps),
                    )
                )
        else:
            d = state[1] if state[0] == "flat" else int(np.prod(state[1]))
            units = spec.units if isinstance(spec, Dense) else spec.classes
            shapes.append(((d, units), (units,)))
    return shapes


def init_network(
    layout: InputLayout,
    specs,
    rng: Rng,
    init_scale: float = DEFAULT_INIT_SCALE,
) -> Network:
    """Gaussian(0, init_scale^2) weights, zero biases, seeded."""
    specs = tuple(specs)
    params = []
    for w_shape, b_shape in _param_shapes(layout, specs):
        params.append([gaussian_init(rng, w_shape, init_scale), np.zeros(b_shape)])
    return Network(input_layout=layout, specs=specs, params=params, init_seed=rng.seed)


def num_params(net: Network) -> int:
    """Exact count of weight and bias scalars."""
    return int(sum(arr.size for arr in net.get_params()))


# ---------------------------------------------------------------------------
# Elementwise pieces
# ---------------------------------------------------------------------------


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(z, dtype=np.float64), 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Rowwise exp-normalize with max subtraction for stability."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeError(f"softmax expects (n, K) logits, got shape {z.shape}")
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def dense_forward(h_prev: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if b.shape != (w.shape[1],):
        raise ShapeError(f"bias shape {b.shape} does not match weight shape {w.shape}")
    return relu(matmul(h_prev, w) + b)


def dropout_mask(shape, p: float, rng: Rng) -> np.ndarray:
    """Inverted-dropout mask with entries in {0, 1/(1-p)}.

    Kept units are pre-scaled so inference needs no rescaling.
    """
    if not 0.0 <= p <= 0.5:
        raise ParameterError(f"dropout probability must be in [0, 0.5], got {p}")
    keep = rng.uniform(shape) >= p
    return keep / (1.0 - p)


# ---------------------------------------------------------------------------
# Convolution / untied layers
#
# The accumulation below iterates filter taps in (channel, dt, df) order
# and adds one vectorized term at a time, so every output scalar sees
# the identical sequence of multiply-adds as an elementwise loop oracle.
# ---------------------------------------------------------------------------


def _conv_accumulate(inp: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, c, t, f = inp.shape
    m, _, ft, ff = w.shape
    t1, f1 = t - ft + 1, f - ff + 1
    out = np.zeros((n, m, t1, f1))
    for ci in range(c):
        for dt in range(ft):
            for df in range(ff):
                out += (
                    w[:, ci, dt, df][None, :, None, None]
                    * inp[:, ci, dt : dt + t1, df : df + f1][:, None, :, :]
                )
    return out


def _untied_accumulate(inp: np.ndarray, w: np.ndarray) -> np.ndarray:
    t1, f1, m, c, ft, ff = w.shape
    n = inp.shape[0]
    out = np.zeros((n, m, t1, f1))
    for ci in range(c):
        for dt in range(ft):
            for df in range(ff):
                out += (
                    w[:, :, :, ci, dt, df].transpose(2, 0, 1)[None, :, :, :]
                    * inp[:, ci, dt : dt + t1, df : df + f1][:, None, :, :]
                )
    return out


def max_pool(maps: np.ndarray, pool_t: int, pool_f: int) -> np.ndarray:
    """Non-overlapping max pooling; incomplete trailing blocks dropped."""
    n, m, t1, f1 = maps.shape
    tp, fp = t1 // pool_t, f1 // pool_f
    blocks = maps[:, :, : tp * pool_t, : fp * pool_f].reshape(
        n, m, tp, pool_t, fp, pool_f
    )
    return blocks.max(axis=(3, 5))


def _max_pool_backward(delta_pooled, maps, pool_t, pool_f):
    """Route each pooled gradient to the first (row-major) max of its block."""
    n, m, t1, f1 = maps.shape
    tp, fp = t1 // pool_t, f1 // pool_f
    blocks = (
        maps[:, :, : tp * pool_t, : fp * pool_f]
        .reshape(n, m, tp, pool_t, fp, pool_f)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, m, tp, fp, pool_t * pool_f)
    )
    idx = blocks.argmax(axis=-1)
    scattered = np.zeros_like(blocks)
    np.put_along_axis(scattered, idx[..., None], delta_pooled[..., None], axis=-1)
    out = np.zeros_like(maps)
    out[:, :, : tp * pool_t, : fp * pool_f] = (
        scattered.reshape(n, m, tp, fp, pool_t, pool_f)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, m, tp * pool_t, fp * pool_f)
    )
    return out


def conv_forward(inp: np.ndarray, w: np.ndarray, b: np.ndarray, pool_t: int, pool_f: int):
    """Shared-filter convolution over a (n, channels, T, F) batch.

    Returns (feature_maps, pooled): the pre-rectifier feature maps of
    shape (n, maps, T', F') and the max-pooled rectified maps.
    """
    inp = np.asarray(inp, dtype=np.float64)
    if inp.ndim != 4:
        raise ShapeError(f"conv input must be (n, c, T, F), got shape {inp.shape}")
    if w.ndim != 4 or w.shape[1] != inp.shape[1]:
        raise ShapeError(f"conv weights {w.shape} do not match input {inp.shape}")
    if w.shape[2] > inp.shape[2] or w.shape[3] > inp.shape[3]:
        raise ParameterError(
            f"filter {w.shape[2]}x{w.shape[3]} larger than grid {inp.shape[2]}x{inp.shape[3]}"
        )
    pre = _conv_accumulate(inp, w) + b[None, :, None, None]
    ensure_finite(pre, "conv_forward")
    return pre, max_pool(relu(pre), pool_t, pool_f)


def untied_forward(inp: np.ndarray, w: np.ndarray, b: np.ndarray, pool_t: int, pool_f: int):
    """Locally connected layer: as conv_forward but with an independent
    filter (and bias) at every output position. Weights are
    (T', F', maps, channels, filter_t, filter_f); biases (T', F', maps).
    """
    inp = np.asarray(inp, dtype=np.float64)
    if inp.ndim != 4:
        raise ShapeError(f"untied input must be (n, c, T, F), got shape {inp.shape}")
    if w.ndim != 6 or w.shape[3] != inp.shape[1]:
        raise ShapeError(f"untied weights {w.shape} do not match input {inp.shape}")
    t1 = inp.shape[2] - w.shape[4] + 1
    f1 = inp.shape[3] - w.shape[5] + 1
    if (t1, f1) != (w.shape[0], w.shape[1]):
        raise ShapeError(
            f"untied weights cover {w.shape[0]}x{w.shape[1]} positions, grid yields {t1}x{f1}"
        )
    pre = _untied_accumulate(inp, w) + b.transpose(2, 0, 1)[None, :, :, :]
    ensure_finite(pre, "untied_forward")
    return pre, max_pool(relu(pre), pool_t, pool_f)


# ---------------------------------------------------------------------------
# Whole-network forward / backward
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class ForwardTrace:
    """Everything the backward pass needs from one forward pass.

    activations holds each hidden layer's post-nonlinearity output
    (pooled maps for conv/untied layers) before any dropout mask;
    masks holds the inverted-dropout masks actually applied (None when
    a layer ran without dropout).
    """

    activations: list[np.ndarray]
    masks: list[np.ndarray | None]
    yhat: np.ndarray
    caches: list[dict]


def _as_network_input(net: Network, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D (n, D), got shape {batch.shape}")
    d = input_dim(net.input_layout)
    if batch.shape[1] != d:
        raise ShapeError(
            f"batch feature dim {batch.shape[1]} does not match network input {d}"
        )
    if isinstance(net.input_layout, GridInput):
        t, f = net.input_layout.t, net.input_layout.f
        return batch.reshape(batch.shape[0], 1, t, f)
    return batch


def forward(
    net: Network,
    batch: np.ndarray,
    *,
    train: bool = False,
    dropout_p: float = 0.0,
    rng: Rng | None = None,
) -> ForwardTrace:
    """Propagate a batch through the network.

    In train mode each hidden layer's output is masked by inverted
    dropout (when dropout_p > 0); inference consumes no randomness.
    """
    if train and dropout_p > 0.0 and rng is None:
        raise ParameterError("train-mode dropout requires an rng")
    if not 0.0 <= dropout_p <= 0.5:
        raise ParameterError(f"dropout probability must be in [0, 0.5], got {dropout_p}")
    h = _as_network_input(net, batch)
    use_dropout = train and dropout_p > 0.0

    activations, masks, caches = [], [], []
    for spec, (w, b) in zip(net.specs, net.params):
        if isinstance(spec, Dense):
            if h.ndim != 2:
                h = h.reshape(h.shape[0], -1)
            a = dense_forward(h, w, b)
            caches.append({"kind": "dense", "inp": h, "act": a})
        elif isinstance(spec, (Conv, Untied)):
            if h.ndim != 4:
                raise ShapeError("Conv/Untied layer received a flat representation")
            fwd = conv_forward if isinstance(spec, Conv) else untied_forward
            pre, a = fwd(h, w, b, spec.pool_t, spec.pool_f)
            caches.append({"kind": "conv", "inp": h, "pre": pre, "pooled": a})
        else:  # SoftmaxOutput
            if h.ndim != 2:
                h = h.reshape(h.shape[0], -1)
            logits = matmul(h, w) + b
            yhat = softmax(logits)
            caches.append({"kind": "out", "inp": h})
            return ForwardTrace(activations=activations, masks=masks, yhat=yhat, caches=caches)
        activations.append(a)
        if use_dropout:
            mask = dropout_mask(a.shape, dropout_p, rng)
            masks.append(mask)
            h = a * mask
        else:
            masks.append(None)
            h = a
    raise AssertionError("unreachable: chain validation guarantees an output layer")


def _conv_backward(spec, cache, w, delta_pooled, need_input_grad):
    pre = cache["pre"]
    d_pre = _max_pool_backward(delta_pooled, relu(pre), spec.pool_t, spec.pool_f)
    d_pre *= pre > 0
    inp = cache["inp"]
    t1, f1 = pre.shape[2], pre.shape[3]
    c = inp.shape[1]
    dw = np.zeros_like(w)
    if isinstance(spec, Conv):
        db = d_pre.sum(axis=(0, 2, 3))
        for ci in range(c):
            for dt in range(spec.filter_t):
                for df in range(spec.filter_f):
                    dw[:, ci, dt, df] = np.einsum(
                        "nmxy,nxy->m", d_pre, inp[:, ci, dt : dt + t1, df : df + f1]
                    )
    else:
        db = d_pre.sum(axis=0).transpose(1, 2, 0)
        for ci in range(c):
            for dt in range(spec.filter_t):
                for df in range(spec.filter_f):
                    dw[:, :, :, ci, dt, df] = np.einsum(
                        "nmxy,nxy->xym", d_pre, inp[:, ci, dt : dt + t1, df : df + f1]
                    )
    d_inp = None
    if need_input_grad:
        d_inp = np.zeros_like(inp)
        for dt in range(spec.filter_t):
            for df in range(spec.filter_f):
                if isinstance(spec, Conv):
                    d_inp[:, :, dt : dt + t1, df : df + f1] += np.einsum(
                        "nmxy,mc->ncxy", d_pre, w[:, :, dt, df]
                    )
                else:
                    d_inp[:, :, dt : dt + t1, df : df + f1] += np.einsum(
                        "nmxy,xymc->ncxy", d_pre, w[:, :, :, :, dt, df]
                    )
    return dw, db, d_inp


def backward(net: Network, trace: ForwardTrace, labels) -> list[np.ndarray]:
    """Gradient of mean cross-entropy over the batch w.r.t. every
    parameter, in get_params() order. Dropout masks recorded in the
    trace are replayed in the backward pass.
    """
    labels = np.asarray(labels)
    n, k = trace.yhat.shape
    if len(trace.caches) != len(net.specs):
        raise ShapeError("trace does not match network depth")
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ParameterError(f"label outside [0, {k})")

    grads: list = [None] * len(net.specs)
    delta = trace.yhat.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    w_out, _ = net.params[-1]
    inp = trace.caches[-1]["inp"]
    grads[-1] = [matmul(inp.T, delta), delta.sum(axis=0)]
    delta = matmul(delta, w_out.T)

    for i in range(len(net.specs) - 2, -1, -1):
        spec, cache = net.specs[i], trace.caches[i]
        w, _ = net.params[i]
        if cache["kind"] == "conv":
            delta = delta.reshape(cache["pooled"].shape)
        if trace.masks[i] is not None:
            delta = delta * trace.masks[i]
        if cache["kind"] == "dense":
            dz = delta * (cache["act"] > 0)
            grads[i] = [matmul(cache["inp"].T, dz), dz.sum(axis=0)]
            if i > 0:
                delta = matmul(dz, w.T)
        else:
            dw, db, d_inp = _conv_backward(spec, cache, w, delta, need_input_grad=i > 0)
            grads[i] = [dw, db]
            if i > 0:
                delta = d_inp

    return [arr for pair in grads for arr in pair]


# ---------------------------------------------------------------------------
# Checkpoint format (little-endian):
#   magic "FNW1", u32 version, u8 float_width (4|8),
#   u8 input_kind (0 flat / 1 grid), u32 a, u32 b   (flat: a=D, b=0)
#   u32 layer_count, per layer: u8 tag, u8 nparams, nparams x u32
#     tags: 1=Dense(units) 2=Conv(maps,ft,ff,pt,pf)
#           3=Untied(maps,ft,ff,pt,pf) 4=SoftmaxOutput(classes)
#   then per layer W and b tensors: u32 rank, rank x u32 extents, data
#   row-major at the declared float width.
# ---------------------------------------------------------------------------

_TAGS = {Dense: 1, Conv: 2, Untied: 3, SoftmaxOutput: 4}


def _spec_ints(spec) -> list[int]:
    if isinstance(spec, Dense):
        return [spec.units]
    if isinstance(spec, SoftmaxOutput):
        return [spec.classes]
    return [spec.maps, spec.filter_t, spec.filter_f, spec.pool_t, spec.pool_f]


def _spec_from_ints(tag: int, vals: list[int]):
    try:
        if tag == 1:
            (units,) = vals
            return Dense(units)
        if tag == 2:
            return Conv(*vals)
        if tag == 3:
            return Untied(*vals)
        if tag == 4:
            (classes,) = vals
            return SoftmaxOutput(classes)
    except (TypeError, ValueError, ParameterError) as e:
        raise FormatError(f"invalid layer spec (tag {tag}): {e}") from e
    raise FormatError(f"unknown layer tag {tag}")


def save_checkpoint(net: Network, path, float_width: int = 8) -> None:
    if float_width not in (4, 8):
        raise ParameterError(f"float_width must be 4 or 8, got {float_width}")
    dtype = "<f4" if float_width == 4 else "<f8"
    path = Path(path)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<IB", CHECKPOINT_VERSION, float_width))
        if isinstance(net.input_layout, FlatInput):
            f.write(struct.pack("<BII", 0, net.input_layout.dim, 0))
        else:
            f.write(struct.pack("<BII", 1, net.input_layout.t, net.input_layout.f))
        f.write(struct.pack("<I", len(net.specs)))
        for spec in net.specs:
            vals = _spec_ints(spec)
            f.write(struct.pack("<BB", _TAGS[type(spec)], len(vals)))
            f.write(struct.pack(f"<{len(vals)}I", *vals))
        for w, b in net.params:
            for arr in (w, b):
                f.write(struct.pack("<I", arr.ndim))
                f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                f.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def load_checkpoint(path) -> Network:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        version, float_width = struct.unpack("<IB", _read(f, 5, "header"))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        if float_width not in (4, 8):
            raise FormatError(f"invalid float width {float_width}")
        kind, a, b = struct.unpack("<BII", _read(f, 9, "input layout"))
        if kind == 0:
            layout: InputLayout = FlatInput(a)
        elif kind == 1:
            layout = GridInput(a, b)
        else:
            raise FormatError(f"unknown input layout kind {kind}")
        (n_layers,) = struct.unpack("<I", _read(f, 4, "layer count"))
        specs = []
        for _ in range(n_layers):
            tag, nvals = struct.unpack("<BB", _read(f, 2, "layer spec"))
            vals = list(struct.unpack(f"<{nvals}I", _read(f, 4 * nvals, "layer spec")))
            specs.append(_spec_from_ints(tag, vals))
        specs = tuple(specs)
        try:
            expected = _param_shapes(layout, specs)
        except ParameterError as e:
            raise FormatError(f"inconsistent layer chain: {e}") from e
        dtype = "<f4" if float_width == 4 else "<f8"
        itemsize = float_width
        params = []
        for w_shape, b_shape in expected:
            pair = []
            for want in (w_shape, b_shape):
                (rank,) = struct.unpack("<I", _read(f, 4, "tensor rank"))
                shape = struct.unpack(f"<{rank}I", _read(f, 4 * rank, "tensor extents"))
                if shape != want:
                    raise FormatError(
                        f"parameter tensor shape {shape} does not match layer chain {want}"
                    )
                count = int(np.prod(shape)) if shape else 1
                arr = np.frombuffer(
                    _read(f, itemsize * count, "tensor data"), dtype=dtype
                ).reshape(shape)
                pair.append(arr.astype(np.float64))
            params.append(pair)
        if f.read(1):
            raise FormatError("trailing bytes after checkpoint body")
    return Network(input_layout=layout, specs=specs, params=params)


def _read(f, n: int, field: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated checkpoint while reading {field}")
    return buf

"""Deterministic tensor arithmetic and seeded random-number services.

Tensors are plain ``numpy.ndarray`` objects in float64, C (row-major)
layout. Every public operation validates shapes and guarantees finite
outputs: overflow raises instead of propagating NaN/Inf downstream.
"""

from __future__ import annotations

import numpy as np

# Fixed, versioned generator algorithm. Identical seed => identical
# stream on every platform numpy supports.
RNG_ALGORITHM = "pcg64-v1"

DEFAULT_INIT_SCALE = 0.01


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ParameterError(ValueError):
    """A scalar argument is outside its valid range."""


class NumericError(ArithmeticError):
    """An operation produced a non-finite value (overflow)."""


class Rng:
    """Seeded random stream (PCG64).

    The algorithm identifier is part of the reproducibility contract:
    checkpoints and logs produced with one algorithm version are only
    comparable to runs using the same version.
    """

    def __init__(self, seed: int, algorithm: str = RNG_ALGORITHM):
        if algorithm != RNG_ALGORITHM:
            raise ParameterError(
                f"unknown rng algorithm {algorithm!r}; this build provides {RNG_ALGORITHM!r}"
            )
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ParameterError(f"seed must be a u64, got {seed}")
        self.seed = seed
        self.algorithm = algorithm
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def derive(self, offset: int) -> "Rng":
        """Independent substream addressed by a fixed offset from this seed."""
        return Rng((self.seed + int(offset)) % 2**64)

    def normal(self, shape, std: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, std, size=shape)

    def uniform(self, shape) -> np.ndarray:
        return self._gen.random(size=shape)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self):
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"


def as_tensor(values, shape=None) -> np.ndarray:
    """Coerce to a float64 C-contiguous array, rejecting non-finite input."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if shape is not None:
        arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise NumericError("tensor contains NaN or Inf")
    return arr


def ensure_finite(arr: np.ndarray, context: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{context} produced non-finite values")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a [m x k] and b [k x n].

    Raises ShapeError when inner dimensions disagree and NumericError if
    the product overflows to Inf/NaN.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    return ensure_finite(out, "matmul")


def gaussian_init(rng: Rng, shape, scale: float) -> np.ndarray:
    """I.i.d. normal(0, scale^2) tensor; identical per (seed, call order)."""
    if not scale > 0:
        raise ParameterError(f"init scale must be > 0, got {scale}")
    return ensure_finite(rng.normal(shape, std=scale), "gaussian_init")

"""Loss, accuracy, and the two stochastic optimizers (classical
momentum and Nesterov's accelerated gradient) with their learning-rate
annealing policies and momentum schedules.

Classical momentum:

    v_t     = mu * v_{t-1} - eps * grad f(theta_{t-1})
    theta_t = theta_{t-1} + v_t

Nesterov's accelerated gradient evaluates the gradient at the
lookahead point instead:

    v_t     = mu * v_{t-1} - eps * grad f(theta_{t-1} + mu * v_{t-1})
    theta_t = theta_{t-1} + v_t

The optimizer asks for exactly one gradient per step, at a point it
names, so the training loop stays agnostic to the optimizer kind.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .numerics import ParameterError, ShapeError

CROSS_ENTROPY_FLOOR = 1e-30

# Momentum ramp granularity: the schedule coarsens in blocks of this
# many steps (the smooth initial ramp used with NAG training).
RAMP_BLOCK = 250


@dataclasses.dataclass(frozen=True)
class ConstantMomentum:
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.mu < 1.0:
            raise ParameterError(f"momentum must be in [0, 1), got {self.mu}")


@dataclasses.dataclass(frozen=True)
class RampMomentum:
    """Smooth initial schedule mu_t = min(1 - 2^(-1-log2(floor(t/250)+1)),
    mu_max), i.e. 1 - 1/(2*(floor(t/250)+1)) clamped at mu_max."""

    mu_max: float

    def __post_init__(self):
        if not 0.0 <= self.mu_max < 1.0:
            raise ParameterError(f"mu_max must be in [0, 1), got {self.mu_max}")


MomentumSchedule = ConstantMomentum | RampMomentum


@dataclasses.dataclass(frozen=True)
class PerEpochHalving:
    """Halve the learning rate at every epoch boundary."""


@dataclasses.dataclass(frozen=True)
class EveryNIterations:
    """Divide the learning rate by ``factor`` every ``n`` update steps."""

    n: int
    factor: float

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"anneal interval must be >= 1, got {self.n}")
        if not self.factor > 1.0:
            raise ParameterError(f"anneal factor must be > 1, got {self.factor}")


AnnealPolicy = PerEpochHalving | EveryNIterations


@dataclasses.dataclass(frozen=True)
class OptimizerConfig:
    kind: str  # "cm" | "nag"
    learning_rate: float
    momentum: MomentumSchedule
    anneal: AnnealPolicy = PerEpochHalving()

    def __post_init__(self):
        if self.kind not in ("cm", "nag"):
            raise ParameterError(f"optimizer kind must be 'cm' or 'nag', got {self.kind!r}")
        if not self.learning_rate > 0:
            raise ParameterError(f"learning rate must be > 0, got {self.learning_rate}")


@dataclasses.dataclass
class OptimizerState:
    """Velocity per parameter tensor, plus the evolving step counter,
    learning rate, and momentum."""

    velocity: list[np.ndarray]
    t: int
    eps: float
    mu: float

    @classmethod
    def for_params(cls, params: list[np.ndarray], cfg: OptimizerConfig) -> "OptimizerState":
        return cls(
            velocity=[np.zeros_like(p) for p in params],
            t=0,
            eps=cfg.learning_rate,
            mu=momentum_schedule(0, cfg.momentum),
        )


def cross_entropy(yhat: np.ndarray, labels) -> float:
    """Mean over the batch of -log yhat[y], floored at 1e-30 before the
    log so saturated outputs cannot produce -inf."""
    yhat = np.asarray(yhat, dtype=np.float64)
    labels = np.asarray(labels)
    if yhat.ndim != 2 or labels.shape != (yhat.shape[0],):
        raise ShapeError(
            f"cross_entropy expects (n, K) probabilities and n labels, "
            f"got {yhat.shape} and {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= yhat.shape[1]):
        raise ParameterError(f"label outside [0, {yhat.shape[1]})")
    picked = yhat[np.arange(yhat.shape[0]), labels]
    return float(-np.log(np.maximum(picked, CROSS_ENTROPY_FLOOR)).mean())


def accuracy(yhat: np.ndarray, labels) -> float:
    """Fraction of rows whose argmax matches the label; argmax ties
    break toward the lowest class index."""
    yhat = np.asarray(yhat)
    labels = np.asarray(labels)
    if yhat.ndim != 2 or labels.shape != (yhat.shape[0],):
        raise ShapeError(
            f"accuracy expects (n, K) scores and n labels, got {yhat.shape} and {labels.shape}"
        )
    return float((yhat.argmax(axis=1) == labels).mean())


def _check_shapes(params, grads_or_velocity, what):
    if len(params) != len(grads_or_velocity):
        raise ShapeError(
            f"{what}: expected {len(params)} tensors, got {len(grads_or_velocity)}"
        )
    for p, g in zip(params, grads_or_velocity):
        if p.shape != g.shape:
            raise ShapeError(f"{what}: shape {g.shape} does not match parameter {p.shape}")


def cm_update(params: list[np.ndarray], grads: list[np.ndarray], state: OptimizerState):
    """One classical-momentum step; replaces state.velocity."""
    _check_shapes(params, grads, "cm_update gradients")
    _check_shapes(params, state.velocity, "cm_update velocity")
    new_v = [state.mu * v - state.eps * g for v, g in zip(state.velocity, grads)]
    state.velocity = new_v
    return [p + v for p, v in zip(params, new_v)]


def nag_update(params: list[np.ndarray], gradient_fn, state: OptimizerState):
    """One NAG step; gradient_fn is called once, at the lookahead point
    theta + mu * v chosen by the optimizer."""
    _check_shapes(params, state.velocity, "nag_update velocity")
    lookahead = [p + state.mu * v for p, v in zip(params, state.velocity)]
    grads = gradient_fn(lookahead)
    _check_shapes(params, grads, "nag_update gradients")
    new_v = [state.mu * v - state.eps * g for v, g in zip(state.velocity, grads)]
    state.velocity = new_v
    return [p + v for p, v in zip(params, new_v)]


def momentum_schedule(t: int, schedule: MomentumSchedule) -> float:
    if t < 0:
        raise ParameterError(f"step must be >= 0, got {t}")
    if isinstance(schedule, ConstantMomentum):
        return schedule.mu
    # 1 - 2^(-1 - log2(k)) == 1 - 1/(2k) for k = floor(t/250) + 1
    k = t // RAMP_BLOCK + 1
    return min(1.0 - 0.5 / k, schedule.mu_max)


def anneal(
    eps: float,
    policy: AnnealPolicy,
    *,
    step: int | None = None,
    epoch_boundary: bool = False,
) -> float:
    """New learning rate after the given event. Per-epoch halving fires
    on epoch boundaries; every-n division fires when the step counter
    reaches a multiple of n."""
    if isinstance(policy, PerEpochHalving):
        return eps / 2.0 if epoch_boundary else eps
    if step is None:
        return eps
    return eps / policy.factor if step > 0 and step % policy.n == 0 else eps


def stable_quadratic_lr_bound(curvature_max: float, mu: float) -> float:
    """Largest stable learning rate for momentum descent on a quadratic
    with the given maximum curvature (used by sanity tests)."""
    return 2.0 * (1.0 + mu) / curvature_max


def make_optimizer_step(kind: str):
    """Uniform step interface: step(params, gradient_fn, state) -> params'.

    CM evaluates the gradient at the current parameters; NAG at its
    lookahead point. Either way gradient_fn runs exactly once.
    """
    if kind == "cm":

        def step(params, gradient_fn, state):
            return cm_update(params, gradient_fn(params), state)

    elif kind == "nag":

        def step(params, gradient_fn, state):
            return nag_update(params, gradient_fn, state)

    else:
        raise ParameterError(f"optimizer kind must be 'cm' or 'nag', got {kind!r}")
    return step

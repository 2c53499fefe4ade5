"""SGD (with momentum) and Adam over flat parameter vectors.

States are immutable values: `step` returns a new (model, state) pair, and
`preview_update` computes the update a step would apply without touching
anything. The two share one code path, so preview and step agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .nn import Model

__all__ = [
    "SgdState",
    "AdamState",
    "OptimizerState",
    "describe",
    "preview_update",
    "step",
]


@dataclass(frozen=True, eq=False)
class SgdState:
    learning_rate: float
    momentum: float
    velocity: np.ndarray

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        v = np.asarray(self.velocity, dtype=np.float64)
        object.__setattr__(self, "velocity", v)

    @classmethod
    def fresh(cls, learning_rate: float, n_params: int, momentum: float = 0.0) -> "SgdState":
        return cls(learning_rate, momentum, np.zeros(n_params))


@dataclass(frozen=True, eq=False)
class AdamState:
    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float
    step_count: int
    first_moment: np.ndarray
    second_moment: np.ndarray

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.step_count < 0:
            raise ValueError("step_count must be non-negative")
        object.__setattr__(self, "first_moment", np.asarray(self.first_moment, dtype=np.float64))
        object.__setattr__(self, "second_moment", np.asarray(self.second_moment, dtype=np.float64))

    @classmethod
    def fresh(
        cls,
        learning_rate: float,
        n_params: int,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> "AdamState":
        return cls(learning_rate, beta1, beta2, epsilon, 0, np.zeros(n_params), np.zeros(n_params))


OptimizerState = SgdState | AdamState


def describe(opt: OptimizerState) -> str:
    """Short text descriptor of the rule and hyperparameters in force."""
    if isinstance(opt, SgdState):
        return f"sgd(lr={opt.learning_rate:g}, momentum={opt.momentum:g})"
    return (
        f"adam(lr={opt.learning_rate:g}, beta1={opt.beta1:g}, beta2={opt.beta2:g}, "
        f"epsilon={opt.epsilon:g}, step={opt.step_count})"
    )


def _check_grad(opt: OptimizerState, grad: np.ndarray) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    ref = opt.velocity if isinstance(opt, SgdState) else opt.first_moment
    if grad.shape != ref.shape:
        raise ValueError(f"gradient has shape {grad.shape}, state expects {ref.shape}")
    return grad


def _sgd_velocity(opt: SgdState, grad: np.ndarray) -> np.ndarray:
    return opt.momentum * opt.velocity + grad


def _adam_advance(opt: AdamState, grad: np.ndarray):
    """One hypothetical Adam step: (delta, new_m1, new_m2, new_step_count)."""
    m1 = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * grad
    m2 = opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * grad * grad
    t = opt.step_count + 1
    m1_hat = m1 / (1.0 - opt.beta1**t)
    m2_hat = m2 / (1.0 - opt.beta2**t)
    delta = -opt.learning_rate * m1_hat / (np.sqrt(m2_hat) + opt.epsilon)
    return delta, m1, m2, t


def preview_update(opt: OptimizerState, grad: np.ndarray) -> np.ndarray:
    """The update `step` would apply for this gradient; state is untouched."""
    grad = _check_grad(opt, grad)
    if isinstance(opt, SgdState):
        return -opt.learning_rate * _sgd_velocity(opt, grad)
    return _adam_advance(opt, grad)[0]


def step(opt: OptimizerState, model: Model, grad: np.ndarray) -> tuple[Model, OptimizerState]:
    """Apply one update. The applied delta equals preview_update bit for bit."""
    grad = _check_grad(opt, grad)
    if grad.shape != model.theta.shape:
        raise ValueError("gradient length does not match model theta")
    if isinstance(opt, SgdState):
        v = _sgd_velocity(opt, grad)
        delta = -opt.learning_rate * v
        new_opt: OptimizerState = replace(opt, velocity=v)
    else:
        delta, m1, m2, t = _adam_advance(opt, grad)
        new_opt = replace(opt, first_moment=m1, second_moment=m2, step_count=t)
    return Model(model.spec, model.theta + delta), new_opt

"""ADAM with bias correction over named parameter dictionaries."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from svct.errors import LayerShapeError
from svct.models import TrainConfig
from svct.nn_kit.tensor import TensorGrad


@dataclass
class AdamState:
    """First and second moments per parameter name plus the shared step count."""

    step: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(
            step=self.step,
            first={k: v.copy() for k, v in self.first.items()},
            second={k: v.copy() for k, v in self.second.items()},
        )


def adam_step(
    params: dict[str, TensorGrad],
    state: AdamState,
    config: TrainConfig,
    grads: Optional[dict[str, np.ndarray]] = None,
) -> AdamState:
    """Update params in place from their .grad (or an explicit grads dict).

    theta -= lr * m_hat / (sqrt(v_hat) + eps), with
    m_hat = m / (1 - beta1^t) and v_hat = v / (1 - beta2^t).
    """
    lr, beta1, beta2, eps = config.learning_rate, config.beta1, config.beta2, config.epsilon
    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for name, tensor in params.items():
        grad = tensor.grad if grads is None else grads[name]
        if grad.shape != tensor.value.shape:
            raise LayerShapeError(name, f"gradient shape {grad.shape} != parameter shape {tensor.value.shape}")
        m = state.first.get(name)
        v = state.second.get(name)
        if m is None:
            m = np.zeros_like(tensor.value)
            v = np.zeros_like(tensor.value)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        state.first[name] = m
        state.second[name] = v
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        tensor.value -= update.astype(tensor.value.dtype, copy=False)
    return state

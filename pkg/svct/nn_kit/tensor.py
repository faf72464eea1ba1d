"""Value/gradient pair used for parameters and layer boundaries."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class TensorGrad:
    """An n-d value array paired with a gradient array of identical shape."""

    value: np.ndarray
    grad: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise ValueError(
                f"gradient shape {self.grad.shape} differs from value shape {self.value.shape}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.value.shape)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def copy(self) -> "TensorGrad":
        return TensorGrad(self.value.copy(), self.grad.copy())

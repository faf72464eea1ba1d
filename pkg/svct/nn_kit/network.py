"""Executes a NetworkSpec: parameters, forward tape and reverse pass."""

import logging
from typing import Optional

import numpy as np

from svct.errors import BackwardBeforeForwardError, CheckpointMismatchError, LayerShapeError
from svct.models import NetworkSpec
from svct.nn_kit.layers import ConcatSkip, Layer, init_layer_params, make_layer
from svct.nn_kit.tensor import TensorGrad

logger = logging.getLogger(__name__)


class Network:
    """A layer list with skip connections, feature taps and an optional global residual.

    A single instance is not thread-safe: forward() records the tape the
    next backward() consumes.
    """

    def __init__(self, spec: NetworkSpec, seed: int = 0, dtype: str = "float64") -> None:
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.layers: list[Layer] = [
            make_layer(layer_spec, init_layer_params(layer_spec, rng, self.dtype))
            for layer_spec in spec.layers
        ]
        self.features: list[np.ndarray] = []
        self._input_shape: Optional[tuple[int, ...]] = None
        self._output_shape: Optional[tuple[int, ...]] = None

    # -- parameters -------------------------------------------------------

    def parameters(self) -> dict[str, TensorGrad]:
        return {
            f"{layer.name}.{key}": tensor
            for layer in self.layers
            for key, tensor in layer.params.items()
        }

    def buffers(self) -> dict[str, np.ndarray]:
        return {
            f"{layer.name}.{key}": value
            for layer in self.layers
            for key, value in layer.buffers.items()
        }

    def zero_grad(self) -> None:
        for tensor in self.parameters().values():
            tensor.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        """Copies of every parameter value and running statistic, keyed by name."""
        state = {name: tensor.value.copy() for name, tensor in self.parameters().items()}
        state.update({name: value.copy() for name, value in self.buffers().items()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        expected = set(params) | set(self.buffers())
        missing = sorted(expected - set(state))
        extra = sorted(set(state) - expected)
        if missing or extra:
            raise CheckpointMismatchError(
                f"checkpoint does not match {self.spec.role}: missing={missing[:5]} unexpected={extra[:5]}"
            )
        for layer in self.layers:
            for key, tensor in layer.params.items():
                value = np.asarray(state[f"{layer.name}.{key}"])
                if value.shape != tensor.value.shape:
                    raise CheckpointMismatchError(
                        f"{layer.name}.{key}: checkpoint shape {value.shape} != {tensor.value.shape}"
                    )
                tensor.value[...] = value
            for key in list(layer.buffers):
                value = np.asarray(state[f"{layer.name}.{key}"])
                if value.shape != layer.buffers[key].shape:
                    raise CheckpointMismatchError(
                        f"{layer.name}.{key}: checkpoint shape {value.shape} != {layer.buffers[key].shape}"
                    )
                layer.buffers[key] = value.astype(layer.buffers[key].dtype, copy=True)

    # -- passes -----------------------------------------------------------

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise LayerShapeError(
                self.spec.role,
                f"expected input (N, {self.spec.in_channels}, H, W), got {x.shape}",
            )
        multiple = self.spec.spatial_multiple
        if x.shape[2] % multiple or x.shape[3] % multiple:
            raise LayerShapeError(
                self.spec.role,
                f"input height and width must be divisible by {multiple} "
                f"({int(np.log2(multiple))} 2x resamplings), got {x.shape[2]}x{x.shape[3]}",
            )

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        """Run the network; feature-tapped activations land in self.features."""
        x = np.asarray(x, dtype=self.dtype)
        self._check_input(x)
        saved: dict[str, np.ndarray] = {}
        self.features = []
        h = x
        for layer in self.layers:
            if isinstance(layer, ConcatSkip):
                h = layer.forward(h, training, skip=saved.get(layer.spec.skip_from))
            else:
                h = layer.forward(h, training)
            if layer.spec.save_as:
                saved[layer.spec.save_as] = h
            if layer.spec.feature:
                self.features.append(h)
        rc = self.spec.residual_channel
        if rc is not None:
            h = h + x[:, rc:rc + 1]
        self._input_shape = x.shape
        self._output_shape = h.shape
        return h

    def backward(
        self,
        grad_out: Optional[np.ndarray] = None,
        feature_grads: Optional[list[Optional[np.ndarray]]] = None,
    ) -> np.ndarray:
        """Reverse pass; returns the gradient with respect to the input.

        feature_grads[j] (if given) is added to the gradient arriving at the
        j-th feature tap, which is how feature-space losses reach the input.
        """
        if self._input_shape is None:
            raise BackwardBeforeForwardError(f"{self.spec.role}: backward called without a forward pass")
        if grad_out is None:
            grad_out = np.zeros(self._output_shape, dtype=self.dtype)
        grad_out = np.asarray(grad_out, dtype=self.dtype)
        tap_positions = [i for i, layer in enumerate(self.layers) if layer.spec.feature]
        tap_grads: dict[int, np.ndarray] = {}
        if feature_grads is not None:
            if len(feature_grads) != len(tap_positions):
                raise LayerShapeError(
                    self.spec.role,
                    f"{len(feature_grads)} feature gradients for {len(tap_positions)} feature taps",
                )
            tap_grads = {
                pos: g for pos, g in zip(tap_positions, feature_grads) if g is not None
            }

        pending: dict[str, np.ndarray] = {}
        g = grad_out
        for index in reversed(range(len(self.layers))):
            layer = self.layers[index]
            if index in tap_grads:
                g = g + tap_grads[index]
            if layer.spec.save_as and layer.spec.save_as in pending:
                g = g + pending.pop(layer.spec.save_as)
            if isinstance(layer, ConcatSkip):
                g, skip_grad = layer.backward(g)
                key = layer.spec.skip_from
                pending[key] = pending[key] + skip_grad if key in pending else skip_grad
            else:
                g = layer.backward(g)

        rc = self.spec.residual_channel
        if rc is not None:
            g = g.copy()
            g[:, rc:rc + 1] += grad_out
        self._input_shape = None
        return g

    def __call__(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        return self.forward(x, training)

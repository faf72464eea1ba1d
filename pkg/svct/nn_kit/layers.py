"""Layer implementations with explicit forward and backward passes.

Tensors are laid out (batch, channels, height, width). Each layer keeps
the cache of its most recent forward call; backward() consumes it and
accumulates parameter gradients into the layer's TensorGrad objects
(callers zero them between optimizer steps).
"""

from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.special
from numpy.lib.stride_tricks import sliding_window_view

from svct.errors import BackwardBeforeForwardError, LayerShapeError
from svct.models import LayerSpec
from svct.nn_kit.tensor import TensorGrad

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1


class Layer:
    """Base class: shape checks and the forward-before-backward contract."""

    def __init__(self, spec: LayerSpec, params: Optional[dict[str, TensorGrad]] = None) -> None:
        self.spec = spec
        self.params: dict[str, TensorGrad] = params or {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    @property
    def name(self) -> str:
        return self.spec.name

    def _check_rank(self, x: np.ndarray) -> None:
        if x.ndim != 4:
            raise LayerShapeError(self.name, f"expected a 4-D (N, C, H, W) input, got shape {x.shape}")

    def _check_channels(self, x: np.ndarray, channels: int) -> None:
        self._check_rank(x)
        if x.shape[1] != channels:
            raise LayerShapeError(self.name, f"expected {channels} input channels, got {x.shape[1]}")

    def _take_cache(self):
        if self._cache is None:
            raise BackwardBeforeForwardError(f"layer '{self.name}': backward called without a forward pass")
        cache, self._cache = self._cache, None
        return cache

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv2d(Layer):
    """Zero-padded cross-correlation; stride 1 keeps the spatial size."""

    @staticmethod
    def init_params(spec: LayerSpec, rng: np.random.Generator, dtype) -> dict[str, TensorGrad]:
        shape = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
        if spec.zero_init:
            weight = np.zeros(shape, dtype=dtype)
        else:
            fan_in = spec.in_channels * spec.kernel * spec.kernel
            bound = np.sqrt(6.0 / fan_in)
            weight = rng.uniform(-bound, bound, size=shape).astype(dtype)
        bias = np.zeros(spec.out_channels, dtype=dtype)
        return {"weight": TensorGrad(weight), "bias": TensorGrad(bias)}

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        self._check_channels(x, self.spec.in_channels)
        k, s, p = self.spec.kernel, self.spec.stride, self.spec.padding
        if x.shape[2] + 2 * p < k or x.shape[3] + 2 * p < k:
            raise LayerShapeError(self.name, f"input {x.shape[2:]} smaller than kernel {k}")
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        weight = self.params["weight"].value
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        out = out + self.params["bias"].value[None, :, None, None]
        self._cache = (xp.shape, windows)
        return np.ascontiguousarray(out)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        padded_shape, windows = self._take_cache()
        k, s, p = self.spec.kernel, self.spec.stride, self.spec.padding
        weight = self.params["weight"].value
        self.params["weight"].grad += np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        self.params["bias"].grad += grad.sum(axis=(0, 2, 3))

        out_h, out_w = grad.shape[2], grad.shape[3]
        # (N, Ho, Wo, C, k, k): contribution of each output to each window tap
        cols = np.tensordot(grad, weight, axes=([1], [0]))
        dxp = np.zeros(padded_shape, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + s * (out_h - 1) + 1:s, j:j + s * (out_w - 1) + 1:s] += (
                    cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        height, width = padded_shape[2] - 2 * p, padded_shape[3] - 2 * p
        return dxp[:, :, p:p + height, p:p + width]


class AvgPool2(Layer):
    """2x2 mean pooling with stride 2."""

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        self._check_rank(x)
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise LayerShapeError(self.name, f"avg_pool2 needs even height and width, got {h}x{w}")
        self._cache = True
        return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self._take_cache()
        return np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) / 4.0


@lru_cache(maxsize=32)
def upsample_matrix(n: int) -> np.ndarray:
    """(2n x n) linear interpolation matrix, half-pixel (align_corners=False) convention."""
    matrix = np.zeros((2 * n, n), dtype=np.float64)
    for out in range(2 * n):
        src = max((out + 0.5) / 2.0 - 0.5, 0.0)
        lower = min(int(np.floor(src)), n - 1)
        frac = src - lower
        upper = min(lower + 1, n - 1)
        matrix[out, lower] += 1.0 - frac
        matrix[out, upper] += frac
    matrix.setflags(write=False)
    return matrix


class BilinearUp2(Layer):
    """Separable bilinear 2x upsampling."""

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        self._check_rank(x)
        rows = upsample_matrix(x.shape[2]).astype(x.dtype)
        cols = upsample_matrix(x.shape[3]).astype(x.dtype)
        self._cache = (rows, cols)
        return rows @ x @ cols.T

    def backward(self, grad: np.ndarray) -> np.ndarray:
        rows, cols = self._take_cache()
        return rows.T @ grad @ cols


class ReLU(Layer):
    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        mask = x > 0
        self._cache = mask
        return x * mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self._take_cache()


class LeakyReLU(Layer):
    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        mask = x > 0
        self._cache = mask
        return np.where(mask, x, self.spec.slope * x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        mask = self._take_cache()
        return np.where(mask, grad, self.spec.slope * grad)


class Sigmoid(Layer):
    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        out = scipy.special.expit(x)
        self._cache = out
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        out = self._take_cache()
        return grad * out * (1.0 - out)


class BatchNorm(Layer):
    """Per-channel normalization over batch and space.

    Training mode uses batch statistics and updates the running
    estimates; inference mode uses the running estimates only, so its
    output does not depend on the batch composition.
    """

    @staticmethod
    def init_params(spec: LayerSpec, rng: np.random.Generator, dtype) -> dict[str, TensorGrad]:
        channels = spec.in_channels
        return {
            "gamma": TensorGrad(np.ones(channels, dtype=dtype)),
            "beta": TensorGrad(np.zeros(channels, dtype=dtype)),
        }

    def __init__(self, spec: LayerSpec, params: Optional[dict[str, TensorGrad]] = None) -> None:
        super().__init__(spec, params)
        dtype = self.params["gamma"].value.dtype if "gamma" in self.params else np.float64
        self.buffers = {
            "running_mean": np.zeros(spec.in_channels, dtype=dtype),
            "running_var": np.ones(spec.in_channels, dtype=dtype),
        }

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        self._check_channels(x, self.spec.in_channels)
        gamma = self.params["gamma"].value[None, :, None, None]
        beta = self.params["beta"].value[None, :, None, None]
        if training:
            count = x.shape[0] * x.shape[2] * x.shape[3]
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            unbiased = var * count / (count - 1) if count > 1 else var
            self.buffers["running_mean"] = (
                (1.0 - BN_MOMENTUM) * self.buffers["running_mean"] + BN_MOMENTUM * mean
            ).astype(x.dtype)
            self.buffers["running_var"] = (
                (1.0 - BN_MOMENTUM) * self.buffers["running_var"] + BN_MOMENTUM * unbiased
            ).astype(x.dtype)
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self._cache = (xhat, inv_std, training)
        return gamma * xhat + beta

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xhat, inv_std, training = self._take_cache()
        gamma = self.params["gamma"].value
        self.params["gamma"].grad += (grad * xhat).sum(axis=(0, 2, 3))
        self.params["beta"].grad += grad.sum(axis=(0, 2, 3))
        dxhat = grad * gamma[None, :, None, None]
        scale = inv_std[None, :, None, None]
        if not training:
            return dxhat * scale
        count = grad.shape[0] * grad.shape[2] * grad.shape[3]
        mean_dxhat = dxhat.sum(axis=(0, 2, 3), keepdims=True) / count
        mean_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True) / count
        return scale * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)


class ConcatSkip(Layer):
    """Channel concatenation [input, stored skip activation]."""

    def forward(self, x: np.ndarray, training: bool = True, skip: Optional[np.ndarray] = None) -> np.ndarray:
        self._check_rank(x)
        if skip is None:
            raise LayerShapeError(self.name, f"no stored activation '{self.spec.skip_from}'")
        if skip.shape[0] != x.shape[0] or skip.shape[2:] != x.shape[2:]:
            raise LayerShapeError(
                self.name, f"cannot concatenate {x.shape} with skip {skip.shape}"
            )
        self._cache = x.shape[1]
        return np.concatenate([x, skip], axis=1)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        split = self._take_cache()
        return grad[:, :split], grad[:, split:]


LAYER_TYPES: dict[str, type[Layer]] = {
    "conv2d": Conv2d,
    "avg_pool2": AvgPool2,
    "bilinear_up2": BilinearUp2,
    "relu": ReLU,
    "leaky_relu": LeakyReLU,
    "batch_norm": BatchNorm,
    "sigmoid": Sigmoid,
    "concat_skip": ConcatSkip,
}


def init_layer_params(spec: LayerSpec, rng: np.random.Generator, dtype=np.float64) -> dict[str, TensorGrad]:
    """Fresh parameters for a layer (empty for parameter-free kinds)."""
    layer_type = LAYER_TYPES[spec.kind]
    init = getattr(layer_type, "init_params", None)
    return init(spec, rng, dtype) if init else {}


def make_layer(spec: LayerSpec, params: Optional[dict[str, TensorGrad]] = None) -> Layer:
    return LAYER_TYPES[spec.kind](spec, params)


def layer_forward(layer: Layer, inputs: TensorGrad, training: bool = True) -> TensorGrad:
    """Run one layer on a TensorGrad; the output's gradient starts at zero."""
    return TensorGrad(layer.forward(inputs.value, training=training))


def layer_backward(layer: Layer, upstream: TensorGrad) -> TensorGrad:
    """Gradient with respect to the layer input; parameter gradients accumulate in place."""
    grad_in = layer.backward(upstream.grad)
    if isinstance(grad_in, tuple):
        grad_in = grad_in[0]
    return TensorGrad(np.zeros_like(grad_in), grad_in)

"""Central finite-difference gradient checks.

gradient_check() compares an analytic gradient with central differences
of a scalar function. run_gradient_suite() applies it to every layer
kind and every loss on small seeded float64 shapes; the `gradcheck`
command and the test suite both consume it.

Errors are norm-wise: ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||).
"""

import logging
from typing import Callable, NamedTuple, Optional

import numpy as np

from svct.filtering import ramp_kernel
from svct.losses import (
    adv_loss_discriminator,
    adv_loss_generator,
    content_loss,
    dp_loss,
    generator_objective,
    hf_loss,
    local_adv_losses,
)
from svct.models import LayerSpec, LossWeights
from svct.nn_kit.builders import build_patch_discriminator, build_unet
from svct.nn_kit.layers import Layer, init_layer_params, make_layer
from svct.nn_kit.network import Network

logger = logging.getLogger(__name__)

TOLERANCE = 1e-3
STEP = 1e-6


class GradCheckResult(NamedTuple):
    name: str
    rel_error: float
    passed: bool


def numeric_gradient(
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    indices: Optional[list[tuple[int, ...]]] = None,
    eps: float = STEP,
) -> np.ndarray:
    """Central differences of fn at x, for every entry or for `indices` only."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    targets = indices if indices is not None else list(np.ndindex(x.shape))
    for idx in targets:
        saved = x[idx]
        x[idx] = saved + eps
        upper = fn(x)
        x[idx] = saved - eps
        lower = fn(x)
        x[idx] = saved
        grad[idx] = (upper - lower) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradient_check(
    name: str,
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic: np.ndarray,
    indices: Optional[list[tuple[int, ...]]] = None,
    tolerance: float = TOLERANCE,
) -> GradCheckResult:
    numeric = numeric_gradient(fn, x, indices)
    if indices is not None:
        mask = np.zeros(x.shape, dtype=bool)
        for idx in indices:
            mask[idx] = True
        analytic = np.where(mask, analytic, 0.0)
    error = relative_error(np.asarray(analytic, dtype=np.float64), numeric)
    return GradCheckResult(name, error, error <= tolerance)


def _away_from_zero(rng: np.random.Generator, shape, low: float = 0.1) -> np.ndarray:
    """Values with |v| >= low so kinks (relu, |.|) are never straddled."""
    return rng.uniform(low, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


# -- layers --------------------------------------------------------------


def check_layer(
    name: str,
    spec: LayerSpec,
    x: np.ndarray,
    rng: np.random.Generator,
    training: bool = True,
    skip: Optional[np.ndarray] = None,
) -> list[GradCheckResult]:
    """Input and parameter gradients of one layer under a random linear read-out."""
    layer: Layer = make_layer(spec, init_layer_params(spec, rng, np.float64))
    if "gamma" in layer.params:
        layer.params["gamma"].value[...] = rng.uniform(0.5, 1.5, size=layer.params["gamma"].shape)
        layer.params["beta"].value[...] = rng.normal(size=layer.params["beta"].shape)
    if spec.kind == "batch_norm" and not training:
        layer.buffers["running_mean"] = rng.normal(size=spec.in_channels)
        layer.buffers["running_var"] = rng.uniform(0.5, 2.0, size=spec.in_channels)

    def run(inp: np.ndarray) -> np.ndarray:
        if spec.kind == "concat_skip":
            return layer.forward(inp, training, skip=skip)
        return layer.forward(inp, training)

    readout = rng.normal(size=run(x).shape)
    grad_in = layer.backward(readout)
    if isinstance(grad_in, tuple):
        grad_in = grad_in[0]
    results = [gradient_check(f"{name} input", lambda v: float(np.sum(run(v) * readout)), x, grad_in)]

    for key, tensor in layer.params.items():
        tensor.zero_grad()
        run(x)
        layer.backward(readout)
        analytic = tensor.grad.copy()

        def through_param(value: np.ndarray, tensor=tensor) -> float:
            saved = tensor.value.copy()
            tensor.value[...] = value
            out = float(np.sum(run(x) * readout))
            tensor.value[...] = saved
            return out

        results.append(gradient_check(f"{name} {key}", through_param, tensor.value.copy(), analytic))
    return results


def layer_suite(rng: np.random.Generator) -> list[GradCheckResult]:
    shape = (2, 3, 8, 8)
    results: list[GradCheckResult] = []
    results += check_layer(
        "conv3", LayerSpec(kind="conv2d", name="conv3", kernel=3, in_channels=3, out_channels=2),
        rng.normal(size=shape), rng,
    )
    results += check_layer(
        "conv4-s2",
        LayerSpec(kind="conv2d", name="conv4", kernel=4, stride=2, in_channels=3, out_channels=2),
        rng.normal(size=shape), rng,
    )
    results += check_layer("avg_pool2", LayerSpec(kind="avg_pool2", name="pool"), rng.normal(size=shape), rng)
    results += check_layer("bilinear_up2", LayerSpec(kind="bilinear_up2", name="up"), rng.normal(size=(2, 3, 4, 4)), rng)
    results += check_layer("relu", LayerSpec(kind="relu", name="relu"), _away_from_zero(rng, shape), rng)
    results += check_layer(
        "leaky_relu", LayerSpec(kind="leaky_relu", name="leaky", slope=0.2), _away_from_zero(rng, shape), rng
    )
    results += check_layer("sigmoid", LayerSpec(kind="sigmoid", name="sigmoid"), rng.normal(size=shape), rng)
    results += check_layer(
        "batch_norm (train)", LayerSpec(kind="batch_norm", name="bn", in_channels=3), rng.normal(size=shape), rng
    )
    results += check_layer(
        "batch_norm (eval)", LayerSpec(kind="batch_norm", name="bn", in_channels=3),
        rng.normal(size=shape), rng, training=False,
    )
    results += check_layer(
        "concat_skip", LayerSpec(kind="concat_skip", name="cat", skip_from="enc"),
        rng.normal(size=(2, 2, 4, 4)), rng, skip=rng.normal(size=(2, 3, 4, 4)),
    )
    return results


# -- networks ------------------------------------------------------------


def network_input_check(name: str, net: Network, x: np.ndarray, rng: np.random.Generator) -> GradCheckResult:
    readout = rng.normal(size=net.forward(x).shape)
    analytic = net.backward(readout)
    return gradient_check(name, lambda v: float(np.sum(net.forward(v) * readout)), x, analytic)


def network_parameter_check(
    name: str, net: Network, x: np.ndarray, rng: np.random.Generator, samples: int = 3, eps: float = STEP
) -> GradCheckResult:
    """Spot-check `samples` randomly chosen scalar parameters.

    Pass a smaller eps for large inputs, where many ReLUs sit near their kink.
    """
    readout = rng.normal(size=net.forward(x).shape)
    net.zero_grad()
    net.forward(x)
    net.backward(readout)
    params = net.parameters()
    names = sorted(n for n in params if n.endswith(".weight"))
    analytic, numeric = [], []
    for _ in range(samples):
        tensor = params[names[int(rng.integers(len(names)))]]
        idx = tuple(int(rng.integers(d)) for d in tensor.shape)
        analytic.append(float(tensor.grad[idx]))
        saved = float(tensor.value[idx])
        tensor.value[idx] = saved + eps
        upper = float(np.sum(net.forward(x) * readout))
        tensor.value[idx] = saved - eps
        lower = float(np.sum(net.forward(x) * readout))
        tensor.value[idx] = saved
        numeric.append((upper - lower) / (2.0 * eps))
    error = relative_error(np.asarray(analytic), np.asarray(numeric))
    return GradCheckResult(name, error, error <= TOLERANCE)


def network_suite(rng: np.random.Generator) -> list[GradCheckResult]:
    disc = Network(build_patch_discriminator(in_channels=1, base_channels=4), seed=1)
    unet = Network(build_unet(base_channels=2, in_channels=1, role="sin_generator"), seed=2)
    return [
        network_input_check("patch discriminator input", disc, rng.normal(size=(2, 1, 16, 16)), rng),
        network_parameter_check("u-net parameters", unet, rng.normal(size=(2, 1, 16, 32)), rng),
    ]


# -- losses --------------------------------------------------------------


def loss_suite(rng: np.random.Generator) -> list[GradCheckResult]:
    results: list[GradCheckResult] = []

    pred = rng.normal(size=(2, 1, 8, 8))
    target = pred + _away_from_zero(rng, pred.shape, low=0.05)
    results.append(gradient_check(
        "content loss", lambda v: content_loss(v, target).value, pred, content_loss(pred, target).grad
    ))

    sino = rng.normal(size=(16, 12))
    sino_target = rng.normal(size=(16, 12))
    kernel = ramp_kernel(15)
    results.append(gradient_check(
        "high-frequency loss", lambda v: hf_loss(v, sino_target, kernel).value, sino,
        hf_loss(sino, sino_target, kernel).grad,
    ))

    shapes = [(1, 2, 4, 4), (1, 3, 2, 2)]
    feats = [rng.normal(size=s) for s in shapes]
    targets = [rng.normal(size=s) for s in shapes]
    dp = dp_loss(feats, targets)
    for j in range(len(shapes)):
        def layer_j(v, j=j):
            swapped = list(feats)
            swapped[j] = v
            return dp_loss(swapped, targets).value
        results.append(gradient_check(f"perceptual loss layer {j}", layer_j, feats[j], dp.grads[j]))

    d_real = rng.uniform(0.05, 0.95, size=(1, 1, 4, 4))
    d_fake = rng.uniform(0.05, 0.95, size=(1, 1, 4, 4))
    d_loss = adv_loss_discriminator(d_real, d_fake)
    results.append(gradient_check(
        "adversarial D (real)", lambda v: adv_loss_discriminator(v, d_fake).value, d_real, d_loss.grad_real
    ))
    results.append(gradient_check(
        "adversarial D (fake)", lambda v: adv_loss_discriminator(d_real, v).value, d_fake, d_loss.grad_fake
    ))
    results.append(gradient_check(
        "adversarial G", lambda v: adv_loss_generator(v).value, d_fake, adv_loss_generator(d_fake).grad
    ))

    disc_local = Network(build_patch_discriminator(base_channels=4), seed=3)
    big_pred = rng.normal(size=(2, 1, 16, 32))
    big_target = rng.normal(size=(2, 1, 16, 32))
    local = local_adv_losses(big_pred, big_target, disc_local, rng=7)
    results.append(gradient_check(
        "local adversarial G",
        lambda v: local_adv_losses(v, big_target, disc_local, rng=7).g_loss,
        big_pred, local.grad_pred,
        indices=_window_indices(big_pred.shape, local.offset, (4, 8), rng),
    ))

    results += objective_suite(rng)
    return results


def _window_indices(shape, offset, size, rng: np.random.Generator, count: int = 24) -> list[tuple[int, ...]]:
    """Random entries, half inside the patch window and half anywhere."""
    picks = []
    for i in range(count):
        n, c = int(rng.integers(shape[0])), int(rng.integers(shape[1]))
        if i % 2 == 0:
            row = offset[0] + int(rng.integers(size[0]))
            col = offset[1] + int(rng.integers(size[1]))
        else:
            row, col = int(rng.integers(shape[2])), int(rng.integers(shape[3]))
        picks.append((n, c, row, col))
    return sorted(set(picks))


def objective_suite(rng: np.random.Generator) -> list[GradCheckResult]:
    """Weighted generator totals through both discriminators."""
    weights = LossWeights()
    results = []
    for kind in ("sin", "prn"):
        disc = Network(build_patch_discriminator(base_channels=4), seed=4)
        disc_local = Network(build_patch_discriminator(base_channels=4), seed=5)
        pred = rng.normal(size=(2, 1, 16, 16))
        target = pred + _away_from_zero(rng, pred.shape, low=0.05)

        def total(v, kind=kind, disc=disc, disc_local=disc_local, target=target):
            return generator_objective(v, target, disc, weights, kind, disc_local=disc_local, rng=11).total

        analytic = generator_objective(pred, target, disc, weights, kind, disc_local=disc_local, rng=11).grad
        indices = sorted({tuple(int(rng.integers(d)) for d in pred.shape) for _ in range(40)})
        results.append(gradient_check(f"{kind} objective", total, pred, analytic, indices=indices))
    return results


def run_gradient_suite(seed: int = 0) -> list[GradCheckResult]:
    """Every layer kind, both network builders and every loss."""
    rng = np.random.default_rng(seed)
    results = layer_suite(rng) + network_suite(rng) + loss_suite(rng)
    for result in results:
        logger.debug("gradcheck %-32s rel=%.2e %s", result.name, result.rel_error, "ok" if result.passed else "FAIL")
    return results

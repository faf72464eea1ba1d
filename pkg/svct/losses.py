"""Training objectives for the sinogram and refinement generators.

Every term returns its value together with the gradient with respect to
the generated tensor, so the trainer can push one combined gradient back
through the generator:

  - content:        mean |pred - target|
  - high-frequency: content loss after ramp filtering along the detector axis
  - perceptual:     layer-averaged MSE between discriminator activations
  - adversarial:    saturating GAN losses on patch probability maps,
                    global and (sinogram stage only) local

Reductions are means, so the default weights (1, 50, 20, 50) hold at any
resolution. Probabilities are clamped to [eps, 1 - eps] before the log;
clamped entries receive zero gradient.
"""

import logging
from typing import Literal, NamedTuple, Optional, Sequence, Union

import numpy as np

from svct.errors import LossInputError
from svct.filtering import ramp_kernel, ramp_matrix
from svct.models import LossWeights, RampKernel
from svct.nn_kit.builders import extract_features, random_patch
from svct.nn_kit.network import Network
from svct.nn_kit.tensor import TensorGrad

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-7

ArrayLike = Union[TensorGrad, np.ndarray]


class LossTerm(NamedTuple):
    """Scalar loss and its gradient with respect to the first argument."""
    value: float
    grad: np.ndarray


class FeatureLossTerm(NamedTuple):
    """Scalar loss and one gradient per feature layer."""
    value: float
    grads: list[np.ndarray]


class DiscriminatorLoss(NamedTuple):
    value: float
    grad_real: np.ndarray
    grad_fake: np.ndarray


class LocalAdversarial(NamedTuple):
    """Local adversarial terms on one shared random window."""
    g_loss: float
    d_loss: float
    grad_pred: np.ndarray
    offset: tuple[int, int]


class ObjectiveParts(NamedTuple):
    adv: float = 0.0
    content: float = 0.0
    dp: float = 0.0
    hf: float = 0.0


class GeneratorObjective(NamedTuple):
    total: float
    parts: ObjectiveParts
    grad: np.ndarray


def _values(*tensors: ArrayLike) -> list[np.ndarray]:
    return [np.asarray(t.value if isinstance(t, TensorGrad) else t, dtype=np.float64) for t in tensors]


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise LossInputError(f"{what}: shapes differ, {a.shape} vs {b.shape}")


# -- reconstruction terms ------------------------------------------------


def content_loss(pred: ArrayLike, target: ArrayLike) -> LossTerm:
    """Mean absolute difference; gradient sign(pred - target) / count."""
    p, t = _values(pred, target)
    _same_shape(p, t, "content loss")
    diff = p - t
    return LossTerm(float(np.abs(diff).mean()), np.sign(diff) / diff.size)


def hf_loss(pred_sino: ArrayLike, target_sino: ArrayLike, kernel: Optional[RampKernel] = None) -> LossTerm:
    """L1 distance of ramp-filtered sinograms.

    Detector axis is axis -2 (sinograms are detector x angle). The default
    kernel has full support (half width S - 1) and unit spacing, matching
    apply_ramp.
    """
    p, t = _values(pred_sino, target_sino)
    _same_shape(p, t, "high-frequency loss")
    if p.ndim < 2:
        raise LossInputError(f"high-frequency loss needs sinogram-shaped input, got {p.shape}")
    detectors = p.shape[-2]
    if kernel is None:
        kernel = ramp_kernel(max(detectors - 1, 1))
    matrix = ramp_matrix(kernel, detectors)
    inner = content_loss(matrix @ p, matrix @ t)
    return LossTerm(inner.value, matrix.T @ inner.grad)


def dp_loss(features_pred: Sequence[ArrayLike], features_target: Sequence[ArrayLike]) -> FeatureLossTerm:
    """Discriminator-perceptual loss: (1/N) sum_j mean((phi_j(pred) - phi_j(target))^2).

    The target branch is a constant; gradients are returned for the
    predicted features only.
    """
    if len(features_pred) != len(features_target):
        raise LossInputError(
            f"perceptual loss got {len(features_pred)} predicted and {len(features_target)} target layers"
        )
    if not features_pred:
        raise LossInputError("perceptual loss needs at least one feature layer")
    count = len(features_pred)
    total = 0.0
    grads = []
    for j, (fp, ft) in enumerate(zip(features_pred, features_target)):
        a, b = _values(fp, ft)
        _same_shape(a, b, f"perceptual loss layer {j}")
        diff = a - b
        total += float(np.mean(diff**2))
        grads.append(2.0 * diff / (count * diff.size))
    return FeatureLossTerm(total / count, grads)


# -- adversarial terms ---------------------------------------------------


def _check_probabilities(p: np.ndarray, what: str) -> None:
    if p.size == 0:
        raise LossInputError(f"{what}: empty probability map")
    if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise LossInputError(f"{what}: probabilities must lie in [0, 1]")


def _log_and_slope(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    clipped = np.clip(p, LOG_CLAMP, 1.0 - LOG_CLAMP)
    active = clipped == p
    return np.log(clipped), np.where(active, 1.0 / clipped, 0.0)


def _log1m_and_slope(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    clipped = np.clip(p, LOG_CLAMP, 1.0 - LOG_CLAMP)
    active = clipped == p
    return np.log1p(-clipped), np.where(active, -1.0 / (1.0 - clipped), 0.0)


def real_term(d_real: np.ndarray) -> LossTerm:
    """-1/2 mean log D(real)."""
    logs, slope = _log_and_slope(d_real)
    return LossTerm(float(-0.5 * logs.mean()), -0.5 * slope / d_real.size)


def fake_term(d_fake: np.ndarray) -> LossTerm:
    """-1/2 mean log(1 - D(fake))."""
    logs, slope = _log1m_and_slope(d_fake)
    return LossTerm(float(-0.5 * logs.mean()), -0.5 * slope / d_fake.size)


def adv_loss_discriminator(d_real: ArrayLike, d_fake: ArrayLike) -> DiscriminatorLoss:
    """-1/2 (mean log D(real) + mean log(1 - D(fake))), minimized by the discriminator."""
    r, f = _values(d_real, d_fake)
    _check_probabilities(r, "discriminator loss (real)")
    _check_probabilities(f, "discriminator loss (fake)")
    real, fake = real_term(r), fake_term(f)
    return DiscriminatorLoss(real.value + fake.value, real.grad, fake.grad)


def adv_loss_generator(d_fake: ArrayLike) -> LossTerm:
    """mean log(1 - D(G(x))), minimized by the generator; bounded above by 0."""
    (f,) = _values(d_fake)
    _check_probabilities(f, "generator adversarial loss")
    logs, slope = _log1m_and_slope(f)
    return LossTerm(float(logs.mean()), slope / f.size)


def local_adv_losses(
    pred: ArrayLike,
    target: ArrayLike,
    disc_local: Network,
    rng: Union[np.random.Generator, int],
    training: bool = True,
) -> LocalAdversarial:
    """Adversarial losses on a shared floor(H/4) x floor(W/4) window.

    grad_pred is the generator loss gradient scattered back into a
    full-size zero array. Discriminator parameter gradients accumulated
    here belong to the generator pass and are discarded by the caller.
    """
    p, t = _values(pred, target)
    _same_shape(p, t, "local adversarial loss")
    patch_pred, patch_target, (row, col) = random_patch((p, t), rng)
    d_real = disc_local.forward(patch_target, training=training)
    d_fake = disc_local.forward(patch_pred, training=training)
    g_term = adv_loss_generator(d_fake)
    d_loss = adv_loss_discriminator(d_real, d_fake)
    patch_grad = disc_local.backward(g_term.grad)

    grad_pred = np.zeros_like(p)
    height, width = patch_pred.shape[-2:]
    grad_pred[..., row:row + height, col:col + width] = patch_grad
    return LocalAdversarial(g_term.value, d_loss.value, grad_pred, (row, col))


# -- totals --------------------------------------------------------------


def sin_objective(parts: ObjectiveParts, weights: LossWeights) -> float:
    """lambda1 adv + lambda2 content + lambda3 dp + lambda4 hf."""
    return (
        weights.adv * parts.adv
        + weights.content * parts.content
        + weights.dp * parts.dp
        + weights.hf * parts.hf
    )


def prn_objective(parts: ObjectiveParts, weights: LossWeights) -> float:
    """Refinement total; the high-frequency term does not apply to images."""
    return weights.adv * parts.adv + weights.content * parts.content + weights.dp * parts.dp


def generator_objective(
    pred: ArrayLike,
    target: ArrayLike,
    disc_global: Network,
    weights: LossWeights,
    kind: Literal["sin", "prn"],
    kernel: Optional[RampKernel] = None,
    disc_local: Optional[Network] = None,
    rng: Union[np.random.Generator, int, None] = None,
    use_dp: bool = True,
    use_hf: bool = True,
    use_local: bool = True,
    training: bool = True,
) -> GeneratorObjective:
    """Weighted generator loss and its gradient with respect to pred.

    Perceptual features come from the global discriminator. The local
    adversarial term (sinogram stage only) is added to the global one with
    equal weight.
    """
    p, t = _values(pred, target)
    _same_shape(p, t, "generator objective")

    # 1. Pixel terms
    content = content_loss(p, t)
    grad = weights.content * content.grad
    hf_value = 0.0
    if kind == "sin" and use_hf:
        hf = hf_loss(p, t, kernel)
        hf_value = hf.value
        grad = grad + weights.hf * hf.grad

    # 2. Target features are constants
    target_features = [f.value for f in extract_features(disc_global, t, training)] if use_dp else None

    # 3. Global adversarial and perceptual terms through one backward pass
    d_fake = disc_global.forward(p, training=training)
    adv = adv_loss_generator(d_fake)
    dp_value = 0.0
    feature_grads = None
    if use_dp:
        dp = dp_loss([f.copy() for f in disc_global.features], target_features)
        dp_value = dp.value
        feature_grads = [weights.dp * g for g in dp.grads]
    grad = grad + disc_global.backward(weights.adv * adv.grad, feature_grads=feature_grads)
    adv_value = adv.value

    # 4. Local adversarial term
    if kind == "sin" and use_local and disc_local is not None:
        if rng is None:
            raise LossInputError("local adversarial loss needs a random generator or seed")
        local = local_adv_losses(p, t, disc_local, rng, training=training)
        adv_value += local.g_loss
        grad = grad + weights.adv * local.grad_pred

    parts = ObjectiveParts(adv=adv_value, content=content.value, dp=dp_value, hf=hf_value)
    total = sin_objective(parts, weights) if kind == "sin" else prn_objective(parts, weights)
    return GeneratorObjective(total, parts, grad)


def discriminator_step_loss(disc: Network, real: ArrayLike, fake: ArrayLike, training: bool = True) -> float:
    """L_adv(D) on one (real, fake) batch; parameter gradients accumulate in disc.

    The fake batch is treated as a constant (no gradient reaches the
    generator).
    """
    r, f = _values(real, fake)
    _same_shape(r, f, "discriminator step")
    d_real = disc.forward(r, training=training)
    _check_probabilities(d_real, "discriminator loss (real)")
    real = real_term(d_real)
    disc.backward(real.grad)

    d_fake = disc.forward(f, training=training)
    _check_probabilities(d_fake, "discriminator loss (fake)")
    fake_part = fake_term(d_fake)
    disc.backward(fake_part.grad)
    return real.value + fake_part.value

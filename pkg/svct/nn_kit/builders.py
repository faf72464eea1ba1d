"""Builders for the adapted U-Net, the patch discriminator and their helpers.

U-Net: four {double-conv -> avg_pool2} encoder stages, a double-conv
bottleneck, four {bilinear_up2 -> concat skip -> double-conv} decoder
stages and a final 3x3 conv. double-conv = 2 x (conv3 -> ReLU -> batch
norm). Resizing is done by pooling and bilinear layers only; there are
no strided or transposed convolutions in a generator.

Patch discriminator: conv3 s1 -> conv4 s2 -> conv4 s2 -> conv3 s1, with
LeakyReLU + batch norm after each hidden conv and a sigmoid on the
final map, so the output is a (H/4, W/4) grid of probabilities.
"""

from typing import Literal, Optional, Union

import numpy as np

from svct.models import LayerSpec, NetworkSpec
from svct.nn_kit.network import Network
from svct.nn_kit.tensor import TensorGrad

UNET_LEVELS = 4


def _double_conv(prefix: str, cin: int, cout: int, save_as: Optional[str] = None) -> list[LayerSpec]:
    return [
        LayerSpec(kind="conv2d", name=f"{prefix}.conv1", kernel=3, in_channels=cin, out_channels=cout),
        LayerSpec(kind="relu", name=f"{prefix}.relu1"),
        LayerSpec(kind="batch_norm", name=f"{prefix}.bn1", in_channels=cout),
        LayerSpec(kind="conv2d", name=f"{prefix}.conv2", kernel=3, in_channels=cout, out_channels=cout),
        LayerSpec(kind="relu", name=f"{prefix}.relu2"),
        LayerSpec(kind="batch_norm", name=f"{prefix}.bn2", in_channels=cout, save_as=save_as),
    ]


def build_unet(
    base_channels: int,
    in_channels: int,
    out_channels: int = 1,
    role: Literal["sin_generator", "prn_generator"] = "sin_generator",
    max_channels: int = 512,
    residual_channel: Optional[int] = None,
) -> NetworkSpec:
    """Adapted U-Net; inputs must have height and width divisible by 16.

    With residual_channel set, the head conv starts at zero and the
    network initially returns that input channel unchanged.
    """
    widths = [min(base_channels * 2**level, max_channels) for level in range(UNET_LEVELS + 1)]
    layers: list[LayerSpec] = []

    cin = in_channels
    for level in range(UNET_LEVELS):
        layers += _double_conv(f"enc{level}", cin, widths[level], save_as=f"enc{level}")
        layers.append(LayerSpec(kind="avg_pool2", name=f"pool{level}"))
        cin = widths[level]

    layers += _double_conv("bottleneck", cin, widths[UNET_LEVELS])
    cin = widths[UNET_LEVELS]

    for level in reversed(range(UNET_LEVELS)):
        layers.append(LayerSpec(kind="bilinear_up2", name=f"up{level}"))
        layers.append(LayerSpec(kind="concat_skip", name=f"cat{level}", skip_from=f"enc{level}"))
        layers += _double_conv(f"dec{level}", cin + widths[level], widths[level])
        cin = widths[level]

    layers.append(
        LayerSpec(
            kind="conv2d",
            name="head",
            kernel=3,
            in_channels=cin,
            out_channels=out_channels,
            zero_init=residual_channel is not None,
        )
    )
    return NetworkSpec(
        role=role,
        layers=layers,
        base_channels=base_channels,
        in_channels=in_channels,
        out_channels=out_channels,
        residual_channel=residual_channel,
        spatial_multiple=2**UNET_LEVELS,
    )


def build_patch_discriminator(
    in_channels: int = 1,
    base_channels: int = 64,
    max_channels: int = 256,
    slope: float = 0.2,
) -> NetworkSpec:
    """Four-conv patch discriminator emitting a (H/4, W/4) probability map."""
    widths = [min(base_channels * 2**i, max_channels) for i in range(3)]
    convs = [
        (3, 1, in_channels, widths[0]),
        (4, 2, widths[0], widths[1]),
        (4, 2, widths[1], widths[2]),
    ]
    layers: list[LayerSpec] = []
    for i, (kernel, stride, cin, cout) in enumerate(convs, start=1):
        layers += [
            LayerSpec(kind="conv2d", name=f"conv{i}", kernel=kernel, stride=stride,
                      in_channels=cin, out_channels=cout),
            LayerSpec(kind="leaky_relu", name=f"act{i}", slope=slope, feature=True),
            LayerSpec(kind="batch_norm", name=f"bn{i}", in_channels=cout),
        ]
    layers += [
        LayerSpec(kind="conv2d", name="conv4", kernel=3, stride=1, in_channels=widths[2], out_channels=1),
        LayerSpec(kind="sigmoid", name="prob"),
    ]
    return NetworkSpec(
        role="discriminator",
        layers=layers,
        base_channels=base_channels,
        in_channels=in_channels,
        out_channels=1,
        spatial_multiple=4,
    )


def extract_features(
    disc: Network, inputs: Union[TensorGrad, np.ndarray], training: bool = False
) -> list[TensorGrad]:
    """Post-activation maps of every hidden discriminator layer (output layer excluded)."""
    value = inputs.value if isinstance(inputs, TensorGrad) else inputs
    disc.forward(value, training=training)
    return [TensorGrad(feature.copy()) for feature in disc.features]


def random_patch(
    pair: tuple[np.ndarray, np.ndarray],
    rng: Union[np.random.Generator, int],
) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
    """Cut the same floor(H/4) x floor(W/4) window from both arrays.

    Works on the last two axes; returns both patches and the (row, col)
    offset drawn uniformly from the generator.
    """
    first, second = (p.value if isinstance(p, TensorGrad) else p for p in pair)
    if first.shape != second.shape:
        raise ValueError(f"patch pair shapes differ: {first.shape} vs {second.shape}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    height, width = first.shape[-2:]
    patch_h, patch_w = height // 4, width // 4
    row = int(rng.integers(0, height - patch_h + 1))
    col = int(rng.integers(0, width - patch_w + 1))
    window = (..., slice(row, row + patch_h), slice(col, col + patch_w))
    return first[window].copy(), second[window].copy(), (row, col)

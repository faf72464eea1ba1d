"""Minimal differentiable-network kit: layers, networks and builders."""

from svct.nn_kit.builders import build_patch_discriminator, build_unet, extract_features, random_patch
from svct.nn_kit.layers import Layer, layer_backward, layer_forward, make_layer
from svct.nn_kit.network import Network
from svct.nn_kit.tensor import TensorGrad

__all__ = [
    "Layer",
    "Network",
    "TensorGrad",
    "build_patch_discriminator",
    "build_unet",
    "extract_features",
    "layer_backward",
    "layer_forward",
    "make_layer",
    "random_patch",
]

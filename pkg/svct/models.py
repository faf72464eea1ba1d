"""Pydantic models for the sparse-view CT toolkit.

Domain carriers (geometry, images, sinograms, cascade stacks, ramp
kernels), declarative network descriptions, and every tunable
configuration. Defaults follow the reference setup; desk-scale values
are supplied from data/desk.ini.
"""

import math
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Angles read back from float32 files are matched to grids with this slack.
ANGLE_TOLERANCE = 1e-6


class Geometry(BaseModel):
    """Parallel-beam acquisition: centered detector array plus an angle list."""
    model_config = ConfigDict(frozen=True)

    num_detectors: int = Field(gt=0)
    detector_spacing: float = Field(default=1.0, gt=0)
    num_angles: int = Field(gt=0)
    angles: tuple[float, ...] = ()
    image_size: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if data.get("angles") and data.get("num_angles") is None:
            data["num_angles"] = len(data["angles"])
        count = data.get("num_angles")
        if not data.get("angles") and count:
            count = int(count)
            data["angles"] = tuple(i * math.pi / count for i in range(count))
        if not data.get("image_size"):
            data["image_size"] = data.get("num_detectors")
        return data

    @model_validator(mode="after")
    def _check_angles(self) -> "Geometry":
        if len(self.angles) != self.num_angles:
            raise ValueError(
                f"angle list has {len(self.angles)} entries, num_angles={self.num_angles}"
            )
        if np.any(np.diff(np.asarray(self.angles)) <= 0):
            raise ValueError("angles must be strictly increasing")
        return self

    @classmethod
    def parallel(
        cls,
        num_detectors: int,
        num_angles: int,
        image_size: Optional[int] = None,
        detector_spacing: float = 1.0,
    ) -> "Geometry":
        """Uniform endpoint-exclusive grid of num_angles views over [0, pi)."""
        return cls(
            num_detectors=num_detectors,
            num_angles=num_angles,
            image_size=image_size or num_detectors,
            detector_spacing=detector_spacing,
        )

    def with_angles(self, angles) -> "Geometry":
        """Same detector and image description on another angle list."""
        angles = tuple(float(a) for a in angles)
        return Geometry(
            num_detectors=self.num_detectors,
            detector_spacing=self.detector_spacing,
            num_angles=len(angles),
            angles=angles,
            image_size=self.image_size,
        )

    @property
    def angle_array(self) -> np.ndarray:
        return np.asarray(self.angles, dtype=np.float64)

    def detector_positions(self) -> np.ndarray:
        """s_j = (j - (S-1)/2) * spacing."""
        j = np.arange(self.num_detectors, dtype=np.float64)
        return (j - (self.num_detectors - 1) / 2.0) * self.detector_spacing


class Image(BaseModel):
    """Square reconstruction grid, row-major, unit pixel spacing."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    pixels: np.ndarray
    spacing: float = 1.0

    @field_validator("pixels", mode="before")
    @classmethod
    def _check_pixels(cls, value) -> np.ndarray:
        pixels = np.asarray(value, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
            raise ValueError(f"image must be a square 2-D grid, got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("image contains non-finite values")
        return pixels

    @property
    def size(self) -> int:
        return int(self.pixels.shape[0])


class Sinogram(BaseModel):
    """Detector x angle measurement grid with its angle list."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    data: np.ndarray
    angles: tuple[float, ...]
    detector_spacing: float = 1.0

    @field_validator("data", mode="before")
    @classmethod
    def _check_data(cls, value) -> np.ndarray:
        data = np.asarray(value, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"sinogram must be 2-D (detectors x angles), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("sinogram contains non-finite values")
        return data

    @model_validator(mode="after")
    def _check_counts(self) -> "Sinogram":
        if self.data.shape[1] != len(self.angles):
            raise ValueError(
                f"sinogram has {self.data.shape[1]} angle columns but {len(self.angles)} angles"
            )
        return self

    @property
    def num_detectors(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_angles(self) -> int:
        return int(self.data.shape[1])

    @property
    def angle_array(self) -> np.ndarray:
        return np.asarray(self.angles, dtype=np.float64)


class CascadeStack(BaseModel):
    """Four FBP channels in ascending source view count."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    channels: np.ndarray
    source_view_counts: tuple[int, ...]

    @model_validator(mode="after")
    def _check_channels(self) -> "CascadeStack":
        if self.channels.ndim != 3 or self.channels.shape[0] != 4:
            raise ValueError(f"cascade needs exactly 4 channels, got shape {self.channels.shape}")
        if len(self.source_view_counts) != 4:
            raise ValueError("cascade needs 4 source view counts")
        return self


class RampKernel(BaseModel):
    """Spatial Ram-Lak taps h(-half_width..half_width)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    half_width: int = Field(ge=1)
    taps: np.ndarray
    spacing: float = Field(default=1.0, gt=0)


class LossWeights(BaseModel):
    """Weights of the generator objective; PRN ignores the HF weight."""
    adv: float = Field(default=1.0, ge=0)
    content: float = Field(default=50.0, ge=0)
    dp: float = Field(default=20.0, ge=0)
    hf: float = Field(default=50.0, ge=0)


class AffineParams(BaseModel):
    """Sampling ranges of the training-time random affine augmentation."""
    rotation_deg: float = Field(default=30.0, ge=0)
    translation: float = Field(default=0.1, ge=0)  # fraction of image size, both axes
    scale_min: float = Field(default=0.5, gt=0)
    scale_max: float = Field(default=1.1, gt=0)
    shear_deg: float = Field(default=20.0, ge=0)

    @model_validator(mode="after")
    def _check_scale(self) -> "AffineParams":
        if self.scale_min > self.scale_max:
            raise ValueError("scale_min must not exceed scale_max")
        return self


class AffineDraw(BaseModel):
    """One concrete affine transform drawn from AffineParams."""
    rotation_deg: float = 0.0
    shear_deg: float = 0.0
    scale: float = 1.0
    translate_rows: float = 0.0  # fraction of image size
    translate_cols: float = 0.0


class TrainConfig(BaseModel):
    """One training run of either stage."""
    learning_rate: float = Field(default=1e-4, gt=0)
    beta1: float = Field(default=0.5, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    epochs: int = Field(default=100, ge=1)
    # Fixed generator-iteration budget; overrides epochs when set.
    iterations: Optional[int] = Field(default=None, ge=1)
    schedule_period_k: int = Field(default=10, ge=1)
    batch_size: int = Field(default=4, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    weights: LossWeights = Field(default_factory=LossWeights)
    dtype: Literal["float32", "float64"] = "float32"
    log_every: int = Field(default=10, ge=1)
    augment_copies: int = Field(default=1, ge=0)
    num_workers: int = Field(default=1, ge=1)
    use_two_ends: bool = True
    use_dp: bool = True
    use_hf: bool = True
    use_local: bool = True
    prn_input: Literal["cascade", "single", "sparse"] = "cascade"
    augmentation: AffineParams = Field(default_factory=AffineParams)


class FistaConfig(BaseModel):
    """FISTA-TV solver settings."""
    tv_weight: float = Field(default=10.0, ge=0)
    outer_iterations: int = Field(default=100, ge=1)
    tv_prox_iterations: int = Field(default=20, ge=1)
    step_size: Union[float, Literal["auto"]] = "auto"
    nonnegativity: bool = True
    power_iterations: int = Field(default=30, ge=1)
    restart: bool = True
    seed: int = Field(default=0, ge=0)

    @field_validator("step_size")
    @classmethod
    def _positive_step(cls, value):
        if value != "auto" and value <= 0:
            raise ValueError("step_size must be positive or 'auto'")
        return value


class PhantomSpec(BaseModel):
    """Synthetic phantom request."""
    kind: Literal["shepp_logan", "random_ellipses"] = "shepp_logan"
    size: int = Field(default=64, gt=0)
    ellipse_count: int = Field(default=8, ge=1)
    seed: int = Field(default=0, ge=0)


class MetricReport(BaseModel):
    """Scores of one reconstruction against its reference."""
    case_id: str = ""
    method: str = ""
    psnr_db: float
    ssim: float = Field(ge=-1.0, le=1.0)
    roi_radius: Optional[float] = None
    data_range: float = 1.0


class MetricSummary(BaseModel):
    """Mean and standard deviation per method."""
    method: str
    count: int
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float


LayerKind = Literal[
    "conv2d", "avg_pool2", "bilinear_up2", "relu", "leaky_relu",
    "batch_norm", "sigmoid", "concat_skip",
]


class LayerSpec(BaseModel):
    """One layer of a network description."""
    kind: LayerKind
    name: str
    kernel: int = Field(default=0, ge=0)
    stride: int = Field(default=1, ge=1)
    in_channels: int = Field(default=0, ge=0)
    out_channels: int = Field(default=0, ge=0)
    slope: float = 0.2
    # Output is stored under this key for a later concat_skip.
    save_as: Optional[str] = None
    # concat_skip: key of the stored activation appended after the input channels.
    skip_from: Optional[str] = None
    # Output is a discriminator feature map (phi_j).
    feature: bool = False
    zero_init: bool = False

    @model_validator(mode="after")
    def _check_kind(self) -> "LayerSpec":
        if self.kind == "conv2d" and (self.kernel < 1 or self.in_channels < 1 or self.out_channels < 1):
            raise ValueError(f"conv2d layer '{self.name}' needs kernel and channel counts")
        if self.kind == "batch_norm" and self.in_channels < 1:
            raise ValueError(f"batch_norm layer '{self.name}' needs in_channels")
        if self.kind == "concat_skip" and not self.skip_from:
            raise ValueError(f"concat_skip layer '{self.name}' needs skip_from")
        return self

    @property
    def padding(self) -> int:
        return max(self.kernel - self.stride, 0) // 2


class NetworkSpec(BaseModel):
    """Ordered layer list with skip topology."""
    role: Literal["sin_generator", "prn_generator", "discriminator"]
    layers: list[LayerSpec]
    base_channels: int = Field(gt=0)
    in_channels: int = Field(gt=0)
    out_channels: int = Field(gt=0)
    # Generators add this input channel to their output.
    residual_channel: Optional[int] = None
    # Input height and width must be multiples of this.
    spatial_multiple: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_topology(self) -> "NetworkSpec":
        kinds = [layer.kind for layer in self.layers]
        convs = [layer for layer in self.layers if layer.kind == "conv2d"]
        if self.role == "discriminator":
            if len(convs) != 4:
                raise ValueError("patch discriminator must have exactly 4 conv layers")
            if any(c.out_channels > 256 for c in convs):
                raise ValueError("discriminator layers are limited to 256 channels")
        else:
            if kinds.count("avg_pool2") != 4 or kinds.count("bilinear_up2") != 4:
                raise ValueError("U-Net needs exactly 4 pooling and 4 upsampling stages")
            if kinds.count("concat_skip") != 4:
                raise ValueError("U-Net needs one skip connection per resolution level")
            if any(c.stride != 1 for c in convs):
                raise ValueError("generator convolutions must have stride 1")
        if self.residual_channel is not None and not 0 <= self.residual_channel < self.in_channels:
            raise ValueError("residual_channel out of range")
        return self


class NetworkConfig(BaseModel):
    """Channel widths of the generators and discriminators."""
    sin_base_channels: int = Field(default=8, ge=1)
    prn_base_channels: int = Field(default=8, ge=1)
    disc_base_channels: int = Field(default=16, ge=1)
    max_channels: int = Field(default=512, ge=1)
    disc_max_channels: int = Field(default=256, ge=1, le=256)
    residual: bool = True


class PipelineConfig(BaseModel):
    """Acquisition chain of the two-step pipeline."""
    image_size: int = Field(default=64, gt=0)
    full_views: int = Field(default=180, gt=0)
    sparse_every: int = Field(default=8, ge=1)
    te_pad: int = Field(default=6, ge=0)
    num_phantoms: int = Field(default=60, ge=1)
    held_out: int = Field(default=10, ge=0)
    ellipse_count: int = Field(default=8, ge=1)

    @property
    def sparse_views(self) -> int:
        return math.ceil(self.full_views / self.sparse_every)

    def geometry(self) -> Geometry:
        return Geometry.parallel(self.image_size, self.full_views)

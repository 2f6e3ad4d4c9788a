"""Pydantic data models for configuration, manifests and reports."""

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SliceLabel = Literal["healthy", "infected", "unknown"]
BinarizeMethod = Literal["kmeans", "otsu"]


class StrictModel(BaseModel):
    """Base for configuration sections: unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Network configuration
# ---------------------------------------------------------------------------

class GeneratorConfig(StrictModel):
    """U-net generator: stride-2 encoder, upsampling decoder, skips at every stage."""
    stages: int = Field(default=8, ge=1, description="Encoder (and decoder) stage count")
    base_channels: int = Field(default=64, ge=1, description="Channels of the first encoder stage")
    max_channels: int = Field(default=512, ge=1, description="Channel cap for deep stages")
    kernel: int = Field(default=3, description="Convolution kernel side")
    in_channels: int = Field(default=1, ge=1)
    out_channels: int = Field(default=1, ge=1)
    input_side: int = Field(default=256, ge=2, description="Input image side in pixels")
    leaky_slope: float = Field(default=0.2, ge=0.0, description="Encoder LeakyReLU slope")
    residual_output: bool = Field(
        default=False,
        description="Output tanh(atanh(x) + F(x)): starts at the identity map, learns a correction",
    )

    @model_validator(mode='after')
    def validate_geometry(self):
        """The bottleneck must be 1x1: input_side = 2**stages."""
        if self.input_side != 2 ** self.stages:
            raise ValueError(
                f"input_side {self.input_side} must equal 2**stages = {2 ** self.stages}"
            )
        if self.kernel != 3:
            raise ValueError(f"generator kernel must be 3, got {self.kernel}")
        if self.residual_output and self.in_channels != self.out_channels:
            raise ValueError("residual_output needs in_channels == out_channels")
        return self

    @property
    def channels(self) -> List[int]:
        """Encoder channel count per stage."""
        return [min(self.base_channels * 2 ** s, self.max_channels) for s in range(self.stages)]


class DiscriminatorConfig(StrictModel):
    """Patch discriminator: plain conv stack with LeakyReLU and selective instance norm."""
    layers: int = Field(default=5, ge=1)
    kernel: int = Field(default=4, ge=1)
    strides: List[int] = Field(default_factory=lambda: [2, 2, 2, 1, 1])
    channels: List[int] = Field(default_factory=lambda: [64, 128, 256, 512, 1])
    leaky_slope: float = Field(default=0.2, ge=0.0)
    padding: int = Field(default=1, ge=0)
    norm_layers: List[int] = Field(
        default_factory=lambda: [2, 3, 4],
        description="1-based indices of layers followed by instance norm",
    )
    in_channels: int = Field(default=1, ge=1)
    receptive_field_target: Optional[int] = Field(
        default=70, description="Required receptive field; None disables the check"
    )

    @model_validator(mode='after')
    def validate_layers(self):
        """Per-layer lists must agree with the layer count."""
        if len(self.strides) != self.layers or len(self.channels) != self.layers:
            raise ValueError(
                f"strides ({len(self.strides)}) and channels ({len(self.channels)}) "
                f"must both have {self.layers} entries"
            )
        if any(s < 1 for s in self.strides) or any(c < 1 for c in self.channels):
            raise ValueError("strides and channels must be positive")
        if any(i < 1 or i > self.layers for i in self.norm_layers):
            raise ValueError(f"norm_layers must lie in 1..{self.layers}")
        if self.receptive_field_target is not None:
            from ..nets.discriminator import receptive_field

            rf = receptive_field(self)
            if rf != self.receptive_field_target:
                raise ValueError(
                    f"receptive field {rf} differs from target {self.receptive_field_target}"
                )
        return self


class NetsConfig(StrictModel):
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = Field(default_factory=DiscriminatorConfig)


# ---------------------------------------------------------------------------
# Training configuration
# ---------------------------------------------------------------------------

class LossWeights(StrictModel):
    """Weights of the cycle and identity terms of the generator objective."""
    lambda_cycle: float = Field(default=10.0, ge=0.0)
    lambda_identity: float = Field(default=5.0, ge=0.0)


class TrainConfig(StrictModel):
    """Optimization schedule of the alternating generator/discriminator updates."""
    epochs: int = Field(default=100, ge=2)
    lr0: float = Field(default=2e-4, gt=0.0)
    decay_start_epoch: int = Field(default=50, ge=1)
    batch_size: int = Field(default=1, ge=1)
    adam_beta1: float = Field(default=0.5, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    stop_epoch: Optional[int] = Field(default=None, ge=1)
    crop_side: int = Field(default=256, ge=2)
    seed: int = Field(default=0, ge=0)
    init_std: float = Field(default=0.02, gt=0.0)
    fake_pool_size: int = Field(default=0, ge=0, description="History buffer size; 0 disables")

    @model_validator(mode='after')
    def validate_schedule(self):
        """Decay must start strictly inside the run."""
        if not 0 < self.decay_start_epoch < self.epochs:
            raise ValueError(
                f"decay_start_epoch {self.decay_start_epoch} must lie in (0, {self.epochs})"
            )
        if self.stop_epoch is not None and self.stop_epoch > self.epochs:
            raise ValueError(f"stop_epoch {self.stop_epoch} exceeds epochs {self.epochs}")
        return self


class CycleGanConfig(StrictModel):
    train: TrainConfig = Field(default_factory=TrainConfig)
    weights: LossWeights = Field(default_factory=LossWeights)


# ---------------------------------------------------------------------------
# Preprocessing, post-processing and evaluation configuration
# ---------------------------------------------------------------------------

class ImgvolConfig(StrictModel):
    """CT preprocessing: isotropic resampling, HU window and slice crop."""
    window_lo: float = Field(default=-800.0, description="Lower HU window bound")
    window_hi: float = Field(default=100.0, description="Upper HU window bound")
    crop_side: int = Field(default=256, ge=1)
    target_spacing: float = Field(default=1.0, gt=0.0, description="Isotropic spacing in mm")

    @model_validator(mode='after')
    def validate_window(self):
        if self.window_lo >= self.window_hi:
            raise ValueError(f"window_lo {self.window_lo} must be below window_hi {self.window_hi}")
        return self


class PostprocConfig(StrictModel):
    """Subtraction post-processing chain."""
    method: BinarizeMethod = "kmeans"
    median_window: int = Field(default=5, ge=3)
    gaussian_size: int = Field(default=5, ge=1)
    gaussian_sigma: float = Field(default=1.0, gt=0.0)
    smooth_threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    min_difference: float = Field(
        default=0.1, ge=0.0, description="Lowest difference accepted as lesion, in normalized units"
    )
    k: int = Field(default=2, ge=2)
    restarts: int = Field(default=5, ge=1)
    max_iter: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)

    @field_validator('median_window', 'gaussian_size')
    @classmethod
    def validate_odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"window sides must be odd, got {v}")
        return v


class MetricsConfig(StrictModel):
    """Region-diagnosis protocol."""
    region_axes: Tuple[int, int, int] = Field(
        default=(3, 2, 2), description="Bands along (sup-inf, ant-post, left-right)"
    )
    min_voxels: int = Field(default=1, ge=1, description="Lesion voxels that make a region positive")

    @field_validator('region_axes')
    @classmethod
    def validate_axes(cls, v: Tuple[int, int, int]) -> Tuple[int, int, int]:
        if any(n < 1 for n in v):
            raise ValueError(f"region_axes must be positive, got {v}")
        return v


class PhantomSpec(StrictModel):
    """Synthetic chest phantom with lungs, vessels and ground-glass-like lesions."""
    size: int = Field(default=64, ge=16, description="Voxels per side")
    seed: int = Field(default=0, ge=0)
    lung_hu: Tuple[float, float] = (-850.0, -700.0)
    body_hu: Tuple[float, float] = (0.0, 60.0)
    air_hu: float = -1000.0
    vessel_density: float = Field(default=1e-4, ge=0.0, description="Vessels per lung voxel")
    vessel_hu: float = 40.0
    vessel_radius: float = Field(default=1.0, gt=0.0)
    lesion_count: Tuple[int, int] = (1, 3)
    lesion_hu: Tuple[float, float] = (-600.0, -300.0)
    lesion_radius: Tuple[float, float] = (4.0, 9.0)
    soft_edge: float = Field(default=1.0, gt=0.0, description="Lesion rim width in voxels")
    noise_smoothing: float = Field(default=2.0, gt=0.0, description="Gaussian sigma of texture noise")
    max_placement_retries: int = Field(default=100, ge=1)

    @model_validator(mode='after')
    def validate_ranges(self):
        """Ranges are ordered and lesions are brighter than lung inside the HU window."""
        for name in ("lung_hu", "body_hu", "lesion_count", "lesion_hu", "lesion_radius"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty: {lo} > {hi}")
        if self.lesion_count[0] < 0:
            raise ValueError("lesion_count must be non-negative")
        if self.lesion_radius[0] <= 0:
            raise ValueError("lesion_radius must be positive")
        if self.lesion_hu[0] <= self.lung_hu[1]:
            raise ValueError(
                f"lesion_hu {self.lesion_hu} must lie above lung_hu {self.lung_hu}"
            )
        if self.lesion_hu[0] < -800.0 or self.lesion_hu[1] > 100.0:
            raise ValueError(f"lesion_hu {self.lesion_hu} must lie inside [-800, 100] HU")
        return self


class DatasetConfig(StrictModel):
    """Phantom dataset sizes: training counts are slices, test count is volumes."""
    spec: PhantomSpec = Field(default_factory=PhantomSpec)
    n_train_healthy: int = Field(default=400, ge=1)
    n_train_infected: int = Field(default=400, ge=1)
    n_test: int = Field(default=10, ge=1)
    max_train_volumes: int = Field(default=200, ge=1)


class PathsConfig(StrictModel):
    data_dir: str = "data/phantom"
    checkpoint_dir: str = "runs/checkpoints"
    output_dir: str = "runs/output"


class LoggingConfig(StrictModel):
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: Optional[str] = None
    max_file_size_mb: int = Field(default=10, ge=1)
    backup_count: int = Field(default=5, ge=0)


class RunConfig(StrictModel):
    """Whole-run configuration, validated before any work happens."""
    imgvol: ImgvolConfig = Field(default_factory=ImgvolConfig)
    nets: NetsConfig = Field(default_factory=NetsConfig)
    cyclegan: CycleGanConfig = Field(default_factory=CycleGanConfig)
    postproc: PostprocConfig = Field(default_factory=PostprocConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    phantom: DatasetConfig = Field(default_factory=DatasetConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode='after')
    def validate_cross_sections(self):
        """Generator side, training crop and slice crop must agree."""
        side = self.nets.generator.input_side
        if self.cyclegan.train.crop_side != side:
            raise ValueError(
                f"cyclegan.train.crop_side {self.cyclegan.train.crop_side} "
                f"must equal nets.generator.input_side {side}"
            )
        if self.imgvol.crop_side < side:
            raise ValueError(
                f"imgvol.crop_side {self.imgvol.crop_side} is smaller than generator side {side}"
            )
        return self

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with the master seed pushed into every seeded section."""
        data = self.model_dump()
        data["seed"] = seed
        data["cyclegan"]["train"]["seed"] = seed
        data["phantom"]["spec"]["seed"] = seed
        data["postproc"]["seed"] = seed
        return RunConfig.model_validate(data)


# ---------------------------------------------------------------------------
# Manifests, records and reports
# ---------------------------------------------------------------------------

class VolumeHeader(BaseModel):
    """JSON header of a native volume, mask or slice file; the payload lives beside it."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["volume", "mask", "slice"]
    dims: Tuple[int, int, int] = Field(description="(nx, ny, nz); slices use nz = 1")
    spacing: Tuple[float, float, float]
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    dtype: Literal["float32", "uint8"]
    byte_order: Literal["little"] = "little"
    payload: str = Field(description="Raw payload file name, relative to the header")
    lung_payload: Optional[str] = Field(default=None, description="Slices only: uint8 lung mask")
    label: Optional[SliceLabel] = None
    volume_id: Optional[str] = None
    slice_index: Optional[int] = Field(default=None, ge=0)
    crop_origin: Optional[Tuple[int, int]] = None
    ndim: Optional[Literal[2, 3]] = Field(default=None, description="Masks only: rank of the array that was written")

    @model_validator(mode='after')
    def validate_header(self):
        if any(n < 1 for n in self.dims):
            raise ValueError(f"dims must be positive, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        expected = "float32" if self.kind in ("volume", "slice") else "uint8"
        if self.dtype != expected:
            raise ValueError(f"{self.kind} payload must be {expected}, got {self.dtype}")
        if self.kind == "slice" and (self.lung_payload is None or self.dims[2] != 1):
            raise ValueError("slice headers need a lung_payload and nz = 1")
        if self.ndim is not None and (self.kind != "mask" or (self.ndim == 2 and self.dims[2] != 1)):
            raise ValueError(f"ndim {self.ndim} needs a mask header with nz = 1 for 2-D data")
        return self


class SliceRecord(BaseModel):
    """One entry of a slice manifest."""
    path: str = Field(description="Header path of the stored slice, relative to the manifest")
    slice_index: int = Field(ge=0)
    label: SliceLabel = "unknown"
    volume_id: str = Field(pattern=r"^[a-zA-Z0-9_-]+$")


class VolumeRecord(BaseModel):
    """One held-out phantom volume with its ground truth files."""
    volume_id: str = Field(pattern=r"^[a-zA-Z0-9_-]+$")
    seed: int
    volume: str
    lung: str
    lesion: str
    healthy: str
    lesion_count: int = Field(ge=0)
    flags: List[str] = Field(default_factory=list)


class LossRecord(BaseModel):
    """Losses of one training iteration."""
    iteration: int = Field(ge=1)
    epoch: int = Field(ge=1)
    g_total: float
    g_adv_xy: float
    g_adv_yx: float
    cycle: float
    identity: float
    d_x: float
    d_y: float
    lr: float = Field(ge=0.0)


class TrainStateRecord(BaseModel):
    """JSON part of a training checkpoint; parameters and moments live in blobs beside it."""
    epoch: int = Field(ge=0, description="Completed epochs")
    iteration: int = Field(ge=0)
    adam_steps: Dict[str, int] = Field(description="Step counter per optimizer")
    rng_state: Dict[str, Any] = Field(description="numpy bit generator state")
    pool_sizes: Dict[str, int] = Field(default_factory=dict)
    history: List[LossRecord] = Field(default_factory=list)
    nets: Dict[str, Any]
    cyclegan: Dict[str, Any]


class OverlapReport(BaseModel):
    """Volumetric overlap of a predicted and a ground-truth lesion mask, in percent."""
    dsc: float = Field(ge=0.0, le=100.0)
    psc: float = Field(ge=0.0, le=100.0)
    sen: float = Field(ge=0.0, le=100.0)
    n_pred: int = Field(ge=0)
    n_gt: int = Field(ge=0)
    n_overlap: int = Field(ge=0)
    flags: List[str] = Field(default_factory=list)


class RegionDiagnosis(BaseModel):
    """Per-region lesion presence and the confusion counts derived from it."""
    predicted: List[bool]
    truth: List[bool]
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)
    tn: int = Field(ge=0)
    accuracy: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    sensitivity: float = Field(ge=0.0, le=1.0)
    flags: List[str] = Field(default_factory=list)

    @model_validator(mode='after')
    def validate_counts(self):
        """Confusion counts cover every region exactly once."""
        if len(self.predicted) != len(self.truth):
            raise ValueError("predicted and truth must have one entry per region")
        if self.tp + self.fp + self.fn + self.tn != len(self.truth):
            raise ValueError("confusion counts must sum to the region count")
        return self

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * self.accuracy

    @property
    def precision_pct(self) -> float:
        return 100.0 * self.precision

    @property
    def sensitivity_pct(self) -> float:
        return 100.0 * self.sensitivity

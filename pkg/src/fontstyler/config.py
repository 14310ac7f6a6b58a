"""Configuration dataclasses and YAML loading for the full pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict, fields
from pathlib import Path

import yaml


@dataclass
class BackboneConfig:
    """Geometry and capacity of the shared ViT encoder/decoder."""

    image_size: int = 64
    patch_size: int = 8
    hidden_size: int = 192
    depth: int = 6
    heads: int = 3
    decoder_hidden: int = 96
    decoder_depth: int = 2
    mask_ratio: float = 0.65
    in_channels: int = 1
    mlp_ratio: float = 4.0
    cross_depth: int = 2

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ValueError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )
        if self.hidden_size % self.heads != 0:
            raise ValueError(
                f"hidden_size {self.hidden_size} not divisible by heads {self.heads}"
            )
        if not 0.0 <= self.mask_ratio < 1.0:
            raise ValueError(f"mask_ratio {self.mask_ratio} outside [0, 1)")

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def patch_num(self) -> int:
        return self.grid_size ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.in_channels

    @property
    def embedding_dim(self) -> int:
        # one flattened vector of all tokens: CLS plus every patch token
        return self.hidden_size * (self.patch_num + 1)


@dataclass
class PretrainConfig:
    mask_ratio: float = 0.65
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 1.5e-4
    weight_decay: float = 0.05
    warmup_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.mask_ratio < 1.0:
            raise ValueError(f"mask_ratio {self.mask_ratio} outside [0, 1)")


@dataclass
class LossWeights:
    """Weights of the combined objective: content, style, pixel terms."""

    alpha: float = 0.1
    beta: float = 0.4
    gamma: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be non-negative")
        if self.alpha == 0 and self.beta == 0 and self.gamma == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass
class TapsConfig:
    """Which extractor activations feed the perceptual terms."""

    content_layers: list[str] = field(default_factory=lambda: ["relu2_2"])
    style_layers: list[str] = field(
        default_factory=lambda: ["relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"]
    )
    mode: str = "fallback"  # "fallback" | "pretrained"
    weights_file: str | None = None
    fallback_seed: int = 1234


@dataclass
class DataConfig:
    fonts_dir: str = "fonts"
    image_size: int = 64
    margin: float = 0.1
    charset: str = "latin"  # named charset or explicit string of characters
    content_styles: list[str] = field(default_factory=list)
    reference_chars: dict[str, list[str]] = field(default_factory=dict)
    fractions: dict[str, float] = field(
        default_factory=lambda: {"pretrain": 0.3, "train": 0.56, "val": 0.07, "test": 0.07}
    )
    allow_empty_test: bool = False


@dataclass
class TrainConfig:
    epochs_main: int = 10
    refine_fraction: float = 0.5
    batch_size: int = 16
    learning_rate: float = 1e-4
    weight_decay: float = 0.05
    p_ref_drop: float = 0.5
    loss: str = "combined"  # "combined" | "mse" (baseline ablation)
    init: str = "pretrained"  # "pretrained" | "scratch" (baseline ablation)
    seed: int = 0

    def __post_init__(self):
        if self.refine_fraction < 0:
            raise ValueError("refine_fraction must be >= 0")
        if self.epochs_main < 0:
            raise ValueError("epochs_main must be >= 0")


@dataclass
class RunConfig:
    """Top-level configuration: one YAML file drives every CLI stage."""

    data: DataConfig = field(default_factory=DataConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    taps: TapsConfig = field(default_factory=TapsConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.backbone.image_size != self.data.image_size:
            # single source of truth: the backbone geometry wins
            self.data.image_size = self.backbone.image_size


_SECTION_TYPES = {
    "data": DataConfig,
    "backbone": BackboneConfig,
    "pretrain": PretrainConfig,
    "weights": LossWeights,
    "taps": TapsConfig,
    "train": TrainConfig,
}


def _build_section(cls, raw: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**raw)


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML run configuration, filling defaults for missing sections."""
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    kwargs = {}
    for name, cls in _SECTION_TYPES.items():
        if name in raw:
            kwargs[name] = _build_section(cls, raw.pop(name) or {})
    for key in ("seed", "output_dir"):
        if key in raw:
            kwargs[key] = raw.pop(key)
    if raw:
        raise ValueError(f"unknown config keys: {sorted(raw)}")
    return RunConfig(**kwargs)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(asdict(cfg), f, sort_keys=False)

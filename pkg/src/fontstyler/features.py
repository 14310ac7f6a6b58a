"""Pluggable convolutional feature extractor with named activation taps.

Two modes share one topology (16 conv layers in five pooled blocks, VGG19
layout): `pretrained` loads weights from a local torchvision-format file,
`fallback` draws fixed seeded weights so tests run without any download.
Extractor weights never receive gradients; inputs do.
"""

from __future__ import annotations

from pathlib import Path

import torch
import torch.nn as nn

from .config import TapsConfig
from .errors import MissingWeights, ShapeError

# (name, in_channels, out_channels); "pool" markers end each block
_TOPOLOGY = [
    ("conv1_1", 3, 64), ("conv1_2", 64, 64), "pool",
    ("conv2_1", 64, 128), ("conv2_2", 128, 128), "pool",
    ("conv3_1", 128, 256), ("conv3_2", 256, 256), ("conv3_3", 256, 256), ("conv3_4", 256, 256), "pool",
    ("conv4_1", 256, 512), ("conv4_2", 512, 512), ("conv4_3", 512, 512), ("conv4_4", 512, 512), "pool",
    ("conv5_1", 512, 512), ("conv5_2", 512, 512), ("conv5_3", 512, 512), ("conv5_4", 512, 512), "pool",
]

# conv indices inside torchvision's vgg19 `features` sequential
_TORCHVISION_IDX = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28, 30, 32, 34]

_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
_STD = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)


class FeatureExtractor(nn.Module):
    """Frozen conv stack exposing activations by relu layer name."""

    def __init__(self):
        super().__init__()
        convs = {}
        for item in _TOPOLOGY:
            if item == "pool":
                continue
            name, cin, cout = item
            convs[name] = nn.Conv2d(cin, cout, kernel_size=3, padding=1)
        self.convs = nn.ModuleDict(convs)
        self.pool = nn.MaxPool2d(2, 2)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @classmethod
    def fallback(cls, seed: int = 1234) -> "FeatureExtractor":
        """Seed-deterministic random weights, He-scaled for stable activations."""
        ex = cls()
        gen = torch.Generator().manual_seed(seed)
        for item in _TOPOLOGY:
            if item == "pool":
                continue
            name, cin, _ = item
            conv = ex.convs[name]
            std = (2.0 / (cin * 9)) ** 0.5
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * std)
                conv.bias.zero_()
        return ex

    @classmethod
    def from_file(cls, path: str | Path) -> "FeatureExtractor":
        """Load torchvision-format VGG19 conv weights (`features.N.weight` keys)."""
        path = Path(path)
        if not path.exists():
            raise MissingWeights(f"no extractor weights file at {path}")
        state = torch.load(path, map_location="cpu", weights_only=True)
        ex = cls()
        names = [item[0] for item in _TOPOLOGY if item != "pool"]
        with torch.no_grad():
            for name, idx in zip(names, _TORCHVISION_IDX):
                ex.convs[name].weight.copy_(state[f"features.{idx}.weight"])
                ex.convs[name].bias.copy_(state[f"features.{idx}.bias"])
        return ex

    def layer_names(self) -> list[str]:
        return [f"relu{n[4:]}" for n in self.convs]

    def has_layer(self, name: str) -> bool:
        return name in self.layer_names()

    def forward(self, images: torch.Tensor, layers: list[str]) -> dict[str, torch.Tensor]:
        """Return the requested relu activations as (B, C, H, W) maps."""
        missing = [l for l in layers if not self.has_layer(l)]
        if missing:
            raise ValueError(f"extractor has no layers {missing}; valid: {self.layer_names()}")
        x = images
        if x.ndim == 3:
            x = x[:, None]
        if x.shape[1] == 1:
            x = x.expand(-1, 3, -1, -1)
        x = (x - _MEAN.to(x.dtype)) / _STD.to(x.dtype)

        wanted = set(layers)
        out: dict[str, torch.Tensor] = {}
        for item in _TOPOLOGY:
            if item == "pool":
                if x.shape[-1] < 2 or x.shape[-2] < 2:
                    break
                x = self.pool(x)
                continue
            name = item[0]
            relu_name = f"relu{name[4:]}"
            if x.shape[-1] < 1 or x.shape[-2] < 1:
                break
            x = torch.relu(self.convs[name](x))
            if relu_name in wanted:
                out[relu_name] = x
                if len(out) == len(wanted):
                    break
        if len(out) != len(wanted):
            short = sorted(wanted - set(out))
            raise ShapeError(
                f"input {tuple(images.shape[-2:])} too small for tap layers {short}"
            )
        return out


def make_extractor(cfg: TapsConfig) -> FeatureExtractor:
    if cfg.mode == "pretrained":
        if not cfg.weights_file:
            raise MissingWeights("taps.mode=pretrained requires taps.weights_file")
        return FeatureExtractor.from_file(cfg.weights_file)
    if cfg.mode == "fallback":
        return FeatureExtractor.fallback(cfg.fallback_seed)
    raise ValueError(f"unknown extractor mode {cfg.mode!r}")

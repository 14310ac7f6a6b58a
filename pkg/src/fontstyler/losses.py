"""Training objectives: perceptual content/style terms, pixel MSE, L1 refinement.

The combined objective is  alpha * L_content + beta * L_style + gamma * L_mse
with defaults (0.1, 0.4, 1.0); the short post-training refinement phase swaps
it for a plain mean-absolute-error loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .config import LossWeights, TapsConfig
from .data import GlyphImage
from .errors import ShapeError
from .features import FeatureExtractor, make_extractor


@dataclass
class PerceptualTaps:
    """Runtime bundle: which extractor activations feed each perceptual term."""

    extractor: FeatureExtractor
    content_layers: list[str] = field(default_factory=lambda: ["relu2_2"])
    style_layers: list[str] = field(
        default_factory=lambda: ["relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"]
    )

    def __post_init__(self):
        for name in [*self.content_layers, *self.style_layers]:
            if not self.extractor.has_layer(name):
                raise ValueError(f"extractor has no tap layer {name!r}")


def make_taps(cfg: TapsConfig) -> PerceptualTaps:
    return PerceptualTaps(
        extractor=make_extractor(cfg),
        content_layers=list(cfg.content_layers),
        style_layers=list(cfg.style_layers),
    )


def _batch(image) -> torch.Tensor:
    if isinstance(image, GlyphImage):
        image = image.pixels
    if isinstance(image, np.ndarray):
        image = torch.from_numpy(np.ascontiguousarray(image))
    if image.ndim == 2:
        image = image[None, None]
    elif image.ndim == 3:
        image = image[:, None]
    if image.ndim != 4:
        raise ShapeError(f"expected image-like input, got shape {tuple(image.shape)}")
    return image


def _pair(pred, gt) -> tuple[torch.Tensor, torch.Tensor]:
    p, g = _batch(pred), _batch(gt)
    if p.shape != g.shape:
        raise ShapeError(f"shape mismatch: {tuple(p.shape)} vs {tuple(g.shape)}")
    return p, g.to(p.dtype)


def extract_features(image, taps: PerceptualTaps, layers: list[str] | None = None):
    """Map of layer name -> activation grid for one image or batch."""
    x = _batch(image)
    return taps.extractor(x, layers if layers is not None else taps.content_layers)


def gram_matrix(feature_map: torch.Tensor) -> torch.Tensor:
    """Channel co-activation statistic: G = F F^T / (C*H*W), symmetric PSD."""
    f = feature_map if isinstance(feature_map, torch.Tensor) else torch.as_tensor(feature_map)
    squeeze = f.ndim == 3
    if squeeze:
        f = f[None]
    b, c, h, w = f.shape
    flat = f.reshape(b, c, h * w)
    g = flat @ flat.transpose(1, 2) / (c * h * w)
    return g[0] if squeeze else g


def content_loss(pred, gt, taps: PerceptualTaps) -> torch.Tensor:
    """Mean squared feature difference, averaged over the content tap layers."""
    p, g = _pair(pred, gt)
    fp = taps.extractor(p, taps.content_layers)
    fg = taps.extractor(g, taps.content_layers)
    per_layer = [((fp[l] - fg[l]) ** 2).mean() for l in taps.content_layers]
    return torch.stack(per_layer).mean()


def style_loss(pred, style_gt, taps: PerceptualTaps) -> torch.Tensor:
    """Mean squared Gram-matrix difference, averaged over the style tap layers."""
    p, g = _pair(pred, style_gt)
    fp = taps.extractor(p, taps.style_layers)
    fg = taps.extractor(g, taps.style_layers)
    per_layer = [((gram_matrix(fp[l]) - gram_matrix(fg[l])) ** 2).mean() for l in taps.style_layers]
    return torch.stack(per_layer).mean()


def combined_loss(
    pred, gt, weights: LossWeights, taps: PerceptualTaps
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted total plus the three unweighted component values.

    Content and style terms are both measured against the ground-truth target
    glyph, which carries the correct character and the correct style.
    """
    p, g = _pair(pred, gt)
    l_content = content_loss(p, g, taps)
    l_style = style_loss(p, g, taps)
    l_mse = ((p - g) ** 2).mean()
    total = weights.alpha * l_content + weights.beta * l_style + weights.gamma * l_mse
    parts = {
        "content": float(l_content.detach()),
        "style": float(l_style.detach()),
        "mse": float(l_mse.detach()),
    }
    return total, parts


def refine_loss(pred, gt) -> torch.Tensor:
    """Mean absolute pixel error used during the refinement phase."""
    p, g = _pair(pred, gt)
    return (p - g).abs().mean()

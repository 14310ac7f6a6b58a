"""One-shot multilingual font style transfer.

A bi-encoder vision transformer (content + style) fused by cross-attention,
pretrained with masked patch reconstruction, trained with a combined
perceptual/pixel objective, refined with L1, and augmented with per-style
nearest-neighbor retrieval of style references.
"""

from .backbone import MaskSpec, ViTDecoder, ViTEncoder, patchify, random_mask, unpatchify
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import (
    BackboneConfig,
    DataConfig,
    LossWeights,
    PretrainConfig,
    RunConfig,
    TapsConfig,
    TrainConfig,
    load_config,
    save_config,
)
from .data import (
    MADE_UP,
    DatasetManifest,
    GlyphImage,
    GlyphStore,
    ManifestEntry,
    Triplet,
    build_splits,
    render_glyph,
    sample_triplet,
)
from .features import FeatureExtractor
from .losses import (
    PerceptualTaps,
    combined_loss,
    content_loss,
    extract_features,
    gram_matrix,
    make_taps,
    refine_loss,
    style_loss,
)
from .metrics import MetricReport, evaluate_partition, fid, lpips, pixel_metrics, ssim
from .model import StyleModel
from .pretrain import mae_loss, pretrain
from .rag import (
    StyleEmbedding,
    StyleIndex,
    build_index,
    embed_glyph,
    generate_with_rag,
    retrieve_reference,
)
from .training import fit_triplets, refine_stage, train_main

__version__ = "0.1.0"

__all__ = [
    "BackboneConfig",
    "Checkpoint",
    "DataConfig",
    "DatasetManifest",
    "FeatureExtractor",
    "GlyphImage",
    "GlyphStore",
    "LossWeights",
    "MADE_UP",
    "ManifestEntry",
    "MaskSpec",
    "MetricReport",
    "PerceptualTaps",
    "PretrainConfig",
    "RunConfig",
    "StyleEmbedding",
    "StyleIndex",
    "StyleModel",
    "TapsConfig",
    "TrainConfig",
    "Triplet",
    "ViTDecoder",
    "ViTEncoder",
    "build_index",
    "build_splits",
    "combined_loss",
    "content_loss",
    "embed_glyph",
    "evaluate_partition",
    "extract_features",
    "fid",
    "fit_triplets",
    "generate_with_rag",
    "gram_matrix",
    "load_checkpoint",
    "load_config",
    "lpips",
    "mae_loss",
    "make_taps",
    "patchify",
    "pixel_metrics",
    "pretrain",
    "random_mask",
    "refine_loss",
    "refine_stage",
    "render_glyph",
    "retrieve_reference",
    "sample_triplet",
    "save_checkpoint",
    "save_config",
    "ssim",
    "style_loss",
    "train_main",
    "unpatchify",
]

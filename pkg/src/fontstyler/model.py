"""Bi-encoder glyph generator: content/style ViT encoders fused by cross-attention.

Content tokens act as attention queries over style tokens (keys/values); the
fused sequence feeds the reconstruction decoder. Attention output projections
start at zero, so an untrained model reproduces its content encoding exactly.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .backbone import Mlp, ViTDecoder, ViTEncoder, glyph_batch, unpatchify
from .checkpoint import Checkpoint
from .config import BackboneConfig
from .data import MADE_UP, GlyphImage
from .errors import EmptyInput, ShapeError


class CrossAttention(nn.Module):
    """Multi-head attention with separate query and key/value inputs."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ValueError("dim must be divisible by heads")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, queries: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        b, nq, c = queries.shape
        nk = context.shape[1]
        hd = c // self.heads
        q = self.q_proj(queries).reshape(b, nq, self.heads, hd).transpose(1, 2)
        k = self.k_proj(context).reshape(b, nk, self.heads, hd).transpose(1, 2)
        v = self.v_proj(context).reshape(b, nk, self.heads, hd).transpose(1, 2)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, nq, c)
        return self.out_proj(out)


class CrossBlock(nn.Module):
    """Pre-norm residual cross-attention block followed by a feed-forward."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float = 4.0):
        super().__init__()
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(dim)
        self.attn = CrossAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm_q(x), self.norm_kv(style))
        x = x + self.mlp(self.norm2(x))
        return x


class StyleModel(nn.Module):
    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        self.content_encoder = ViTEncoder(cfg)
        self.style_encoder = ViTEncoder(cfg)
        self.cross_blocks = nn.ModuleList(
            CrossBlock(cfg.hidden_size, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.cross_depth)
        )
        self.decoder = ViTDecoder(cfg)
        for blk in self.cross_blocks:
            # start at the content-identity point: residual branches emit zero
            nn.init.zeros_(blk.attn.out_proj.weight)
            nn.init.zeros_(blk.attn.out_proj.bias)
            nn.init.zeros_(blk.mlp.fc2.weight)
            nn.init.zeros_(blk.mlp.fc2.bias)

    @classmethod
    def from_pretrain(cls, ckpt: Checkpoint) -> "StyleModel":
        """Both encoders and the decoder start from the pretrained backbone."""
        model = cls(ckpt.backbone)
        model.content_encoder.load_state_dict(ckpt.state["encoder"])
        model.style_encoder.load_state_dict(ckpt.state["encoder"])
        model.decoder.load_state_dict(ckpt.state["decoder"])
        return model

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "StyleModel":
        if ckpt.stage == "pretrain":
            return cls.from_pretrain(ckpt)
        model = cls(ckpt.backbone)
        model.load_state_dict(ckpt.state["model"])
        return model

    @property
    def dtype(self) -> torch.dtype:
        return self.content_encoder.patch_embed.weight.dtype

    def _single(self, image) -> torch.Tensor:
        return glyph_batch(image, dtype=self.dtype)

    def encode_content(self, image) -> torch.Tensor:
        """Full-visibility content tokens: (patch_num + 1) x hidden for one image."""
        batched = isinstance(image, torch.Tensor) and image.ndim == 4
        tokens = self.content_encoder(self._single(image) if not batched else image)
        return tokens if batched else tokens[0]

    def encode_style(self, image) -> torch.Tensor:
        batched = isinstance(image, torch.Tensor) and image.ndim == 4
        tokens = self.style_encoder(self._single(image) if not batched else image)
        return tokens if batched else tokens[0]

    def encode_style_multi(self, images) -> torch.Tensor:
        """Element-wise mean of style encodings over a non-empty reference list."""
        items = list(images)
        if not items:
            raise EmptyInput("need at least one style reference image")
        stacked = torch.stack([self.encode_style(im) for im in items])
        return stacked.mean(dim=0)

    def cross_attend(self, content: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        """Fuse style into content tokens; output keeps content's exact shape."""
        squeeze = content.ndim == 2
        c = content[None] if squeeze else content
        s = style[None] if style.ndim == 2 else style
        if c.shape[-1] != s.shape[-1]:
            raise ShapeError(
                f"token width mismatch: content {c.shape[-1]} vs style {s.shape[-1]}"
            )
        if s.shape[0] == 1 and c.shape[0] > 1:
            s = s.expand(c.shape[0], -1, -1)
        for blk in self.cross_blocks:
            c = blk(c, s)
        return c[0] if squeeze else c

    def forward(self, content: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        """Differentiable pipeline on batches; returns unclamped (B, 1, H, W)."""
        tokens = self.cross_attend(self.encode_content(content), self.encode_style(style))
        patches = self.decoder(tokens, mask=None)
        return unpatchify(patches, self.cfg.patch_size, self.cfg.in_channels)

    @torch.no_grad()
    def generate(self, content_img, style_img) -> GlyphImage:
        """One-shot (or few-shot, given a list of references) glyph generation."""
        refs = style_img if isinstance(style_img, (list, tuple)) else [style_img]
        if not refs:
            raise EmptyInput("need at least one style reference image")
        content_tokens = self.encode_content(content_img)
        style_tokens = self.encode_style_multi(refs)
        fused = self.cross_attend(content_tokens, style_tokens)
        patches = self.decoder(fused[None], mask=None)
        image = unpatchify(patches, self.cfg.patch_size, self.cfg.in_channels)[0, 0]
        pixels = image.clamp(0.0, 1.0).to(torch.float32).cpu().numpy()
        charcode = content_img.charcode if isinstance(content_img, GlyphImage) else MADE_UP
        first = refs[0]
        style_id = first.style_id if isinstance(first, GlyphImage) else ""
        return GlyphImage(pixels, charcode, style_id)

    def checkpoint_state(self) -> dict:
        return {"model": self.state_dict()}

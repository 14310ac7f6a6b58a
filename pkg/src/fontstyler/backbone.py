"""ViT building blocks: patch embedding, random masking, encoder, MAE decoder."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .config import BackboneConfig
from .data import GlyphImage
from .errors import ShapeError


def _sincos_1d(dim: int, positions: np.ndarray) -> np.ndarray:
    assert dim % 2 == 0
    omega = 1.0 / 10000 ** (np.arange(dim // 2, dtype=np.float64) / (dim / 2.0))
    out = np.einsum("p,d->pd", positions.reshape(-1), omega)
    return np.concatenate([np.sin(out), np.cos(out)], axis=1)


def sincos_pos_embed(dim: int, grid_size: int, cls_token: bool = True) -> torch.Tensor:
    """Fixed 2-D sine/cosine positional table, zero row first for CLS."""
    if dim % 4 != 0:
        raise ValueError(f"positional embedding dim must be divisible by 4, got {dim}")
    coords = np.arange(grid_size, dtype=np.float64)
    gy, gx = np.meshgrid(coords, coords, indexing="ij")
    emb = np.concatenate([_sincos_1d(dim // 2, gy), _sincos_1d(dim // 2, gx)], axis=1)
    if cls_token:
        emb = np.concatenate([np.zeros((1, dim)), emb], axis=0)
    return torch.from_numpy(emb).float()


# ---------------------------------------------------------------------------
# Patch grid
# ---------------------------------------------------------------------------


def _image_tensor(image) -> torch.Tensor:
    if isinstance(image, GlyphImage):
        image = image.pixels
    if isinstance(image, np.ndarray):
        image = torch.from_numpy(np.ascontiguousarray(image))
    return image


def patchify(image, patch_size: int) -> torch.Tensor:
    """Split an image into a row-major matrix of flattened square patches.

    Accepts (H, W) or batched (B, C, H, W); returns (N, p*p) or (B, N, p*p*C).
    Exact inverse of :func:`unpatchify`.
    """
    x = _image_tensor(image)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None, None]
    if x.ndim != 4:
        raise ShapeError(f"expected (H, W) or (B, C, H, W), got {tuple(x.shape)}")
    b, c, h, w = x.shape
    p = patch_size
    if h != w or h % p != 0:
        raise ShapeError(f"image {h}x{w} not divisible into {p}x{p} patches")
    g = h // p
    x = x.reshape(b, c, g, p, g, p)
    x = torch.einsum("bcgphq->bghpqc", x)
    x = x.reshape(b, g * g, p * p * c)
    return x[0] if squeeze else x


def unpatchify(patches: torch.Tensor, patch_size: int, channels: int = 1) -> torch.Tensor:
    """Reassemble patchify output back into image form."""
    x = _image_tensor(patches)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    b, n, d = x.shape
    p = patch_size
    g = int(round(math.sqrt(n)))
    if g * g != n or d != p * p * channels:
        raise ShapeError(f"cannot unpatchify shape {tuple(x.shape)} with patch {p}")
    x = x.reshape(b, g, g, p, p, channels)
    x = torch.einsum("bghpqc->bcgphq", x)
    x = x.reshape(b, channels, g * p, g * p)
    return x[0, 0] if squeeze else x


# ---------------------------------------------------------------------------
# Masking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaskSpec:
    """Visible/masked patch index partition at a given mask ratio."""

    visible_idx: tuple[int, ...]
    masked_idx: tuple[int, ...]
    ratio: float

    def __post_init__(self):
        object.__setattr__(self, "visible_idx", tuple(sorted(self.visible_idx)))
        object.__setattr__(self, "masked_idx", tuple(sorted(self.masked_idx)))
        overlap = set(self.visible_idx) & set(self.masked_idx)
        if overlap:
            raise ValueError(f"patch indices both visible and masked: {sorted(overlap)}")

    @property
    def patch_num(self) -> int:
        return len(self.visible_idx) + len(self.masked_idx)


def mask_count(patch_num: int, ratio: float) -> int:
    # round-half-up so 64 patches at 0.65 mask exactly 42
    return int(math.floor(ratio * patch_num + 0.5))


def random_mask(patch_num: int, ratio: float, rng: np.random.Generator) -> MaskSpec:
    """Uniform without-replacement mask assignment, deterministic per rng state."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio {ratio} outside [0, 1)")
    n_masked = mask_count(patch_num, ratio)
    order = rng.permutation(patch_num)
    masked = tuple(int(i) for i in order[:n_masked])
    visible = tuple(int(i) for i in order[n_masked:])
    return MaskSpec(visible_idx=visible, masked_idx=masked, ratio=ratio)


# ---------------------------------------------------------------------------
# Transformer blocks
# ---------------------------------------------------------------------------


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ValueError("dim must be divisible by heads")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x):
        b, n, c = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, c // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv.unbind(0)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        x = (attn @ v).transpose(1, 2).reshape(b, n, c)
        return self.proj(x)


class Block(nn.Module):
    """Pre-norm transformer block: self-attention then MLP, both residual."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float = 4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        x = x + self.mlp(self.norm2(x))
        return x


# ---------------------------------------------------------------------------
# Encoder / decoder
# ---------------------------------------------------------------------------


class ViTEncoder(nn.Module):
    """Patch-embedding transformer encoder with optional MAE-style masking."""

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        self.patch_embed = nn.Linear(cfg.patch_dim, cfg.hidden_size)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, cfg.hidden_size))
        self.register_buffer(
            "pos_embed", sincos_pos_embed(cfg.hidden_size, cfg.grid_size), persistent=False
        )
        self.blocks = nn.ModuleList(
            Block(cfg.hidden_size, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.depth)
        )
        self.norm = nn.LayerNorm(cfg.hidden_size)
        nn.init.normal_(self.cls_token, std=0.02)

    def forward(self, images: torch.Tensor, mask: MaskSpec | None = None) -> torch.Tensor:
        """(B, C, H, W) -> (B, 1 + visible, hidden); CLS token leads."""
        cfg = self.cfg
        if images.ndim == 3:
            images = images[:, None]
        if images.shape[-1] != cfg.image_size or images.shape[-2] != cfg.image_size:
            raise ShapeError(
                f"expected {cfg.image_size}x{cfg.image_size} input, got {tuple(images.shape)}"
            )
        x = patchify(images, cfg.patch_size)
        x = self.patch_embed(x) + self.pos_embed[1:].to(x.dtype)
        if mask is not None:
            if mask.patch_num != cfg.patch_num:
                raise ShapeError(
                    f"mask covers {mask.patch_num} patches, image has {cfg.patch_num}"
                )
            keep = torch.as_tensor(mask.visible_idx, dtype=torch.long, device=x.device)
            x = x.index_select(1, keep)
        cls = (self.cls_token + self.pos_embed[:1]).to(x.dtype).expand(x.shape[0], -1, -1)
        x = torch.cat([cls, x], dim=1)
        for blk in self.blocks:
            x = blk(x)
        return self.norm(x)


class ViTDecoder(nn.Module):
    """Lightweight transformer that predicts every patch, masked ones included."""

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Linear(cfg.hidden_size, cfg.decoder_hidden)
        self.mask_token = nn.Parameter(torch.zeros(1, 1, cfg.decoder_hidden))
        self.register_buffer(
            "pos_embed", sincos_pos_embed(cfg.decoder_hidden, cfg.grid_size), persistent=False
        )
        self.blocks = nn.ModuleList(
            Block(cfg.decoder_hidden, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.decoder_depth)
        )
        self.norm = nn.LayerNorm(cfg.decoder_hidden)
        self.pred = nn.Linear(cfg.decoder_hidden, cfg.patch_dim)
        nn.init.normal_(self.mask_token, std=0.02)

    def forward(self, tokens: torch.Tensor, mask: MaskSpec | None = None) -> torch.Tensor:
        """(B, 1 + visible, hidden) -> (B, patch_num, patch_dim) in raster order."""
        cfg = self.cfg
        n_visible = cfg.patch_num if mask is None else len(mask.visible_idx)
        if tokens.ndim != 3 or tokens.shape[1] != 1 + n_visible:
            raise ShapeError(
                f"token count {tuple(tokens.shape)} does not match 1 + {n_visible} visible patches"
            )
        x = self.embed(tokens)
        b = x.shape[0]
        if mask is None:
            full = x[:, 1:]
        else:
            full = self.mask_token.to(x.dtype).expand(b, cfg.patch_num, -1).clone()
            keep = torch.as_tensor(mask.visible_idx, dtype=torch.long, device=x.device)
            full = full.index_copy(1, keep, x[:, 1:])
        x = torch.cat([x[:, :1], full], dim=1) + self.pos_embed.to(x.dtype)
        for blk in self.blocks:
            x = blk(x)
        x = self.norm(x)
        return self.pred(x[:, 1:])


def glyph_batch(images, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Stack GlyphImages/arrays into a (B, 1, H, W) tensor."""
    if isinstance(images, (GlyphImage, np.ndarray)) or (
        isinstance(images, torch.Tensor) and images.ndim == 2
    ):
        images = [images]
    rows = [_image_tensor(im).to(dtype) for im in images]
    return torch.stack(rows)[:, None] if rows[0].ndim == 2 else torch.stack(rows)

"""Self-supervised masked-reconstruction pretraining of the shared backbone."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import torch

from .backbone import MaskSpec, ViTDecoder, ViTEncoder, glyph_batch, patchify, random_mask
from .config import BackboneConfig, PretrainConfig
from .data import DatasetManifest
from .errors import DataError, ShapeError


def mae_loss(pred_patches: torch.Tensor, target_image, mask: MaskSpec) -> torch.Tensor:
    """Mean squared error over the masked patches only.

    Perturbing predictions on visible patches leaves the value bit-identical.
    """
    pred = pred_patches if isinstance(pred_patches, torch.Tensor) else torch.as_tensor(pred_patches)
    squeeze = pred.ndim == 2
    if squeeze:
        pred = pred[None]
    target = glyph_batch(target_image, dtype=pred.dtype)
    patch = int(round(math.sqrt(pred.shape[-1])))
    tgt = patchify(target, patch)
    if tgt.shape[0] == 1 and pred.shape[0] > 1:
        tgt = tgt.expand(pred.shape[0], -1, -1)
    if pred.shape[-2:] != tgt.shape[-2:]:
        raise ShapeError(f"prediction {tuple(pred.shape)} does not cover target patches {tuple(tgt.shape)}")
    if mask.patch_num != pred.shape[-2]:
        raise ShapeError(f"mask covers {mask.patch_num} patches, prediction has {pred.shape[-2]}")
    if not mask.masked_idx:
        return pred.sum() * 0.0
    idx = torch.as_tensor(mask.masked_idx, dtype=torch.long, device=pred.device)
    diff = pred.index_select(1, idx) - tgt.index_select(1, idx)
    return (diff ** 2).mean()


def _cosine_warmup_lr(step: int, total: int, base_lr: float, warmup_fraction: float) -> float:
    warmup = max(1, int(round(total * warmup_fraction)))
    if step < warmup:
        return base_lr * (step + 1) / warmup
    if total <= warmup:
        return base_lr
    progress = (step - warmup) / (total - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def pretrain(
    manifest: DatasetManifest,
    cfg: PretrainConfig,
    backbone: BackboneConfig,
    store,
    split: str = "pretrain",
    log_path: str | Path | None = None,
) -> tuple[ViTEncoder, ViTDecoder, list[float]]:
    """Train encoder+decoder to reconstruct masked glyph patches.

    Returns the trained modules and the per-epoch mean loss curve.
    Deterministic for a fixed seed on a single-worker run.
    """
    entries = manifest.split_entries(split)
    if not entries:
        raise DataError(f"split {split!r} is empty")

    torch.manual_seed(cfg.seed)
    encoder = ViTEncoder(backbone)
    decoder = ViTDecoder(backbone)
    images = glyph_batch([store(e) for e in entries])

    rng = np.random.default_rng(cfg.seed)
    params = list(encoder.parameters()) + list(decoder.parameters())
    opt = torch.optim.AdamW(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    steps_per_epoch = max(1, math.ceil(len(entries) / cfg.batch_size))
    total_steps = steps_per_epoch * cfg.epochs

    log_f = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log_f = open(log_path, "w")

    epoch_losses: list[float] = []
    step = 0
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(entries))
            losses = []
            for start in range(0, len(entries), cfg.batch_size):
                batch = images[torch.as_tensor(order[start : start + cfg.batch_size])]
                mask = random_mask(backbone.patch_num, cfg.mask_ratio, rng)
                lr = _cosine_warmup_lr(step, total_steps, cfg.learning_rate, cfg.warmup_fraction)
                for group in opt.param_groups:
                    group["lr"] = lr
                tokens = encoder(batch, mask)
                pred = decoder(tokens, mask)
                loss = mae_loss(pred, batch, mask)
                opt.zero_grad(set_to_none=True)
                loss.backward()
                opt.step()
                losses.append(float(loss.detach()))
                if log_f is not None:
                    log_f.write(json.dumps({"epoch": epoch, "step": step, "loss": losses[-1]}) + "\n")
                step += 1
            epoch_losses.append(float(np.mean(losses)))
    finally:
        if log_f is not None:
            log_f.close()
    return encoder, decoder, epoch_losses


def pretrain_state(encoder: ViTEncoder, decoder: ViTDecoder) -> dict:
    """State-dict payload stored in a `pretrain`-stage checkpoint."""
    return {"encoder": encoder.state_dict(), "decoder": decoder.state_dict()}

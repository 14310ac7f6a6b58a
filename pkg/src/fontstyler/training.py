"""Main-stage and refinement-stage training of the style model."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import torch

from .backbone import glyph_batch
from .config import LossWeights, TrainConfig
from .data import DatasetManifest, Triplet, sample_triplet
from .errors import DataError
from .losses import PerceptualTaps, combined_loss, refine_loss
from .model import StyleModel


class StepLogger:
    """Line-delimited component log: (step, L_content, L_style, L_MSE, total)."""

    def __init__(self, path: str | Path | None):
        self._f = None
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            self._f = open(path, "w")

    def write(self, step: int, parts: dict[str, float], total: float) -> None:
        if self._f is None:
            return
        rec = {"step": step, **{f"loss_{k}": v for k, v in parts.items()}, "total": total}
        self._f.write(json.dumps(rec) + "\n")

    def close(self) -> None:
        if self._f is not None:
            self._f.close()


def _triplet_batch(triplets: list[Triplet], dtype) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    content = glyph_batch([t.content for t in triplets], dtype)
    style = glyph_batch([t.style_ref for t in triplets], dtype)
    target = glyph_batch([t.target for t in triplets], dtype)
    return content, style, target


def _step_loss(model, triplets, weights, taps, loss_kind):
    content, style, target = _triplet_batch(triplets, model.dtype)
    pred = model(content, style)
    if loss_kind == "refine":
        total = refine_loss(pred, target)
        parts = {"l1": float(total.detach())}
    elif loss_kind == "mse":
        total = ((pred - target) ** 2).mean()
        parts = {"mse": float(total.detach())}
    else:
        total, parts = combined_loss(pred, target, weights, taps)
    return total, parts


def train_main(
    model: StyleModel,
    manifest: DatasetManifest,
    store,
    cfg: TrainConfig,
    weights: LossWeights,
    taps: PerceptualTaps | None,
    log_path: str | Path | None = None,
    split: str = "train",
) -> list[float]:
    """Combined-loss training over the train split; returns per-step totals."""
    entries = manifest.split_entries(split)
    if not entries:
        raise DataError(f"split {split!r} is empty")
    if cfg.loss == "combined" and taps is None:
        raise ValueError("combined loss requires perceptual taps")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    log = StepLogger(log_path)
    totals: list[float] = []
    step = 0
    try:
        for _ in range(cfg.epochs_main):
            order = rng.permutation(len(entries))
            for start in range(0, len(entries), cfg.batch_size):
                batch = [
                    sample_triplet(manifest, split, rng, store, cfg.p_ref_drop, target=entries[i])
                    for i in order[start : start + cfg.batch_size]
                ]
                total, parts = _step_loss(model, batch, weights, taps, cfg.loss)
                opt.zero_grad(set_to_none=True)
                total.backward()
                opt.step()
                totals.append(float(total.detach()))
                log.write(step, parts, totals[-1])
                step += 1
    finally:
        log.close()
    return totals


def refine_stage(
    model: StyleModel,
    manifest: DatasetManifest,
    store,
    cfg: TrainConfig,
    log_path: str | Path | None = None,
    split: str = "train",
) -> list[float]:
    """Short L1-only pass replacing the perceptual objective.

    Runs `refine_fraction` of one epoch; a fraction of 0 leaves the weights
    untouched.
    """
    entries = manifest.split_entries(split)
    if not entries:
        raise DataError(f"split {split!r} is empty")
    steps_per_epoch = math.ceil(len(entries) / cfg.batch_size)
    steps = round(cfg.refine_fraction * steps_per_epoch)
    if steps == 0:
        return []

    torch.manual_seed(cfg.seed + 1)
    rng = np.random.default_rng(cfg.seed + 1)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    log = StepLogger(log_path)
    totals: list[float] = []
    order = rng.permutation(len(entries))
    try:
        for step in range(steps):
            idx = [order[(step * cfg.batch_size + j) % len(entries)] for j in range(cfg.batch_size)]
            batch = [
                sample_triplet(manifest, split, rng, store, cfg.p_ref_drop, target=entries[i])
                for i in idx
            ]
            total, parts = _step_loss(model, batch, None, None, "refine")
            opt.zero_grad(set_to_none=True)
            total.backward()
            opt.step()
            totals.append(float(total.detach()))
            log.write(step, parts, totals[-1])
    finally:
        log.close()
    return totals


def fit_triplets(
    model: StyleModel,
    triplets: list[Triplet],
    steps: int,
    batch_size: int,
    learning_rate: float,
    weights: LossWeights | None = None,
    taps: PerceptualTaps | None = None,
    loss: str = "combined",
    seed: int = 0,
) -> list[float]:
    """Optimize directly against a fixed triplet list (overfit/micro runs)."""
    if not triplets:
        raise DataError("no triplets to fit")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    opt = torch.optim.AdamW(model.parameters(), lr=learning_rate)
    totals = []
    for step in range(steps):
        idx = rng.integers(len(triplets), size=min(batch_size, len(triplets)))
        batch = [triplets[i] for i in idx]
        total, _ = _step_loss(model, batch, weights, taps, loss)
        opt.zero_grad(set_to_none=True)
        total.backward()
        opt.step()
        totals.append(float(total.detach()))
    return totals

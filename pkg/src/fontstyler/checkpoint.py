"""Self-describing checkpoint container shared by every training stage."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import torch

from .config import BackboneConfig
from .errors import MissingCheckpoint

FORMAT_VERSION = 1
STAGES = ("pretrain", "main", "refined")


@dataclass
class Checkpoint:
    stage: str
    backbone: BackboneConfig
    state: dict
    extra: dict
    version: int = FORMAT_VERSION


def save_checkpoint(
    path: str | Path,
    stage: str,
    backbone: BackboneConfig,
    state: dict,
    extra: dict | None = None,
) -> Path:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}, expected one of {STAGES}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": FORMAT_VERSION,
        "stage": stage,
        "backbone": asdict(backbone),
        "state": state,
        "extra": extra or {},
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise MissingCheckpoint(f"no checkpoint at {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if "version" not in payload:
        raise MissingCheckpoint(f"{path} is not a recognized checkpoint (no version field)")
    return Checkpoint(
        stage=payload["stage"],
        backbone=BackboneConfig(**payload["backbone"]),
        state=payload["state"],
        extra=payload.get("extra", {}),
        version=payload["version"],
    )

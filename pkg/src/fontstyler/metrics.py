"""Quantitative evaluation over the four unseen partitions.

Reports L1, MSE and RMSE together (published tables are ambiguous about
which convention a bare "MSE" column uses), plus SSIM, and LPIPS/FID when a
feature extractor is supplied.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.signal import convolve2d

from .data import DatasetManifest, sample_triplet
from .errors import DegenerateSet, EmptyPartition, ShapeError
from .losses import PerceptualTaps, _pair
from .rag import generate_with_rag

PARTITIONS = {"SS": "test_SS", "SC": "test_SC", "CS": "test_CS", "CC": "test_CC"}


@dataclass
class MetricReport:
    partition: str
    l1: float
    mse: float
    rmse: float
    ssim: float
    lpips: float | None
    fid: float | None
    sample_count: int
    rag_references: tuple[int, ...] | None = None

    def __post_init__(self):
        if abs(self.rmse - math.sqrt(self.mse)) > 1e-9:
            raise ValueError("rmse must equal sqrt(mse)")


def _as_array(image) -> np.ndarray:
    pixels = getattr(image, "pixels", image)
    return np.asarray(pixels, dtype=np.float64)


def pixel_metrics(pred, gt) -> tuple[float, float, float]:
    """(mean absolute error, mean squared error, its square root)."""
    p, g = _as_array(pred), _as_array(gt)
    if p.shape != g.shape:
        raise ShapeError(f"shape mismatch: {p.shape} vs {g.shape}")
    diff = p - g
    l1 = float(np.abs(diff).mean())
    mse = float((diff ** 2).mean())
    return l1, mse, math.sqrt(mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g1 = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    win = np.outer(g1, g1)
    return win / win.sum()


def ssim(pred, gt, window_size: int = 11, sigma: float = 1.5) -> float:
    """Mean local structural similarity, Gaussian 11x11 window, range 1.0."""
    p, g = _as_array(pred), _as_array(gt)
    if p.shape != g.shape:
        raise ShapeError(f"shape mismatch: {p.shape} vs {g.shape}")
    if min(p.shape) < window_size:
        raise ShapeError(f"image {p.shape} smaller than the {window_size}x{window_size} window")
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    win = _gaussian_window(window_size, sigma)

    mu_p = convolve2d(p, win, mode="valid")
    mu_g = convolve2d(g, win, mode="valid")
    var_p = convolve2d(p * p, win, mode="valid") - mu_p ** 2
    var_g = convolve2d(g * g, win, mode="valid") - mu_g ** 2
    cov = convolve2d(p * g, win, mode="valid") - mu_p * mu_g

    num = (2 * mu_p * mu_g + c1) * (2 * cov + c2)
    den = (mu_p ** 2 + mu_g ** 2 + c1) * (var_p + var_g + c2)
    return float((num / den).mean())


def lpips(pred, gt, taps: PerceptualTaps) -> float:
    """Unit-normalized deep-feature L2 distance averaged over tap layers."""
    import torch

    p, g = _pair(pred, gt)
    with torch.no_grad():
        fp = taps.extractor(p, taps.style_layers)
        fg = taps.extractor(g, taps.style_layers)
        total = 0.0
        for layer in taps.style_layers:
            a = _unit_channels(fp[layer])
            b = _unit_channels(fg[layer])
            total += float(((a - b) ** 2).sum(dim=1).mean())
        return total / len(taps.style_layers)


def _unit_channels(f):
    norm = (f ** 2).sum(dim=1, keepdim=True).sqrt()
    return f / (norm + 1e-10)


def pooled_features(images, taps: PerceptualTaps, layer: str | None = None) -> np.ndarray:
    """Per-image feature vectors: channel-wise global mean of one tap layer."""
    import torch

    layer = layer or taps.style_layers[-1]
    rows = []
    with torch.no_grad():
        for im in images:
            f = taps.extractor(_pair(im, im)[0], [layer])[layer]
            rows.append(f.mean(dim=(2, 3))[0].cpu().numpy().astype(np.float64))
    return np.stack(rows)


def fid_from_features(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets."""
    if feats_a.shape[0] < 2 or feats_b.shape[0] < 2:
        raise DegenerateSet("need at least 2 samples per set to form covariances")
    mu_a, mu_b = feats_a.mean(axis=0), feats_b.mean(axis=0)
    sig_a = np.cov(feats_a, rowvar=False)
    sig_b = np.cov(feats_b, rowvar=False)
    sig_a = np.atleast_2d(sig_a)
    sig_b = np.atleast_2d(sig_b)

    prod = sig_a @ sig_b
    if not prod.any():
        covmean = np.zeros_like(prod)
    else:
        covmean, _ = scipy.linalg.sqrtm(prod, disp=False)
        if not np.isfinite(covmean).all():
            eps = 1e-9 * np.eye(sig_a.shape[0])
            covmean, _ = scipy.linalg.sqrtm((sig_a + eps) @ (sig_b + eps), disp=False)
    covmean = np.real(covmean)

    diff = mu_a - mu_b
    value = diff @ diff + np.trace(sig_a) + np.trace(sig_b) - 2.0 * np.trace(covmean)
    return float(max(value, 0.0))


def fid(set_a, set_b, taps: PerceptualTaps, layer: str | None = None) -> float:
    """Frechet distance between two glyph sets under the pooled extractor."""
    if len(set_a) < 2 or len(set_b) < 2:
        raise DegenerateSet("need at least 2 images per set")
    return fid_from_features(pooled_features(set_a, taps, layer), pooled_features(set_b, taps, layer))


def evaluate_partition(
    model,
    manifest: DatasetManifest,
    partition: str,
    store,
    taps: PerceptualTaps | None = None,
    use_rag: bool = False,
    indexes: dict | None = None,
    reference_loader=None,
    seed: int = 0,
    max_samples: int | None = None,
) -> MetricReport:
    """Generate every triplet of one partition and aggregate the metric means.

    `partition` accepts either the short key ("SS") or the split name
    ("test_SS"). With `use_rag`, the style reference comes from retrieval and
    the chosen charcodes are recorded on the report.
    """
    split = PARTITIONS.get(partition, partition)
    short = split.removeprefix("test_")
    entries = manifest.split_entries(split)
    if not entries:
        raise EmptyPartition(f"partition {short} ({split}) has no entries")
    rng = np.random.default_rng(seed)
    if max_samples is not None and len(entries) > max_samples:
        picked = rng.permutation(len(entries))[:max_samples]
        entries = [entries[i] for i in sorted(picked)]

    l1s, mses, ssims, lpipss = [], [], [], []
    preds, gts = [], []
    rag_refs: list[int] = []
    for entry in entries:
        triplet = sample_triplet(manifest, split, rng, store, p_ref_drop=0.0, target=entry)
        if use_rag:
            if indexes is None or reference_loader is None:
                raise ValueError("use_rag requires indexes and a reference_loader")
            pred, ref_code = generate_with_rag(
                triplet.content, entry.style_id, model, indexes, reference_loader
            )
            rag_refs.append(ref_code)
        else:
            pred = model.generate(triplet.content, triplet.style_ref)
        l1, mse, _ = pixel_metrics(pred, triplet.target)
        l1s.append(l1)
        mses.append(mse)
        ssims.append(ssim(pred, triplet.target))
        if taps is not None:
            lpipss.append(lpips(pred, triplet.target, taps))
            preds.append(pred)
            gts.append(triplet.target)

    mse_mean = float(np.mean(mses))
    fid_value = None
    if taps is not None and len(preds) >= 2:
        fid_value = fid(preds, gts, taps)
    return MetricReport(
        partition=short,
        l1=float(np.mean(l1s)),
        mse=mse_mean,
        rmse=math.sqrt(mse_mean),
        ssim=float(np.mean(ssims)),
        lpips=float(np.mean(lpipss)) if lpipss else None,
        fid=fid_value,
        sample_count=len(entries),
        rag_references=tuple(rag_refs) if use_rag else None,
    )


def report_table(reports: list[MetricReport]) -> str:
    """Text table shaped like the published results: one row per partition."""
    header = f"{'Partition':<10}{'L1':>10}{'MSE':>10}{'RMSE':>10}{'SSIM':>10}{'LPIPS':>10}{'FID':>12}{'N':>7}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lp = f"{r.lpips:.5f}" if r.lpips is not None else "absent"
        fd = f"{r.fid:.5f}" if r.fid is not None else "absent"
        lines.append(
            f"{r.partition:<10}{r.l1:>10.5f}{r.mse:>10.5f}{r.rmse:>10.5f}"
            f"{r.ssim:>10.5f}{lp:>10}{fd:>12}{r.sample_count:>7}"
        )
    return "\n".join(lines)


def save_reports(reports: list[MetricReport], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in reports:
            rec = {
                "partition": r.partition,
                "l1": r.l1,
                "mse": r.mse,
                "rmse": r.rmse,
                "ssim": r.ssim,
                "lpips": r.lpips,
                "fid": r.fid,
                "sample_count": r.sample_count,
            }
            f.write(json.dumps(rec) + "\n")

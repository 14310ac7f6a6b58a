"""Glyph rendering, dataset manifests, split construction, and triplet sampling.

Images are square grayscale rasters in [0, 1] with 1.0 = background (white)
and 0.0 = ink. Manifests are JSON-lines files with one entry per glyph.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from fontTools.ttLib import TTFont
from PIL import Image, ImageDraw, ImageFont

from .errors import BadFont, Exhausted, InsufficientData, MissingGlyph

MADE_UP = -1  # charcode sentinel for user-drawn inputs with no codepoint

SPLITS = ("pretrain", "train", "val", "test_SS", "test_SC", "test_CS", "test_CC")
TEST_SPLITS = ("test_SS", "test_SC", "test_CS", "test_CC")
# test mass proportions, from the reported partition sizes 80k/35k/20k/50k
TEST_PROPORTIONS = {"test_SS": 80, "test_SC": 35, "test_CS": 20, "test_CC": 50}
# partitions where the sampler must withhold the target character as reference
REF_WITHHELD_SPLITS = ("test_SC", "test_CC")


@dataclass
class GlyphImage:
    """One rendered character: square float raster plus identity metadata."""

    pixels: np.ndarray
    charcode: int
    style_id: str

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pixels.shape[1]:
            raise ValueError(f"glyph raster must be square 2-D, got {self.pixels.shape}")
        lo, hi = float(self.pixels.min(initial=0.0)), float(self.pixels.max(initial=1.0))
        if lo < -1e-6 or hi > 1 + 1e-6:
            raise ValueError(f"glyph pixels outside [0, 1]: min={lo} max={hi}")
        np.clip(self.pixels, 0.0, 1.0, out=self.pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def blank(cls, size: int, charcode: int = MADE_UP, style_id: str = "") -> "GlyphImage":
        return cls(np.ones((size, size), dtype=np.float32), charcode, style_id)

    def save_png(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arr = np.round(self.pixels * 255.0).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(path)

    @classmethod
    def load_png(cls, path: str | Path, charcode: int = MADE_UP, style_id: str = "") -> "GlyphImage":
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float32) / 255.0
        return cls(arr, charcode, style_id)


@dataclass
class Triplet:
    """Training sample: content glyph, style reference, and ground truth."""

    content: GlyphImage
    style_ref: GlyphImage
    target: GlyphImage

    def __post_init__(self):
        if self.content.charcode != self.target.charcode:
            raise ValueError("content and target must share a charcode")
        if self.style_ref.style_id != self.target.style_id:
            raise ValueError("style reference and target must share a style_id")


@dataclass(frozen=True)
class ManifestEntry:
    charcode: int
    style_id: str
    language: str
    split: str
    path: str

    @property
    def key(self) -> tuple[int, str]:
        return (self.charcode, self.style_id)


class DatasetManifest:
    """Ordered collection of glyph entries with split assignments."""

    def __init__(self, entries: Iterable[ManifestEntry] = (), content_styles: Iterable[str] = ()):
        self.entries: list[ManifestEntry] = list(entries)
        self.content_styles: list[str] = sorted(set(content_styles))

    def __len__(self) -> int:
        return len(self.entries)

    def styles(self) -> list[str]:
        return sorted({e.style_id for e in self.entries})

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def split_styles(self, split: str) -> set[str]:
        return {e.style_id for e in self.entries if e.split == split}

    def style_entries(self, style_id: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.style_id == style_id]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            f.write(json.dumps({"content_styles": self.content_styles}) + "\n")
            for e in self.entries:
                rec = {
                    "codepoint": e.charcode,
                    "style_id": e.style_id,
                    "language": e.language,
                    "split": e.split,
                    "path": e.path,
                }
                f.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        entries = []
        content_styles: list[str] = []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if "content_styles" in rec:
                    content_styles = rec["content_styles"]
                    continue
                entries.append(
                    ManifestEntry(
                        charcode=int(rec["codepoint"]),
                        style_id=rec["style_id"],
                        language=rec["language"],
                        split=rec["split"],
                        path=rec["path"],
                    )
                )
        return cls(entries, content_styles)


def language_of(charcode: int) -> str:
    """Coarse Unicode-block language tag used for manifest bookkeeping."""
    if 0xAC00 <= charcode <= 0xD7AF or 0x1100 <= charcode <= 0x11FF or 0x3130 <= charcode <= 0x318F:
        return "ko"
    if 0x3040 <= charcode <= 0x30FF or 0x31F0 <= charcode <= 0x31FF:
        return "ja"
    if 0x4E00 <= charcode <= 0x9FFF or 0x3400 <= charcode <= 0x4DBF:
        return "zh"
    return "en"


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

MARGIN = 0.1  # blank border fraction on each side of the canvas


@lru_cache(maxsize=64)
def _font_cmap(font_file: str) -> frozenset[int]:
    try:
        with TTFont(font_file, lazy=True, fontNumber=0) as tt:
            cmap = tt.getBestCmap()
    except Exception as exc:
        raise BadFont(f"cannot parse font file {font_file}: {exc}") from exc
    if cmap is None:
        raise BadFont(f"font file {font_file} has no usable character map")
    return frozenset(cmap)


@lru_cache(maxsize=64)
def _pil_font(font_file: str, px: int) -> ImageFont.FreeTypeFont:
    try:
        return ImageFont.truetype(font_file, px)
    except Exception as exc:
        raise BadFont(f"cannot open font file {font_file}: {exc}") from exc


def render_glyph(
    font_file: str | Path,
    charcode: int,
    image_size: int,
    margin: float = MARGIN,
    style_id: str | None = None,
) -> GlyphImage:
    """Rasterize one codepoint: centered, scaled to fit, dark ink on white.

    The glyph is drawn oversized, cropped to its ink bounding box, resized to
    fit the canvas minus the margin, and contrast-normalized so the darkest
    ink pixel is exactly 0 whenever any ink exists.
    """
    if image_size <= 0:
        raise ValueError("image_size must be positive")
    font_file = str(font_file)
    if charcode not in _font_cmap(font_file):
        raise MissingGlyph(f"font {font_file} has no glyph for U+{charcode:04X}")

    draw_px = image_size * 4
    canvas_px = draw_px * 3
    font = _pil_font(font_file, draw_px)
    page = Image.new("L", (canvas_px, canvas_px), 255)
    ImageDraw.Draw(page).text((draw_px, draw_px), chr(charcode), font=font, fill=0)

    ink_box = page.point(lambda v: 255 - v).getbbox()
    if style_id is None:
        style_id = Path(font_file).stem
    if ink_box is None:
        # codepoint exists but has an empty outline (e.g. space)
        return GlyphImage.blank(image_size, charcode, style_id)

    glyph = page.crop(ink_box)
    inner = max(1, round(image_size * (1.0 - 2.0 * margin)))
    scale = inner / max(glyph.width, glyph.height)
    w = max(1, round(glyph.width * scale))
    h = max(1, round(glyph.height * scale))
    glyph = glyph.resize((w, h), Image.LANCZOS)

    canvas = Image.new("L", (image_size, image_size), 255)
    canvas.paste(glyph, ((image_size - w) // 2, (image_size - h) // 2))
    pixels = np.asarray(canvas, dtype=np.float32) / 255.0

    lo = float(pixels.min())
    if lo < 1.0 and lo > 0.0:
        pixels = (pixels - lo) / (1.0 - lo)
    return GlyphImage(np.clip(pixels, 0.0, 1.0), charcode, style_id)


def glyph_path(style_id: str, charcode: int) -> str:
    """Relative PNG location for one glyph: `<style_id>/<hex codepoint>.png`."""
    return f"{style_id}/{charcode:04X}.png"


class GlyphStore:
    """Resolves manifest entries to pixel data, caching decoded PNGs."""

    def __init__(self, root: str | Path, cache_size: int = 4096):
        self.root = Path(root)
        self._load = lru_cache(maxsize=cache_size)(self._load_uncached)

    def _load_uncached(self, path: str, charcode: int, style_id: str) -> GlyphImage:
        return GlyphImage.load_png(self.root / path, charcode, style_id)

    def __call__(self, entry: ManifestEntry) -> GlyphImage:
        return self._load(entry.path, entry.charcode, entry.style_id)


# ---------------------------------------------------------------------------
# Split construction
# ---------------------------------------------------------------------------


def _apportion(total: int, weights: dict[str, int]) -> dict[str, int]:
    """Largest-remainder apportionment of `total` across weighted buckets."""
    wsum = sum(weights.values())
    raw = {k: total * w / wsum for k, w in weights.items()}
    out = {k: math.floor(v) for k, v in raw.items()}
    leftover = total - sum(out.values())
    by_frac = sorted(weights, key=lambda k: (raw[k] - out[k], weights[k]), reverse=True)
    for k in by_frac[:leftover]:
        out[k] += 1
    return out


def _take_styles(styles: list[str], sizes: dict[str, int], need: int) -> list[str]:
    """Greedily pick held-out styles until their entry mass covers `need`."""
    taken, mass = [], 0
    for s in styles:
        if mass >= need:
            break
        taken.append(s)
        mass += sizes[s]
    return taken


def build_splits(
    manifest: DatasetManifest,
    seed: int,
    fractions: dict[str, float],
    content_styles: list[str] | None = None,
    allow_empty_test: bool = False,
) -> DatasetManifest:
    """Assign every entry to pretrain/train/val or one of the four test partitions.

    Test mass is apportioned 80:35:20:50 to SS/SC/CS/CC. SS and SC come from
    whole style fonts withheld from training; CS and CC from withheld fonts of
    the designated content pool, so every partition's unseen-ness invariant is
    mechanically checkable. Leftover entries of withheld fonts land in val.
    Deterministic for a given (manifest, seed, fractions).
    """
    if not manifest.entries:
        raise InsufficientData("manifest has no entries")
    frac = dict(fractions)
    pre_frac = frac.pop("pretrain", 0.0)
    body = sum(frac.get(k, 0.0) for k in ("train", "val", "test"))
    if abs(body - 1.0) > 1e-6:
        raise ValueError(f"train/val/test fractions must sum to 1, got {body}")

    rng = np.random.default_rng(seed)
    entries = list(manifest.entries)
    n_total = len(entries)
    styles = sorted({e.style_id for e in entries})

    content_pool = sorted(set(content_styles if content_styles is not None else manifest.content_styles))
    if not content_pool:
        # deterministic default: roughly a fifth of all styles serve as content fonts
        k = max(1, math.ceil(len(styles) / 5))
        content_pool = sorted(rng.permutation(styles)[:k].tolist())
    style_pool = [s for s in styles if s not in content_pool]

    n_pre = round(pre_frac * n_total)
    remainder = n_total - n_pre
    n_test = round(frac.get("test", 0.0) * remainder)
    n_val = round(frac.get("val", 0.0) * remainder)
    targets = _apportion(n_test, TEST_PROPORTIONS) if n_test > 0 else {k: 0 for k in TEST_SPLITS}

    if not allow_empty_test:
        empty = [k for k in TEST_SPLITS if targets[k] == 0]
        if empty:
            raise InsufficientData(
                f"partitions {empty} would be empty; pass allow_empty_test to accept"
            )

    sizes = {s: 0 for s in styles}
    for e in entries:
        sizes[e.style_id] += 1

    need_style = targets["test_SS"] + targets["test_SC"]
    need_content = targets["test_CS"] + targets["test_CC"]
    heldout_style = _take_styles(list(rng.permutation(style_pool)), sizes, need_style) if need_style else []
    heldout_content = (
        _take_styles(list(rng.permutation(content_pool)), sizes, need_content) if need_content else []
    )
    if need_style and (not heldout_style or len(heldout_style) >= max(1, len(style_pool))):
        raise InsufficientData("cannot withhold a style font and still keep one for training")
    if need_content and (not heldout_content or len(heldout_content) >= len(content_pool)):
        raise InsufficientData("cannot withhold a content font and still keep one for training")

    def draw(pool: list[int], count: int) -> list[int]:
        count = min(count, len(pool))
        picked = rng.choice(len(pool), size=count, replace=False) if count else []
        chosen = [pool[i] for i in picked]
        keep = set(picked)
        pool[:] = [v for i, v in enumerate(pool) if i not in keep]
        return chosen

    assignment: dict[int, str] = {}
    style_idx = [i for i, e in enumerate(entries) if e.style_id in set(heldout_style)]
    content_idx = [i for i, e in enumerate(entries) if e.style_id in set(heldout_content)]
    for split, pool in (
        ("test_SS", style_idx),
        ("test_SC", style_idx),
        ("test_CS", content_idx),
        ("test_CC", content_idx),
    ):
        for i in draw(pool, targets[split]):
            assignment[i] = split

    if not allow_empty_test:
        for k in TEST_SPLITS:
            if targets[k] > 0 and not any(v == k for v in assignment.values()):
                raise InsufficientData(f"partition {k} ended up empty")

    # withheld-font leftovers go to val; top up val from seen styles if short
    leftovers = style_idx + content_idx
    for i in leftovers:
        assignment[i] = "val"
    seen_idx = [i for i in range(n_total) if i not in assignment]
    for i in draw(seen_idx, max(0, n_val - len(leftovers))):
        assignment[i] = "val"

    pre_pool = [i for i in seen_idx if entries[i].language != "ko"]
    for i in draw(pre_pool, n_pre):
        assignment[i] = "pretrain"

    out = []
    for i, e in enumerate(entries):
        out.append(replace(e, split=assignment.get(i, "train")))
    result = DatasetManifest(out, content_pool)
    _check_split_invariants(result)
    return result


def _check_split_invariants(manifest: DatasetManifest) -> None:
    seen: dict[tuple[int, str], str] = {}
    for split in TEST_SPLITS:
        for e in manifest.split_entries(split):
            if e.key in seen:
                raise AssertionError(f"{e.key} in both {seen[e.key]} and {split}")
            seen[e.key] = split
    train_styles = manifest.split_styles("train") | manifest.split_styles("pretrain")
    for split in ("test_SS", "test_SC"):
        bad = manifest.split_styles(split) & train_styles
        if bad:
            raise AssertionError(f"{split} styles leak into training: {sorted(bad)}")
    content = set(manifest.content_styles)
    for split in ("test_CS", "test_CC"):
        pool = manifest.split_styles(split)
        if pool - content:
            raise AssertionError(f"{split} contains non-content styles: {sorted(pool - content)}")
        if pool & train_styles:
            raise AssertionError(f"{split} content fonts leak into training")


# ---------------------------------------------------------------------------
# Triplet sampling
# ---------------------------------------------------------------------------


def sample_triplet(
    manifest: DatasetManifest,
    split: str,
    rng: np.random.Generator,
    store: Callable[[ManifestEntry], GlyphImage],
    p_ref_drop: float = 0.5,
    target: ManifestEntry | None = None,
) -> Triplet:
    """Draw one (content, style reference, target) triplet from a split.

    Content comes from the designated content-font pool holding the same
    character. With probability `p_ref_drop` (forced to 1 in the SC/CC
    partitions) the style reference is a different character of the target
    style, modeling inputs with no access to the reference character.
    """
    pool = manifest.split_entries(split)
    if not pool:
        raise Exhausted(f"split {split} is empty")
    if target is None:
        target = pool[int(rng.integers(len(pool)))]

    content_styles = set(manifest.content_styles) or set(manifest.styles())
    candidates = [
        e for e in manifest.entries if e.style_id in content_styles and e.charcode == target.charcode
    ]
    if not candidates:
        raise Exhausted(f"no content glyph available for U+{target.charcode:04X}")
    trained = [e for e in candidates if e.split == "train"]
    chosen_pool = trained or candidates
    distinct = [e for e in chosen_pool if e.style_id != target.style_id]
    chosen_pool = distinct or chosen_pool
    content_entry = chosen_pool[int(rng.integers(len(chosen_pool)))]

    drop = split in REF_WITHHELD_SPLITS or float(rng.random()) < p_ref_drop
    inventory = manifest.style_entries(target.style_id)
    if drop:
        refs = [e for e in inventory if e.charcode != target.charcode]
        if not refs:
            raise Exhausted(
                f"style {target.style_id} has no alternative reference character"
            )
        ref_entry = refs[int(rng.integers(len(refs)))]
    else:
        same = [e for e in inventory if e.charcode == target.charcode]
        ref_entry = same[0] if same else inventory[int(rng.integers(len(inventory)))]

    return Triplet(
        content=store(content_entry),
        style_ref=store(ref_entry),
        target=store(target),
    )

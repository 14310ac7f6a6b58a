"""Command-line orchestration: render, pretrain, train, refine, eval, index,
generate, serve. One YAML config file drives every stage; artifacts live in
stage-named folders under the configured output directory."""

from __future__ import annotations

import argparse
import json
import string
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .data import (
    MADE_UP,
    DatasetManifest,
    GlyphImage,
    GlyphStore,
    ManifestEntry,
    build_splits,
    glyph_path,
    language_of,
    render_glyph,
)
from .errors import BadFont, FontStylerError, MissingCheckpoint, MissingGlyph, UnknownStyle
from .losses import make_taps
from .metrics import evaluate_partition, report_table, save_reports
from .model import StyleModel
from .pretrain import pretrain, pretrain_state
from .rag import StyleIndex, build_index, generate_with_rag, manifest_reference_loader
from .training import refine_stage, train_main

CHARSETS = {
    "latin": string.ascii_uppercase + string.ascii_lowercase + string.digits,
    "latin-upper": string.ascii_uppercase,
}

FONT_SUFFIXES = (".ttf", ".otf", ".ttc")


def _paths(cfg: RunConfig) -> dict[str, Path]:
    out = Path(cfg.output_dir)
    return {
        "out": out,
        "glyphs": out / "glyphs",
        "manifest": out / "manifest.jsonl",
        "checkpoints": out / "checkpoints",
        "logs": out / "logs",
        "indexes": out / "indexes",
        "reports": out / "reports",
    }


def _charset(cfg: RunConfig) -> str:
    return CHARSETS.get(cfg.data.charset, cfg.data.charset)


def _load_dataset(cfg: RunConfig) -> tuple[DatasetManifest, GlyphStore]:
    p = _paths(cfg)
    if not p["manifest"].exists():
        raise FontStylerError(f"no manifest at {p['manifest']}; run `render` first")
    return DatasetManifest.load(p["manifest"]), GlyphStore(p["glyphs"])


def _default_refs(cfg: RunConfig, manifest: DatasetManifest) -> dict[str, int]:
    """Canonical reference character per style: configured list, else the
    lowest available codepoint."""
    refs: dict[str, int] = {}
    for style in manifest.styles():
        codes = sorted(e.charcode for e in manifest.style_entries(style))
        if not codes:
            continue
        configured = cfg.data.reference_chars.get(style, [])
        chosen = next((ord(c) for c in configured if ord(c) in set(codes)), codes[0])
        refs[style] = chosen
    return refs


def _load_indexes(cfg: RunConfig) -> dict[str, StyleIndex]:
    p = _paths(cfg)
    indexes = {}
    if p["indexes"].exists():
        for f in sorted(p["indexes"].glob("*.fsix")):
            idx = StyleIndex.load(f)
            indexes[idx.style_id] = idx
    return indexes


def load_input_png(path: str | Path, image_size: int) -> GlyphImage:
    """Read an arbitrary PNG as a model input, resizing when needed."""
    with Image.open(path) as im:
        gray = im.convert("L")
        if gray.size != (image_size, image_size):
            gray = gray.resize((image_size, image_size), Image.LANCZOS)
        pixels = np.asarray(gray, dtype=np.float32) / 255.0
    return GlyphImage(pixels, MADE_UP, "")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_render(cfg: RunConfig, force: bool = False) -> int:
    p = _paths(cfg)
    if p["manifest"].exists() and not force:
        print(f"manifest already at {p['manifest']}; pass --force to re-render")
        return 0
    fonts_dir = Path(cfg.data.fonts_dir)
    fonts = sorted(f for f in fonts_dir.glob("*") if f.suffix.lower() in FONT_SUFFIXES) if fonts_dir.exists() else []
    if not fonts:
        print(f"error: no font files under {fonts_dir}", file=sys.stderr)
        return 1

    chars = _charset(cfg)
    entries: list[ManifestEntry] = []
    failures: list[str] = []
    for font_file in fonts:
        style_id = font_file.stem
        rendered = 0
        for ch in chars:
            code = ord(ch)
            try:
                glyph = render_glyph(font_file, code, cfg.data.image_size, cfg.data.margin, style_id)
            except MissingGlyph:
                continue
            except BadFont as exc:
                failures.append(str(exc))
                break
            if float(glyph.pixels.min()) >= 1.0:
                continue  # blank outline: useless as a sample
            rel = glyph_path(style_id, code)
            glyph.save_png(p["glyphs"] / rel)
            entries.append(ManifestEntry(code, style_id, language_of(code), "train", rel))
            rendered += 1
        if rendered:
            print(f"rendered {rendered} glyphs from {font_file.name}")
    for msg in failures:
        print(f"warning: {msg}", file=sys.stderr)
    if not entries:
        print("error: no glyphs rendered from any font", file=sys.stderr)
        return 1

    manifest = DatasetManifest(entries, cfg.data.content_styles)
    manifest = build_splits(
        manifest,
        seed=cfg.seed,
        fractions=cfg.data.fractions,
        content_styles=cfg.data.content_styles or None,
        allow_empty_test=cfg.data.allow_empty_test,
    )
    manifest.save(p["manifest"])
    counts = {s: len(manifest.split_entries(s)) for s in
              ("pretrain", "train", "val", "test_SS", "test_SC", "test_CS", "test_CC")}
    print(f"manifest: {len(manifest)} entries -> {counts}")
    return 0


def cmd_pretrain(cfg: RunConfig) -> int:
    manifest, store = _load_dataset(cfg)
    p = _paths(cfg)
    encoder, decoder, losses = pretrain(
        manifest, cfg.pretrain, cfg.backbone, store, log_path=p["logs"] / "pretrain.jsonl"
    )
    path = save_checkpoint(
        p["checkpoints"] / "pretrain.pt", "pretrain", cfg.backbone,
        pretrain_state(encoder, decoder), extra={"epoch_losses": losses},
    )
    for i, loss in enumerate(losses):
        print(f"epoch {i}: mean masked-patch mse {loss:.6f}")
    print(f"saved {path}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    manifest, store = _load_dataset(cfg)
    p = _paths(cfg)
    if cfg.train.init == "pretrained":
        ckpt_path = p["checkpoints"] / "pretrain.pt"
        if not ckpt_path.exists():
            raise MissingCheckpoint(f"main stage needs {ckpt_path}; run `pretrain` first")
        model = StyleModel.from_pretrain(load_checkpoint(ckpt_path))
    else:
        model = StyleModel(cfg.backbone)
    taps = make_taps(cfg.taps) if cfg.train.loss == "combined" else None
    totals = train_main(
        model, manifest, store, cfg.train, cfg.weights, taps, log_path=p["logs"] / "main.jsonl"
    )
    path = save_checkpoint(
        p["checkpoints"] / "main.pt", "main", cfg.backbone, model.checkpoint_state(),
        extra={"steps": len(totals), "final_loss": totals[-1] if totals else None},
    )
    if totals:
        print(f"main: {len(totals)} steps, loss {totals[0]:.5f} -> {totals[-1]:.5f}")
    print(f"saved {path}")
    return 0


def cmd_refine(cfg: RunConfig) -> int:
    p = _paths(cfg)
    ckpt_path = p["checkpoints"] / "main.pt"
    if not ckpt_path.exists():
        raise MissingCheckpoint(f"refine stage needs {ckpt_path}; run `train` first")
    manifest, store = _load_dataset(cfg)
    model = StyleModel.from_checkpoint(load_checkpoint(ckpt_path))
    totals = refine_stage(model, manifest, store, cfg.train, log_path=p["logs"] / "refine.jsonl")
    path = save_checkpoint(
        p["checkpoints"] / "refined.pt", "refined", cfg.backbone, model.checkpoint_state(),
        extra={"steps": len(totals)},
    )
    if totals:
        print(f"refine: {len(totals)} steps, l1 {totals[0]:.5f} -> {totals[-1]:.5f}")
    else:
        print("refine: fraction 0, weights unchanged")
    print(f"saved {path}")
    return 0


def _resolve_checkpoint(cfg: RunConfig, explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    p = _paths(cfg)["checkpoints"]
    for name in ("refined.pt", "main.pt", "pretrain.pt"):
        if (p / name).exists():
            return p / name
    raise MissingCheckpoint(f"no checkpoint under {p}")


def cmd_eval(cfg: RunConfig, checkpoint: str | None, use_rag: bool, max_samples: int | None) -> int:
    manifest, store = _load_dataset(cfg)
    p = _paths(cfg)
    model = StyleModel.from_checkpoint(load_checkpoint(_resolve_checkpoint(cfg, checkpoint)))
    model.eval()
    taps = make_taps(cfg.taps)
    indexes = _load_indexes(cfg) if use_rag else None
    loader = manifest_reference_loader(manifest, store) if use_rag else None
    reports = []
    for short in ("SS", "SC", "CS", "CC"):
        reports.append(
            evaluate_partition(
                model, manifest, short, store, taps=taps, use_rag=use_rag,
                indexes=indexes, reference_loader=loader, seed=cfg.seed,
                max_samples=max_samples,
            )
        )
    table = report_table(reports)
    print(table)
    suffix = "_rag" if use_rag else ""
    (p["reports"]).mkdir(parents=True, exist_ok=True)
    (p["reports"] / f"eval{suffix}.txt").write_text(table + "\n")
    save_reports(reports, p["reports"] / f"eval{suffix}.jsonl")
    return 0


def cmd_index(cfg: RunConfig, checkpoint: str | None) -> int:
    manifest, store = _load_dataset(cfg)
    p = _paths(cfg)
    model = StyleModel.from_checkpoint(load_checkpoint(_resolve_checkpoint(cfg, checkpoint)))
    model.eval()
    for style in manifest.styles():
        glyphs = [store(e) for e in manifest.style_entries(style)]
        index = build_index(style, glyphs, model)
        index.save(p["indexes"] / f"{style}.fsix")
        print(f"indexed {len(index)} glyphs for style {style}")
    return 0


def cmd_generate(
    cfg: RunConfig,
    checkpoint: str | None,
    content: str,
    style: str,
    use_rag: bool,
    out: str,
) -> int:
    manifest, store = _load_dataset(cfg)
    model = StyleModel.from_checkpoint(load_checkpoint(_resolve_checkpoint(cfg, checkpoint)))
    model.eval()
    content_img = load_input_png(content, cfg.backbone.image_size)
    ckpt_path = str(_resolve_checkpoint(cfg, checkpoint))

    reference_code = None
    if use_rag:
        indexes = _load_indexes(cfg)
        loader = manifest_reference_loader(manifest, store)
        output, reference_code = generate_with_rag(content_img, style, model, indexes, loader)
    elif Path(style).exists():
        output = model.generate(content_img, load_input_png(style, cfg.backbone.image_size))
    else:
        refs = _default_refs(cfg, manifest)
        if style not in refs:
            raise UnknownStyle(f"{style!r} is neither a readable PNG nor a known style")
        reference_code = refs[style]
        loader = manifest_reference_loader(manifest, store)
        output = model.generate(content_img, loader(style, reference_code))

    out_path = Path(out)
    output.save_png(out_path)
    sidecar = {
        "checkpoint": ckpt_path,
        "style": style,
        "use_rag": use_rag,
        "reference_charcode": f"U+{reference_code:04X}" if reference_code is not None else None,
    }
    out_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    print(f"wrote {out_path} (reference: {sidecar['reference_charcode']})")
    return 0


def cmd_serve(cfg: RunConfig, checkpoint: str | None, port: int, host: str) -> int:
    import uvicorn

    from .server import ServeContext, create_app

    manifest, store = _load_dataset(cfg)
    model = StyleModel.from_checkpoint(load_checkpoint(_resolve_checkpoint(cfg, checkpoint)))
    model.eval()
    context = ServeContext(
        model=model,
        image_size=cfg.backbone.image_size,
        indexes=_load_indexes(cfg),
        reference_loader=manifest_reference_loader(manifest, store),
        default_refs=_default_refs(cfg, manifest),
    )
    uvicorn.run(create_app(context), host=host, port=port)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fontstyler", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, **kwargs):
        s = sub.add_parser(name, **kwargs)
        s.add_argument("--config", required=True, help="YAML run configuration")
        return s

    s = add("render", help="rasterize fonts into the dataset")
    s.add_argument("--force", action="store_true")

    add("pretrain", help="masked-reconstruction pretraining")
    add("train", help="main combined-loss training")
    add("refine", help="short L1 refinement stage")

    s = add("eval", help="metrics over the four test partitions")
    s.add_argument("--checkpoint")
    s.add_argument("--rag", action="store_true")
    s.add_argument("--max-samples", type=int, default=None)

    s = add("index", help="build per-style retrieval indexes")
    s.add_argument("--checkpoint")

    s = add("generate", help="stylize one glyph image")
    s.add_argument("--checkpoint")
    s.add_argument("--content", required=True, help="content PNG")
    s.add_argument("--style", required=True, help="style PNG path or style_id")
    s.add_argument("--rag", action="store_true")
    s.add_argument("--out", required=True, help="output PNG path")

    s = add("serve", help="run the HTTP inference service")
    s.add_argument("--checkpoint")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--host", default="127.0.0.1")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config)
    try:
        if args.command == "render":
            return cmd_render(cfg, args.force)
        if args.command == "pretrain":
            return cmd_pretrain(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "refine":
            return cmd_refine(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.rag, args.max_samples)
        if args.command == "index":
            return cmd_index(cfg, args.checkpoint)
        if args.command == "generate":
            return cmd_generate(cfg, args.checkpoint, args.content, args.style, args.rag, args.out)
        if args.command == "serve":
            return cmd_serve(cfg, args.checkpoint, args.port, args.host)
    except FontStylerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

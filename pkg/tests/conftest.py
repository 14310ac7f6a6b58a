import numpy as np
import pytest
from fontTools.fontBuilder import FontBuilder
from fontTools.pens.ttGlyphPen import TTGlyphPen

from fontstyler.config import BackboneConfig
from fontstyler.data import DatasetManifest, GlyphImage, ManifestEntry, language_of


def _rect(pen, x0, y0, x1, y1):
    pen.moveTo((x0, y0))
    pen.lineTo((x1, y0))
    pen.lineTo((x1, y1))
    pen.lineTo((x0, y1))
    pen.closePath()


def build_test_font(path, upem=1000):
    """Minimal TTF with analytically known outlines.

    'X' is a filled 800x800 square, 'L' an L-shaped bar, 'I' a thin vertical
    bar; 'space' maps to an empty outline. Everything else is absent.
    """
    fb = FontBuilder(upem, isTTF=True)
    order = [".notdef", "space", "X", "L", "I"]
    fb.setupGlyphOrder(order)
    fb.setupCharacterMap({0x20: "space", ord("X"): "X", ord("L"): "L", ord("I"): "I"})

    def outline(draw):
        pen = TTGlyphPen(None)
        draw(pen)
        return pen.glyph()

    glyphs = {
        ".notdef": TTGlyphPen(None).glyph(),
        "space": TTGlyphPen(None).glyph(),
        "X": outline(lambda p: _rect(p, 100, 100, 900, 900)),
        "L": outline(lambda p: (_rect(p, 100, 100, 300, 900), _rect(p, 300, 100, 900, 300))),
        "I": outline(lambda p: _rect(p, 450, 100, 550, 900)),
    }
    fb.setupGlyf(glyphs)
    metrics = {}
    glyf = fb.font["glyf"]
    for name in order:
        g = glyf[name]
        metrics[name] = (1000, g.xMin if g.numberOfContours > 0 else 0)
    fb.setupHorizontalMetrics(metrics)
    fb.setupHorizontalHeader(ascent=1000, descent=0)
    fb.setupNameTable({"familyName": "BoxTest", "styleName": "Regular"})
    fb.setupOS2(sTypoAscender=1000, usWinAscent=1000, usWinDescent=0)
    fb.setupPost()
    fb.save(str(path))
    return path


@pytest.fixture(scope="session")
def box_font(tmp_path_factory):
    return build_test_font(tmp_path_factory.mktemp("fonts") / "boxtest.ttf")


def dejavu_path(name="DejaVuSans.ttf"):
    import matplotlib

    from pathlib import Path

    return Path(matplotlib.get_data_path()) / "fonts" / "ttf" / name


@pytest.fixture(scope="session")
def dejavu_font():
    return dejavu_path()


@pytest.fixture
def tiny_cfg():
    return BackboneConfig(
        image_size=16, patch_size=8, hidden_size=8, depth=1, heads=1,
        decoder_hidden=8, decoder_depth=1, mlp_ratio=2.0, cross_depth=1,
    )


@pytest.fixture
def small_cfg():
    return BackboneConfig(
        image_size=32, patch_size=8, hidden_size=32, depth=2, heads=2,
        decoder_hidden=16, decoder_depth=1, mlp_ratio=2.0, cross_depth=1,
    )


def synthetic_manifest(n_styles=10, n_chars=100, content_styles=None):
    """Unsplit manifest of n_styles x n_chars entries with fake paths."""
    styles = [f"font{i:02d}" for i in range(n_styles)]
    entries = [
        ManifestEntry(0x41 + c, s, language_of(0x41 + c), "train", f"{s}/{0x41 + c:04X}.png")
        for s in styles
        for c in range(n_chars)
    ]
    if content_styles is None:
        content_styles = styles[:2]
    return DatasetManifest(entries, content_styles)


class ArrayStore:
    """In-memory glyph store: deterministic pseudo-random image per entry."""

    def __init__(self, size=32):
        self.size = size
        self._cache = {}

    def __call__(self, entry):
        key = (entry.style_id, entry.charcode)
        if key not in self._cache:
            rng = np.random.default_rng(abs(hash(key)) % (2 ** 32))
            pixels = rng.random((self.size, self.size), dtype=np.float32)
            self._cache[key] = GlyphImage(pixels, entry.charcode, entry.style_id)
        return self._cache[key]

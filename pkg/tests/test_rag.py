import numpy as np
import pytest
import torch

from fontstyler.config import BackboneConfig
from fontstyler.data import GlyphImage
from fontstyler.errors import EmptyIndex, EmptyInput, MissingReferenceImage, ShapeError, UnknownStyle
from fontstyler.model import StyleModel
from fontstyler.rag import (
    StyleIndex,
    build_index,
    embed_glyph,
    generate_with_rag,
    retrieve_reference,
)


def _img(seed, size=32, charcode=65, style="s"):
    rng = np.random.default_rng(seed)
    return GlyphImage(rng.random((size, size), dtype=np.float32), charcode, style)


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(0)
    cfg = BackboneConfig(
        image_size=32, patch_size=8, hidden_size=32, depth=2, heads=2,
        decoder_hidden=16, decoder_depth=1, cross_depth=1, mlp_ratio=2.0,
    )
    return StyleModel(cfg)


def _random_index(n, dim=8, seed=0, style="s", normalize=True):
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((n, dim)).astype(np.float32)
    if normalize:
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    codes = np.arange(100, 100 + n, dtype=np.int64)
    return StyleIndex(style, vecs, codes), vecs


class TestEmbedGlyph:
    def test_embedding_length_law(self):
        torch.manual_seed(1)
        m = StyleModel(BackboneConfig())  # hidden 192, 8x8 patch grid
        emb = embed_glyph(_img(0, size=64), m)
        assert emb.vector.shape == (192 * 65,) == (12480,)

    def test_identical_images_identical_embeddings(self, model):
        a = embed_glyph(_img(1), model)
        b = embed_glyph(_img(1), model)
        assert np.array_equal(a.vector, b.vector)

    def test_unit_norm(self, model):
        emb = embed_glyph(_img(2), model)
        assert emb.normalized
        assert abs(np.linalg.norm(emb.vector) - 1.0) <= 1e-6

    def test_metadata_carried(self, model):
        emb = embed_glyph(_img(3, charcode=0x4E2D, style="brush"), model)
        assert emb.charcode == 0x4E2D and emb.style_id == "brush"


class TestStyleIndex:
    def test_singleton_always_returned(self, model):
        glyph = _img(4, charcode=88)
        index = build_index("s", [glyph], model)
        assert len(index) == 1
        got = retrieve_reference(_img(5), index, k=3, model=model)
        assert [c for c, _ in got] == [88]

    def test_self_retrieval(self, model):
        glyphs = [_img(i, charcode=65 + i) for i in range(6)]
        index = build_index("s", glyphs, model)
        ranked = retrieve_reference(glyphs[3], index, k=1, model=model)
        assert ranked[0][0] == 68
        assert ranked[0][1] <= 1e-6

    def test_k_clamped_to_size(self):
        index, _ = _random_index(4)
        got = index.search(np.zeros(8, dtype=np.float32), k=100)
        assert len(got) == 4

    def test_empty_input_rejected(self, model):
        with pytest.raises(EmptyInput):
            build_index("s", [], model)

    def test_empty_index_query(self):
        index = StyleIndex("s", np.zeros((0, 4), dtype=np.float32), np.zeros(0, dtype=np.int64))
        with pytest.raises(EmptyIndex):
            index.search(np.zeros(4, dtype=np.float32), 1)

    def test_dim_mismatch(self):
        index, _ = _random_index(4)
        with pytest.raises(ShapeError):
            index.search(np.zeros(5, dtype=np.float32), 1)

    def test_brute_force_equivalence(self):
        index, vecs = _random_index(500, dim=16, seed=3)
        rng = np.random.default_rng(9)
        for _ in range(100):
            q = rng.standard_normal(16).astype(np.float32)
            got = [c for c, _ in index.search(q, 10)]
            d2 = np.sum((vecs - q) ** 2, axis=1)
            expected = [int(index.charcodes[i]) for i in np.lexsort((index.charcodes, d2))[:10]]
            assert got == expected

    def test_tie_break_by_charcode(self):
        v = np.ones((3, 4), dtype=np.float32)
        index = StyleIndex("s", v, np.array([300, 100, 200], dtype=np.int64))
        got = [c for c, _ in index.search(np.ones(4, dtype=np.float32), 3)]
        assert got == [100, 200, 300]

    def test_cosine_l2_equivalence(self):
        # on unit vectors, ascending L2 equals descending cosine similarity
        index, vecs = _random_index(200, dim=12, seed=5)
        rng = np.random.default_rng(6)
        for _ in range(20):
            q = rng.standard_normal(12)
            q = (q / np.linalg.norm(q)).astype(np.float32)
            by_l2 = [c for c, _ in index.search(q, 200)]
            cos = vecs @ q
            by_cos = [int(index.charcodes[i]) for i in np.lexsort((index.charcodes, -cos))]
            assert by_l2 == by_cos

    def test_save_load_round_trip(self, tmp_path):
        index, vecs = _random_index(37, dim=24, seed=7, style="brush-风")
        path = index.save(tmp_path / "brush.fsix")
        back = StyleIndex.load(path)
        assert back.style_id == "brush-风"
        assert back.normalized == index.normalized
        assert np.array_equal(back.vectors, index.vectors)
        assert np.array_equal(back.charcodes, index.charcodes)

    def test_save_load_search_identical(self, tmp_path, model):
        glyphs = [_img(i, charcode=65 + i) for i in range(10)]
        index = build_index("s", glyphs, model)
        back = StyleIndex.load(index.save(tmp_path / "s.fsix"))
        q = embed_glyph(_img(99), model).vector
        assert index.search(q, 10) == back.search(q, 10)


class TestGenerateWithRag:
    def test_unknown_style(self, model):
        with pytest.raises(UnknownStyle):
            generate_with_rag(_img(0), "nope", model, {}, lambda s, c: None)

    def test_forced_reference(self, model):
        glyph = _img(10, charcode=0x42, style="mono")
        index = build_index("mono", [glyph], model)
        out, code = generate_with_rag(
            _img(11), "mono", model, {"mono": index}, lambda s, c: glyph
        )
        assert code == 0x42
        assert out.pixels.shape == (32, 32)

    def test_self_retrieval_provenance(self, model):
        glyphs = [_img(i + 20, charcode=65 + i, style="mono") for i in range(5)]
        index = build_index("mono", glyphs, model)
        lookup = {g.charcode: g for g in glyphs}
        out, code = generate_with_rag(
            glyphs[2], "mono", model, {"mono": index}, lambda s, c: lookup[c]
        )
        assert code == glyphs[2].charcode

    def test_missing_reference_image(self, model):
        glyph = _img(30, charcode=0x43, style="mono")
        index = build_index("mono", [glyph], model)

        def loader(style, code):
            raise MissingReferenceImage("gone")

        with pytest.raises(MissingReferenceImage):
            generate_with_rag(_img(31), "mono", model, {"mono": index}, loader)

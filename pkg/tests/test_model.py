import numpy as np
import pytest
import torch

from fontstyler.backbone import ViTDecoder, ViTEncoder
from fontstyler.checkpoint import Checkpoint
from fontstyler.config import BackboneConfig
from fontstyler.data import GlyphImage
from fontstyler.errors import EmptyInput, ShapeError
from fontstyler.model import CrossBlock, StyleModel
from fontstyler.pretrain import pretrain_state

from test_backbone import finite_difference_check


def _img(seed, size=32, charcode=65, style="s"):
    rng = np.random.default_rng(seed)
    return GlyphImage(rng.random((size, size), dtype=np.float32), charcode, style)


@pytest.fixture
def model(small_cfg):
    torch.manual_seed(0)
    return StyleModel(small_cfg)


def _zero_residual_paths(block: CrossBlock):
    with torch.no_grad():
        block.attn.v_proj.weight.zero_()
        block.attn.v_proj.bias.zero_()
        block.attn.out_proj.weight.zero_()
        block.attn.out_proj.bias.zero_()
        block.mlp.fc2.weight.zero_()
        block.mlp.fc2.bias.zero_()


class TestEncoders:
    def test_content_token_shape(self, model, small_cfg):
        tokens = model.encode_content(_img(0))
        assert tokens.shape == (small_cfg.patch_num + 1, small_cfg.hidden_size)

    def test_default_geometry_token_count(self):
        torch.manual_seed(0)
        m = StyleModel(BackboneConfig())
        tokens = m.encode_content(_img(1, size=64))
        assert tokens.shape == (65, 192)

    def test_deterministic(self, model):
        assert torch.equal(model.encode_content(_img(2)), model.encode_content(_img(2)))

    def test_style_shares_pretrain_init(self, small_cfg):
        torch.manual_seed(1)
        enc, dec = ViTEncoder(small_cfg), ViTDecoder(small_cfg)
        ckpt = Checkpoint(stage="pretrain", backbone=small_cfg, state=pretrain_state(enc, dec), extra={})
        m = StyleModel.from_pretrain(ckpt)
        img = _img(3)
        assert torch.equal(m.encode_content(img), m.encode_style(img))

    def test_multi_single_equals_plain(self, model):
        img = _img(4)
        assert torch.equal(model.encode_style_multi([img]), model.encode_style(img))

    def test_multi_duplicate_idempotent(self, model):
        img = _img(5)
        multi = model.encode_style_multi([img, img])
        assert torch.allclose(multi, model.encode_style(img), atol=1e-7)

    def test_multi_elementwise_mean(self, model):
        a, b = _img(6), _img(7)
        multi = model.encode_style_multi([a, b])
        expected = (model.encode_style(a) + model.encode_style(b)) / 2
        assert torch.allclose(multi, expected, atol=1e-7)

    def test_multi_permutation_invariant(self, model):
        a, b, c = _img(8), _img(9), _img(10)
        x = model.encode_style_multi([a, b, c])
        y = model.encode_style_multi([c, a, b])
        assert torch.allclose(x, y, atol=1e-7)

    def test_multi_empty_raises(self, model):
        with pytest.raises(EmptyInput):
            model.encode_style_multi([])


class TestCrossAttend:
    @pytest.mark.parametrize("style_tokens", [1, 2, 17, 40])
    def test_shape_follows_queries(self, model, small_cfg, style_tokens):
        content = torch.rand(17, small_cfg.hidden_size)
        style = torch.rand(style_tokens, small_cfg.hidden_size)
        assert model.cross_attend(content, style).shape == content.shape

    def test_width_mismatch_raises(self, model, small_cfg):
        with pytest.raises(ShapeError):
            model.cross_attend(torch.rand(5, small_cfg.hidden_size), torch.rand(5, 8))

    def test_residual_zero_identity(self, model, small_cfg):
        for blk in model.cross_blocks:
            _zero_residual_paths(blk)
        content = torch.rand(17, small_cfg.hidden_size)
        style = torch.rand(9, small_cfg.hidden_size)
        assert torch.equal(model.cross_attend(content, style), content)

    def test_fresh_model_starts_at_identity(self, model, small_cfg):
        # zero-initialized output projections: untrained fusion is a no-op
        content = torch.rand(17, small_cfg.hidden_size)
        style = torch.rand(9, small_cfg.hidden_size)
        assert torch.equal(model.cross_attend(content, style), content)

    def test_single_head_closed_form(self):
        cfg = BackboneConfig(
            image_size=16, patch_size=8, hidden_size=4, depth=1, heads=1,
            decoder_hidden=4, decoder_depth=1, cross_depth=1,
        )
        torch.manual_seed(0)
        model = StyleModel(cfg).double()
        blk = model.cross_blocks[0]
        rng = np.random.default_rng(42)
        wq = rng.standard_normal((4, 4))
        wk = rng.standard_normal((4, 4))
        wv = rng.standard_normal((4, 4))
        with torch.no_grad():
            blk.attn.q_proj.weight.copy_(torch.from_numpy(wq))
            blk.attn.q_proj.bias.zero_()
            blk.attn.k_proj.weight.copy_(torch.from_numpy(wk))
            blk.attn.k_proj.bias.zero_()
            blk.attn.v_proj.weight.copy_(torch.from_numpy(wv))
            blk.attn.v_proj.bias.zero_()
            blk.attn.out_proj.weight.copy_(torch.eye(4))
            blk.attn.out_proj.bias.zero_()
            blk.mlp.fc2.weight.zero_()
            blk.mlp.fc2.bias.zero_()

        content = rng.standard_normal((1, 4))
        style = rng.standard_normal((2, 4))

        def layernorm(x):
            mu = x.mean(axis=-1, keepdims=True)
            var = x.var(axis=-1, keepdims=True)
            return (x - mu) / np.sqrt(var + 1e-5)

        q = layernorm(content) @ wq.T
        kv = layernorm(style)
        k = kv @ wk.T
        v = kv @ wv.T
        logits = (q @ k.T) / np.sqrt(4.0)
        weights = np.exp(logits - logits.max())
        weights = weights / weights.sum()
        expected = content + weights @ v

        with torch.no_grad():
            got = model.cross_attend(
                torch.from_numpy(content), torch.from_numpy(style)
            ).numpy()
        assert np.allclose(got, expected, atol=1e-10)

    def test_gradient_matches_finite_differences(self):
        cfg = BackboneConfig(
            image_size=16, patch_size=8, hidden_size=8, depth=1, heads=2,
            decoder_hidden=8, decoder_depth=1, cross_depth=1, mlp_ratio=2.0,
        )
        torch.manual_seed(3)
        model = StyleModel(cfg).double()
        blk = model.cross_blocks[0]
        with torch.no_grad():  # move off the zero-init saddle for a fair check
            blk.attn.out_proj.weight.normal_(0, 0.2)
            blk.mlp.fc2.weight.normal_(0, 0.2)
        content = torch.rand(3, 8, dtype=torch.float64)
        style = torch.rand(5, 8, dtype=torch.float64)
        probe = torch.rand(3, 8, dtype=torch.float64)

        def forward():
            return (model.cross_attend(content, style) * probe).sum()

        params = [blk.attn.q_proj.weight, blk.attn.k_proj.weight,
                  blk.attn.v_proj.weight, blk.attn.out_proj.weight,
                  blk.mlp.fc1.weight, blk.mlp.fc2.weight]
        worst = finite_difference_check(params, forward, h=1e-6)
        assert worst <= 1e-3, f"max rel error {worst}"


class TestGenerate:
    def test_output_contract(self, model):
        content, style = _img(11, charcode=66), _img(12, style="other")
        out = model.generate(content, style)
        assert out.pixels.shape == content.pixels.shape
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0
        assert out.charcode == 66
        assert out.style_id == "other"

    def test_deterministic(self, model):
        a = model.generate(_img(13), _img(14))
        b = model.generate(_img(13), _img(14))
        assert np.array_equal(a.pixels, b.pixels)

    def test_accepts_reference_list(self, model):
        out = model.generate(_img(15), [_img(16), _img(17)])
        assert out.pixels.shape == (32, 32)

    def test_empty_reference_list_raises(self, model):
        with pytest.raises(EmptyInput):
            model.generate(_img(18), [])


class TestCheckpointRoundTrip:
    def test_state_round_trip(self, small_cfg, tmp_path):
        from fontstyler.checkpoint import load_checkpoint, save_checkpoint

        torch.manual_seed(2)
        model = StyleModel(small_cfg)
        path = save_checkpoint(tmp_path / "m.pt", "main", small_cfg, model.checkpoint_state())
        back = StyleModel.from_checkpoint(load_checkpoint(path))
        img_c, img_s = _img(19), _img(20)
        assert torch.equal(model.encode_content(img_c), back.encode_content(img_c))
        assert np.array_equal(
            model.generate(img_c, img_s).pixels, back.generate(img_c, img_s).pixels
        )

    def test_stage_tag_validated(self, small_cfg, tmp_path):
        from fontstyler.checkpoint import save_checkpoint

        with pytest.raises(ValueError):
            save_checkpoint(tmp_path / "x.pt", "bogus", small_cfg, {})

    def test_missing_checkpoint(self, tmp_path):
        from fontstyler.checkpoint import load_checkpoint
        from fontstyler.errors import MissingCheckpoint

        with pytest.raises(MissingCheckpoint):
            load_checkpoint(tmp_path / "absent.pt")

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from torch import nn

from lcsplit.datagen import ConfigurationError
from lcsplit.model import ModelConfig, Mode, Variant, build
from lcsplit.model.layers import Normalization
from lcsplit.model.network import LatentState, Prediction
from lcsplit.tiling import (
    Strategy,
    StitchedPrediction,
    plan_tiles,
    predict_image,
    predict_tiled,
    receptive_field,
    seam_score,
    seam_score_array,
)


class ConvStub(nn.Module):
    """Pure 5x5 convolution without padding, run on a reflect-padded input.

    Its output at a pixel depends only on the pixel's 5x5 neighbourhood, so
    tiles agree wherever they see the same neighbourhood.
    """

    def __init__(self, h):
        super().__init__()
        self.config = ModelConfig(mode=Mode.HAE, variant=Variant.VANILLA, n_levels=1, patch_size=h)
        self.normalization = Normalization()
        self.conv = nn.Conv2d(1, 2, 5, bias=False)
        with torch.no_grad():
            self.conv.weight.copy_(torch.randn(2, 1, 5, 5, generator=torch.Generator().manual_seed(0)))
        self.n_lc = 0

    def forward(self, x, stochastic=None):
        y = self.conv(nn.functional.pad(x, (2, 2, 2, 2), mode="reflect"))
        return Prediction(y[:, :1], y[:, 1:]), LatentState([])


@settings(max_examples=60, deadline=None)
@given(
    st.integers(5, 90), st.integers(5, 90), st.sampled_from([16, 32, 64]), st.integers(1, 15),
    st.sampled_from(list(Strategy)),
)
def test_keep_regions_partition_image(H, W, h, pad, strategy):
    if strategy is Strategy.NONE:
        pad = 0
    elif strategy is Strategy.INNER and 2 * pad >= h:
        pad = h // 4
    plan = plan_tiles((H, W), strategy, h, pad)
    cover = np.zeros((H, W), dtype=int)
    for t in plan.tiles:
        r0, r1, c0, c1 = t.keep
        cover[r0:r1, c0:c1] += 1
    assert (cover == 1).all()
    assert sum((t.keep[1] - t.keep[0]) * (t.keep[3] - t.keep[2]) for t in plan.tiles) == H * W


def test_plan_geometry():
    inner = plan_tiles((2720, 2720), "inner", 64, 24)
    none = plan_tiles((2720, 2720), "none", 64)
    assert inner.stride == 16 and inner.n_tiles == 28900 and inner.grid == (170, 170)
    assert none.stride == 64 and none.n_tiles == 1849 and none.padded_canvas == (2752, 2752)
    small = plan_tiles((64, 64), "inner", 64, 24)
    assert small.grid == (4, 4)
    assert all(t.keep[1] - t.keep[0] == 16 for t in small.tiles)
    outer = plan_tiles((128, 128), "outer", 64, 24)
    assert outer.window == 112 and outer.n_tiles == 4


@pytest.mark.parametrize("strategy,pad", [("inner", 32), ("inner", 0), ("none", 4), ("outer", -1)])
def test_plan_rejects_bad_pads(strategy, pad):
    with pytest.raises(ConfigurationError):
        plan_tiles((64, 64), strategy, 64, pad)


def test_every_pixel_written_once():
    stub = ConvStub(32)
    img = np.random.default_rng(0).random((70, 45)).astype(np.float32)
    for s, p in (("inner", 8), ("none", 0), ("outer", 8)):
        out = predict_image(img, stub, s, pad=p)
        assert out.mu1.shape == img.shape
        assert (out.write_count == 1).all()


def test_constant_image_gives_seamless_output():
    model = build(ModelConfig(mode=Mode.HVAE, variant=Variant.LC, n_levels=2, n_lc=1, patch_size=32,
                              base_channels=4, z_channels=4))
    img = np.full((80, 80), 0.7, dtype=np.float32)
    out = predict_image(img, model, "inner", pad=8)
    # every tile sees the same input, so the stitched result repeats with the stride
    for m in (out.mu1, out.mu2):
        for k in range(16, 80, 16):
            np.testing.assert_allclose(m[:, k : k + 16], m[:, :16], atol=1e-6)
            np.testing.assert_allclose(m[k : k + 16], m[:16], atol=1e-6)


def test_inner_matches_none_away_from_seams():
    stub = ConvStub(32)
    img = np.random.default_rng(1).random((96, 96)).astype(np.float32)
    pad = 8
    inner = predict_image(img, stub, "inner", pad=pad)
    none = predict_image(img, stub, "none")
    rows = np.arange(96)
    far = np.ones(96, bool)
    for b in (0, 32, 64, 96):
        far &= np.abs(rows - b) > pad
    mask = far[:, None] & far[None, :]
    np.testing.assert_allclose(inner.mu1[mask], none.mu1[mask], rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(inner.mu2[mask], none.mu2[mask], rtol=1e-5, atol=1e-5)


def test_plan_model_mismatch():
    stub = ConvStub(32)
    with pytest.raises(ConfigurationError):
        predict_tiled(np.zeros((64, 64)), stub, plan_tiles((64, 64), "none", 64))
    with pytest.raises(ValueError):
        predict_tiled(np.zeros((60, 64)), stub, plan_tiles((64, 64), "none", 32))


def test_outer_feeds_enlarged_windows():
    seen = []

    class Spy(ConvStub):
        def forward(self, x, stochastic=None):
            seen.append(tuple(x.shape[-2:]))
            return super().forward(x)

    predict_image(np.zeros((64, 64), np.float32), Spy(64), "outer", pad=24)
    assert seen and all(s == (112, 112) for s in seen)


# seam score ------------------------------------------------------------------


def _tile_offsets(n, tile, delta, seed=0):
    rng = np.random.default_rng(seed)
    base = rng.random((n, n)) * 0.1
    signs = rng.choice([-1.0, 1.0], size=(n // tile, n // tile))
    return base + delta * np.kron(signs, np.ones((tile, tile)))


def test_seam_score_untiled_is_near_one():
    img = np.random.default_rng(3).random((128, 128))
    lines = [32, 64, 96]
    assert seam_score_array(img, lines, lines) == pytest.approx(1.0, abs=0.1)


def test_seam_score_grows_linearly_in_offset():
    lines = [16, 32, 48]
    base = np.random.default_rng(0).random((64, 64)) * 0.1
    signs = np.random.default_rng(1).choice([-1.0, 1.0], size=(4, 4))
    step = np.kron(signs, np.ones((16, 16)))
    # once the jump dominates the noise the boundary residual is affine in delta
    scores = [seam_score_array(base + d * step, lines, lines) for d in (1.0, 2.0, 3.0, 4.0)]
    diffs = np.diff(scores)
    np.testing.assert_allclose(diffs, diffs[0], rtol=0.02)
    assert scores[0] > 5


def test_seam_score_tracks_grid():
    img = _tile_offsets(64, 16, 0.5)
    right = seam_score_array(img, [16, 32, 48], [16, 32, 48])
    shifted = seam_score_array(img, [8, 24, 40], [8, 24, 40])
    assert right > 5 and shifted < 1.5
    moved = np.roll(img, 4, axis=(0, 1))
    assert seam_score_array(moved, [20, 36, 52], [20, 36, 52]) == pytest.approx(right, rel=0.3)


def test_seam_score_of_prediction():
    plan = plan_tiles((64, 64), "none", 16)
    img = _tile_offsets(64, 16, 0.5)
    assert seam_score(StitchedPrediction(img, img, plan)) > 5


def test_receptive_field_reexport():
    assert receptive_field(ModelConfig(variant=Variant.LC, n_levels=4, n_lc=3, patch_size=64)) == 512

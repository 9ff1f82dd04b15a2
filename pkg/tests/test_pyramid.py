import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcsplit.pyramid import PatchSpec, build_lc_stack, crop, downsample_by, extract_patch, stack_array


def _crop_oracle(x, center, size):
    # explicit mirror pad then slice
    pad = 100  # larger than any offset the tests generate
    big = np.pad(x, pad, mode="symmetric")
    r0 = center[0] - size // 2 + pad
    c0 = center[1] - size // 2 + pad
    return big[r0 : r0 + size, c0 : c0 + size]


def test_whole_image_at_center():
    x = np.arange(64 * 64, dtype=np.float32).reshape(64, 64)
    np.testing.assert_array_equal(extract_patch(x, PatchSpec((32, 32), 64)), x)


def test_corner_crop_mirrors():
    x = np.arange(25.0).reshape(5, 5)
    got = crop(x, (0, 0), 4)
    np.testing.assert_array_equal(got, np.pad(x, 2, mode="symmetric")[:4, :4])
    np.testing.assert_array_equal(got[2:, 2:], x[:2, :2])
    np.testing.assert_array_equal(got, crop(x, (0, 0), 4))


@settings(max_examples=80)
@given(st.integers(3, 12), st.integers(3, 12), st.integers(-20, 30), st.integers(-20, 30), st.integers(1, 24))
def test_crop_matches_pad_oracle(h, w, r, c, size):
    x = np.random.default_rng(h * 100 + w).random((h, w))
    if size > 4 * max(h, w):
        return
    np.testing.assert_array_equal(crop(x, (r, c), size), _crop_oracle(x, (r, c), size))


def test_patch_spec_and_size_errors():
    with pytest.raises(ValueError):
        PatchSpec((0, 0), 24)
    with pytest.raises(ValueError):
        PatchSpec((0, 0), 8)
    with pytest.raises(ValueError):
        crop(np.zeros((4, 4)), (2, 2), 32)


def test_downsample_examples():
    x = np.random.default_rng(0).random((8, 8))
    np.testing.assert_array_equal(downsample_by(x, 1), x)
    assert downsample_by(np.array([[1.0, 2.0], [3.0, 4.0]]), 2)[0, 0] == 2.5
    assert downsample_by(x, 4).mean() == pytest.approx(x.mean())
    with pytest.raises(ValueError):
        downsample_by(np.zeros((6, 6)), 4)
    with pytest.raises(ValueError):
        downsample_by(np.zeros((6, 6)), 3)


def test_stack_examples():
    x = np.random.default_rng(1).random((128, 128)).astype(np.float32)
    s0 = build_lc_stack(x, PatchSpec((60, 70), 32), 0)
    assert s0.n_lc == 0 and s0.contexts == []
    const = build_lc_stack(np.full((128, 128), 0.25, np.float32), PatchSpec((10, 10), 32), 3)
    for layer in const.as_array():
        np.testing.assert_array_equal(layer, 0.25)
    checker = (np.indices((128, 128)).sum(0) % 2).astype(np.float32)
    st_ = build_lc_stack(checker, PatchSpec((64, 64), 32), 1)
    np.testing.assert_array_equal(st_.contexts[0], 0.5)


def test_stack_geometry_and_means():
    x = np.random.default_rng(2).random((100, 90))
    spec = PatchSpec((40, 33), 16)
    s = build_lc_stack(x, spec, 3)
    assert s.as_array().shape == (4, 16, 16)
    for k, ctx in enumerate(s.contexts):
        f = 2 ** (k + 1)
        raw = crop(x, spec.center, f * 16)
        assert ctx.mean() == pytest.approx(raw.mean())
        # the central h/f region of the context is the primary patch seen at lower resolution
        core = ctx[8 - 8 // f : 8 + 8 // f, 8 - 8 // f : 8 + 8 // f]
        np.testing.assert_allclose(core, downsample_by(s.primary, f))
    np.testing.assert_array_equal(stack_array(x, spec.center, 16, 3), s.as_array())


def test_stack_too_deep_for_image():
    with pytest.raises(ValueError):
        build_lc_stack(np.zeros((16, 16)), PatchSpec((8, 8), 16), 3)

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from lcsplit.datagen import ChannelPair
from lcsplit.metrics import PSNR_CAP, EvalReport, affine_fit, evaluate, psnr_invariant, ssim


def _psnr_oracle(gt, pred):
    # explicit design-matrix least squares, independent of the centered formula
    A = np.stack([pred.ravel(), np.ones(pred.size)], axis=1)
    coef, *_ = np.linalg.lstsq(A, gt.ravel(), rcond=None)
    mse = np.mean((gt.ravel() - A @ coef) ** 2)
    return 10 * np.log10(np.ptp(gt) ** 2 / mse)


def test_psnr_against_lstsq_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        gt = rng.random((32, 32))
        pred = 0.3 * gt + rng.normal(0, 0.1, gt.shape) + 2
        assert psnr_invariant(gt, pred) == pytest.approx(_psnr_oracle(gt, pred), abs=1e-9)


def test_affine_fit_recovers_transform():
    rng = np.random.default_rng(1)
    pred = rng.random(100)
    a, b = affine_fit(3 * pred - 2, pred)
    assert a == pytest.approx(3) and b == pytest.approx(-2)


@settings(max_examples=200)
@given(st.floats(-100, 100).filter(lambda a: abs(a) > 1e-3), st.floats(-1e3, 1e3))
def test_psnr_affine_invariance(a, b):
    rng = np.random.default_rng(2)
    gt = rng.random((24, 24))
    pred = gt + rng.normal(0, 0.2, gt.shape)
    assert psnr_invariant(gt, a * pred + b) == pytest.approx(psnr_invariant(gt, pred), abs=1e-8)


def test_psnr_cap_and_errors():
    gt = np.random.default_rng(0).random((8, 8))
    assert psnr_invariant(gt, gt) == PSNR_CAP
    assert psnr_invariant(gt, 5 * gt + 1) == PSNR_CAP
    with pytest.raises(ValueError):
        psnr_invariant(np.ones((4, 4)), gt[:4, :4])
    with pytest.raises(ValueError):
        psnr_invariant(gt, gt[:4])


def test_ssim_matches_skimage():
    rng = np.random.default_rng(3)
    for _ in range(5):
        gt = rng.random((40, 50))
        pred = gt + rng.normal(0, 0.3, gt.shape)
        ref = structural_similarity(gt, pred, win_size=7, data_range=np.ptp(gt))
        assert ssim(gt, pred) == pytest.approx(ref, abs=1e-10)


def test_ssim_identity_and_errors():
    gt = np.random.default_rng(4).random((16, 16))
    assert ssim(gt, gt) == 1.0
    assert ssim(gt, 1 - gt) < 0
    with pytest.raises(ValueError):
        ssim(gt[:5, :5], gt[:5, :5])


def test_evaluate_identity_stub_and_report(tmp_path):
    rng = np.random.default_rng(5)
    pairs = [ChannelPair(rng.random((16, 16)), rng.random((16, 16)), name=f"p{i}") for i in range(3)]
    truth = {p.mixed.tobytes(): (p.d1, p.d2) for p in pairs}
    report = evaluate(lambda x: truth[x.tobytes()], pairs)
    agg = report.aggregate()
    assert agg["psnr_d1"] == PSNR_CAP and agg["psnr_d2"] == PSNR_CAP
    assert agg["ssim_d1"] == 1.0 and agg["n_images"] == 3
    report.write(tmp_path / "m.csv")
    assert json.loads((tmp_path / "m.json").read_text())["psnr_mean"] == PSNR_CAP
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "image,psnr_d1,psnr_d2,ssim_d1,ssim_d2"
    with pytest.raises(ValueError):
        evaluate(lambda x: (x, x), [])
    assert np.isnan(EvalReport().psnr)

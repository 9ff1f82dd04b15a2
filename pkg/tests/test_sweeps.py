import csv

import pytest

from lcsplit.datagen import ConfigurationError
from lcsplit.model import Variant, activation_footprint, build
from lcsplit.sweeps import eval_pad, lc_level_config, sweep_lc_levels, sweep_patch_size
from lcsplit.train import TrainConfig

from conftest import tiny_config

TCFG = TrainConfig(batch_size=4, patch_size=16, max_epochs=1, steps_per_epoch=2)


def test_k_zero_is_vanilla_architecture():
    base = tiny_config(n_levels=3)
    k0 = build(lc_level_config(base, 0))
    van = build(base.replace(variant=Variant.VANILLA, n_lc=0))
    assert [(n, p.shape) for n, p in k0.named_parameters()] == [(n, p.shape) for n, p in van.named_parameters()]
    assert lc_level_config(base, 1).variant is Variant.DEEP_LC
    assert lc_level_config(base, 2).variant is Variant.LC
    with pytest.raises(ConfigurationError):
        lc_level_config(base, 3)


def test_lc_footprint_grows_linearly_in_context_levels():
    base = tiny_config(n_levels=4, patch_size=64, base_channels=16, z_channels=16)
    fps = [activation_footprint(lc_level_config(base, k)) for k in range(4)]
    assert fps == sorted(fps)
    # each context level costs about one more vanilla network, never a 4x area jump
    steps = [b - a for a, b in zip(fps, fps[1:])]
    assert all(0.5 * fps[0] < s < 1.5 * fps[0] for s in steps)


def test_eval_pad():
    assert eval_pad(64) == 24 and eval_pad(32) == 12 and eval_pad(16) == 6


def test_lc_sweep_table(tiny_dataset, tmp_path):
    table = sweep_lc_levels(tiny_config(), [0, 1], tiny_dataset, TCFG, seeds=(0,), out_dir=tmp_path)
    assert table.values() == [0, 1] and len(table.rows) == 2
    assert (tmp_path / "lc_levels.png").exists()
    rows = list(csv.DictReader((tmp_path / "lc_levels.csv").open()))
    assert [int(r["value"]) for r in rows] == [0, 1]
    assert int(rows[1]["footprint"]) > int(rows[0]["footprint"])


def test_sweep_reuses_matching_runs(tiny_dataset, tmp_path):
    first = sweep_lc_levels(tiny_config(), [1], tiny_dataset, TCFG, out_dir=tmp_path, reuse=True)
    mtime = (tmp_path / "1_seed0" / "best.pt").stat().st_mtime_ns
    again = sweep_lc_levels(tiny_config(), [1], tiny_dataset, TCFG, out_dir=tmp_path, reuse=True)
    assert (tmp_path / "1_seed0" / "best.pt").stat().st_mtime_ns == mtime
    assert again.rows[0]["psnr"] == first.rows[0]["psnr"]


def test_patch_size_sweep(tiny_dataset, tmp_path):
    table = sweep_patch_size(tiny_config(), [16], tiny_dataset, TCFG, out_dir=tmp_path)
    assert len(table.summary()) == 1
    assert (tmp_path / "patch_size.csv").exists()
    with pytest.raises(ConfigurationError):
        sweep_patch_size(tiny_config(), [64], tiny_dataset, TCFG)
    with pytest.raises(ConfigurationError):
        sweep_patch_size(tiny_config(), [24], tiny_dataset, TCFG)


def test_vanilla_footprint_increases_with_size():
    fps = [activation_footprint(tiny_config(patch_size=s)) for s in (16, 32, 64, 128)]
    assert all(b > a for a, b in zip(fps, fps[1:]))

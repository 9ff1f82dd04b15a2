import csv
import json

import numpy as np
import pytest
import tifffile

from lcsplit.cli import main
from lcsplit.config import RunConfig
from lcsplit.datagen import ConfigurationError

TINY_DATA = ["--size", "48", "--count", "12", "--n-join", "8"]
TINY_MODEL = ["--patch-size", "16", "--n-levels", "2", "--base-channels", "4", "--z-channels", "4",
              "--batch-size", "4", "--steps-per-epoch", "2", "--max-epochs", "1"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "data.toml"
    cfg.write_text('stroke_len = 32\nstrokes_per_channel = 3\n')
    assert main(["gen-data", "--config", str(cfg), *TINY_DATA, "--seed", "7", "--out", str(root / "data")]) == 0
    assert main(["train", "--data", str(root / "data" / "manifest.json"), "--out", str(root / "run"),
                 "--variant", "lc", "--n-lc", "1", *TINY_MODEL]) == 0
    return root


def test_gen_data_outputs(workspace):
    manifest = json.loads((workspace / "data" / "manifest.json").read_text())
    assert len(manifest["files"]) == 12 and manifest["meta"]["params"]["seed"] == 7
    rc = RunConfig.layered(workspace / "data" / "run_config.toml")
    assert rc.canvas_size == 48 and rc.stroke_len == 32


def test_gen_data_rerun_from_config_is_identical(workspace, tmp_path):
    assert main(["gen-data", "--config", str(workspace / "data" / "run_config.toml"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "manifest.json").read_bytes() == (workspace / "data" / "manifest.json").read_bytes()


def test_missing_out_is_usage_error(capsys):
    assert main(["gen-data", "--size", "64"]) == 2
    assert "--out" in capsys.readouterr().err
    assert main(["no-such-command"]) == 2
    assert main(["predict", "--image", "x.tif"]) == 2


def test_train_outputs(workspace):
    run = workspace / "run"
    assert (run / "best.pt").exists() and (run / "run_config.toml").exists()
    rows = list(csv.DictReader((run / "train_log.csv").open()))
    assert len(rows) == 1


def test_train_rerun_reproduces_loss(workspace, tmp_path):
    assert main(["train", "--config", str(workspace / "run" / "run_config.toml"), "--out", str(tmp_path)]) == 0
    a = list(csv.DictReader((workspace / "run" / "train_log.csv").open()))[0]
    b = list(csv.DictReader((tmp_path / "train_log.csv").open()))[0]
    assert a["train_total"] == b["train_total"]


def test_predict_writes_two_pages(workspace, tmp_path):
    img = np.random.default_rng(0).random((40, 40)).astype(np.float32)
    tifffile.imwrite(tmp_path / "in.tif", img)
    out = tmp_path / "pred.tif"
    code = main(["predict", "--checkpoint", str(workspace / "run" / "best.pt"), "--image", str(tmp_path / "in.tif"),
                 "--strategy", "inner", "--pad", "4", "--out", str(out)])
    assert code == 0
    pred = tifffile.imread(out)
    assert pred.shape == (2, 40, 40) and pred.dtype == np.float32


def test_predict_runtime_errors(workspace, tmp_path):
    ck = str(workspace / "run" / "best.pt")
    assert main(["predict", "--checkpoint", ck, "--image", str(tmp_path / "nope.tif"), "--out", str(tmp_path / "o.tif")]) == 1
    assert main(["predict", "--checkpoint", str(tmp_path / "nope.pt"), "--image", "x", "--out", "y"]) == 1


def test_eval_and_padding_bench(workspace, tmp_path):
    ck = str(workspace / "run" / "best.pt")
    data = str(workspace / "data" / "manifest.json")
    assert main(["eval", "--checkpoint", ck, "--data", data, "--pad", "4", "--out", str(tmp_path / "ev")]) == 0
    agg = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    assert agg["n_images"] == 1
    assert main(["eval", "--checkpoint", ck, "--data", data, "--pad", "4", "--out", str(tmp_path / "r" / "report.csv")]) == 0
    assert (tmp_path / "r" / "report.json").exists()
    assert main(["padding-bench", "--checkpoint", ck, "--data", data, "--pad", "4", "--out", str(tmp_path / "pb")]) == 0
    rows = list(csv.DictReader((tmp_path / "pb" / "padding_bench.csv").open()))
    assert [r["strategy"] for r in rows] == ["inner", "outer", "none"]
    assert rows[0]["pad"] == "4"
    # 48 px images, 16 px tiles: inner stride 8 gives 36 tiles per image, none gives 9
    assert int(rows[0]["n_tiles"]) == 4 * int(rows[2]["n_tiles"])
    assert main(["padding-bench", "--checkpoint", str(tmp_path / "none.pt"), "--data", data, "--out", str(tmp_path)]) == 1


def test_sweep_lc_levels(workspace, tmp_path):
    data = str(workspace / "data" / "manifest.json")
    code = main(["sweep", "lc-levels", "--k", "0,1,2", "--data", data, "--out", str(tmp_path), *TINY_MODEL])
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "lc_levels.csv").open()))
    assert [r["value"] for r in rows] == ["0", "1", "2"]
    assert (tmp_path / "lc_levels.png").exists()
    assert RunConfig.layered(tmp_path / "run_config.toml").n_levels == 3


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("no_such_key = 1\n")
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path)]) == 2
    with pytest.raises(ConfigurationError):
        RunConfig.layered(bad)


def test_config_layering(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text("batch_size = 8\nlr = 0.01\n")
    rc = RunConfig.layered(f, {"batch_size": 2, "seed": None})
    assert rc.batch_size == 2 and rc.lr == 0.01 and rc.seed == 0
    assert rc.train_config().batch_size == 2
    rc.dump(tmp_path / "out.toml")
    assert RunConfig.layered(tmp_path / "out.toml") == rc

"""``lcsplit`` command suite.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Each command resolves a RunConfig (defaults, then ``--config``, then flags)
and writes it next to its outputs so the run can be repeated from it alone.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import tifffile

from lcsplit.config import CONFIG_NAME, RunConfig
from lcsplit.datagen import ConfigurationError, make_critter_dataset, read_dataset, write_dataset
from lcsplit.model import build, load_checkpoint
from lcsplit.tiling import PAD_GRID, padding_benchmark, predict_image

log = logging.getLogger("lcsplit")


class UsageError(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# flag name -> RunConfig key, argparse kwargs
MODEL_FLAGS = {
    "--mode": ("mode", {"choices": ["hae", "hvae", "unet"]}),
    "--variant": ("variant", {"choices": ["vanilla", "lc", "lean_lc", "deep_lc"]}),
    "--n-levels": ("n_levels", {"type": int}),
    "--n-lc": ("n_lc", {"type": int}),
    "--patch-size": ("patch_size", {"type": int}),
    "--base-channels": ("base_channels", {"type": int}),
    "--z-channels": ("z_channels", {"type": int}),
    "--res-blocks": ("res_blocks_per_block", {"type": int}),
}
TRAIN_FLAGS = {
    "--batch-size": ("batch_size", {"type": int}),
    "--max-epochs": ("max_epochs", {"type": int}),
    "--steps-per-epoch": ("steps_per_epoch", {"type": int}),
    "--lr": ("lr", {"type": float}),
    "--lr-patience": ("lr_patience", {"type": int}),
    "--early-stop-patience": ("early_stop_patience", {"type": int}),
    "--precision": ("precision", {"choices": ["32", "mixed"]}),
    "--seed": ("seed", {"type": int}),
}
DATA_FLAGS = {
    "--size": ("canvas_size", {"type": int}),
    "--n-join": ("n_join", {"type": int}),
    "--count": ("count", {"type": int}),
    "--seed": ("seed", {"type": int}),
}


def _add_flags(p: argparse.ArgumentParser, table: dict) -> None:
    for flag, (key, kw) in table.items():
        p.add_argument(flag, dest=key, default=None, **kw)


def _resolve(args, keys: Sequence[str]) -> RunConfig:
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return RunConfig.layered(args.config, overrides)


def _flag_keys(*tables: dict) -> list[str]:
    return [key for t in tables for key, _ in t.values()]


def _require(value, flag: str):
    if not value:
        raise UsageError(f"{flag} is required (as a flag or in the config file)")
    return value


def _write_csv(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return path


# commands --------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    rc = _resolve(args, _flag_keys(DATA_FLAGS) + ["out"])
    out = Path(_require(rc.out, "--out"))
    dataset = make_critter_dataset(rc.critter_params(), rc.count)
    manifest = write_dataset(dataset, out)
    rc.dump(out / CONFIG_NAME)
    print(f"wrote {rc.count} images and {manifest}")
    return 0


def cmd_train(args) -> int:
    from lcsplit.train import train

    rc = _resolve(args, _flag_keys(MODEL_FLAGS, TRAIN_FLAGS) + ["data", "out"])
    data = _require(rc.data, "--data")
    out = Path(_require(rc.out, "--out"))
    mcfg, tcfg = rc.model_config(), rc.train_config()
    rc.dump(out / CONFIG_NAME)
    result = train(build(mcfg), read_dataset(data), tcfg, out_dir=out)
    print(f"best epoch {result.best_epoch} val {result.best_val:.6g}; checkpoint {result.checkpoint}")
    return 0


def _read_image(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"image not found: {p}")
    img = np.asarray(tifffile.imread(p), dtype=np.float32)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    if img.ndim != 2:
        raise ValueError(f"expected a single-channel 2-D image, got shape {img.shape}")
    return img


def cmd_predict(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    image = _read_image(args.image)
    pred = predict_image(image, model, args.strategy, pad=args.pad)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tifffile.imwrite(out, np.stack([pred.mu1, pred.mu2]).astype(np.float32))
    print(f"wrote {out} ({pred.plan.n_tiles} tiles, strategy {pred.plan.strategy.value}, pad {pred.plan.pad})")
    return 0


def cmd_eval(args) -> int:
    from lcsplit.metrics import evaluate

    model, _ = load_checkpoint(args.checkpoint)
    pairs = read_dataset(args.data).subset(args.split)
    report = evaluate(model, pairs, strategy=args.strategy, pad=args.pad)
    out = Path(args.out)
    # a .csv path names the report itself; anything else is a directory
    csv_path = out if out.suffix == ".csv" else out / "metrics.csv"
    report.write(csv_path, csv_path.with_suffix(".json"))
    print(json.dumps(report.aggregate(), sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    from lcsplit.sweeps import sweep_lc_levels, sweep_patch_size

    rc = _resolve(args, _flag_keys(MODEL_FLAGS, TRAIN_FLAGS) + ["data", "out"])
    data = _require(rc.data, "--data")
    out = Path(_require(rc.out, "--out"))
    dataset = read_dataset(data)
    if args.study == "lc-levels":
        values = args.k or (0, 1, 2)
        if max(values) >= rc.n_levels:
            # make room for the deepest requested context stack
            rc = rc.updated({"n_levels": max(values) + 1})
        rc = rc.updated({"variant": "vanilla", "n_lc": 0})
    else:
        values = args.sizes or (32, 64, 128)
    rc.dump(out / CONFIG_NAME)
    mcfg, tcfg = rc.model_config(), rc.train_config()
    if args.study == "lc-levels":
        table = sweep_lc_levels(mcfg, values, dataset, tcfg, seeds=args.seeds, out_dir=out)
    else:
        table = sweep_patch_size(mcfg, values, dataset, tcfg, seeds=args.seeds, out_dir=out)
    for row in table.summary():
        print(f"{row['value']:>6}  psnr {row['median_psnr']:.2f}  footprint {row['footprint']}")
    return 0


def cmd_padding_bench(args) -> int:
    if not Path(args.checkpoint).exists():
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    model, _ = load_checkpoint(args.checkpoint)
    pairs = read_dataset(args.data).subset(args.split)
    rows = padding_benchmark(model, pairs, pad=args.pad, inner_pads=PAD_GRID if args.pad_grid else None)
    path = _write_csv(Path(args.out) / "padding_bench.csv", rows)
    for r in rows:
        print(f"{r['strategy']:>5} pad {r['pad']:>2}  tiles {r['n_tiles']:>6}  psnr {r['psnr']:.2f}  "
              f"seam {r['seam_score']:.3f}")
    print(f"wrote {path}")
    return 0


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcsplit", description="Image decomposition with lateral context.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic critter dataset")
    p.add_argument("--config")
    p.add_argument("--out")
    _add_flags(p, DATA_FLAGS)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a dataset manifest")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--out")
    _add_flags(p, MODEL_FLAGS)
    _add_flags(p, TRAIN_FLAGS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="tiled prediction of one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--strategy", choices=["inner", "outer", "none"], default="inner")
    p.add_argument("--pad", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="PSNR/SSIM of a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--strategy", choices=["inner", "outer", "none"], default="inner")
    p.add_argument("--pad", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="patch-size or context-depth study")
    p.add_argument("study", choices=["patch-size", "lc-levels"])
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--k", type=_int_list, default=None, help="context depths, e.g. 0,1,2")
    p.add_argument("--sizes", type=_int_list, default=None, help="patch sizes, e.g. 32,64,128")
    p.add_argument("--seeds", type=_int_list, default=(0,))
    _add_flags(p, {k: v for k, v in MODEL_FLAGS.items() if k not in ("--variant", "--n-lc")})
    _add_flags(p, TRAIN_FLAGS)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("padding-bench", help="compare inner, outer and no padding")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--pad", type=int, default=24)
    p.add_argument("--pad-grid", action="store_true", help=f"run inner padding for every pad in {PAD_GRID}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_padding_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"lcsplit {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"lcsplit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

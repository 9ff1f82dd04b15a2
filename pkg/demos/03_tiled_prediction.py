"""
Tiled prediction and seams
==========================

Train a small deterministic ladder network (HAE, fitted with squared error,
which learns quickly) for a few hundred steps, then predict whole test
images three ways: plain tiling, inner padding (keep only each tile's core)
and outer padding (feed larger windows).  The seam score compares jumps on
tile borders with jumps everywhere else; 1 means no visible grid.

Takes a few minutes on one CPU core.
"""
import sys
from pathlib import Path

import torch

from lcsplit.datagen import CritterParams, make_critter_dataset
from lcsplit.model import ModelConfig, Mode, Variant, build
from lcsplit.tiling import PAD_GRID, Strategy, padding_benchmark
from lcsplit.train import TrainConfig, train

torch.set_num_threads(1)
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_output")

data = make_critter_dataset(CritterParams(canvas_size=128, n_join=25, seed=0), 120)
cfg = ModelConfig(mode=Mode.HAE, variant=Variant.VANILLA, n_levels=3, patch_size=64, base_channels=16, z_channels=8)
model = build(cfg)
result = train(model, data, TrainConfig(batch_size=16, max_epochs=3, steps_per_epoch=100), out_dir=out / "tiling_run")
print("best validation loss", round(result.best_val, 4), "at epoch", result.best_epoch)

###############################################################################
# Compare strategies, and a few inner pads.

rows = padding_benchmark(model, data.subset("test"), pad=24, inner_pads=PAD_GRID,
                         strategies=(Strategy.INNER, Strategy.OUTER, Strategy.NONE))
print(f"{'strategy':<8}{'pad':>5}{'tiles':>7}{'psnr':>8}{'ssim':>7}{'seams':>7}")
for r in rows:
    print(f"{r['strategy']:<8}{r['pad']:>5}{r['n_tiles']:>7}{r['psnr']:>8.2f}{r['ssim']:>7.3f}{r['seam_score']:>7.2f}")

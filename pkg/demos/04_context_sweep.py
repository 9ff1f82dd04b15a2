"""
How much context helps
======================

Sweep the number of context inputs k on a 3-level HVAE: k = 0 is the plain
ladder, k = 2 gives every level its own wider view, and k = 1 sits in
between with an ordinary level on top.  All models get the same number of
optimizer steps.  Results land in lc_levels.csv and lc_levels.png.

The budget here is tiny so the script finishes in reasonable time; raise
``steps`` for a meaningful comparison.
"""
import sys
from pathlib import Path

import torch

from lcsplit.datagen import CritterParams, make_critter_dataset
from lcsplit.model import ModelConfig, Variant
from lcsplit.sweeps import sweep_lc_levels
from lcsplit.train import TrainConfig

torch.set_num_threads(1)
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_output")
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 200

data = make_critter_dataset(CritterParams(canvas_size=128, n_join=25, seed=0), 100)
base = ModelConfig(variant=Variant.VANILLA, n_levels=3, patch_size=64, base_channels=8, z_channels=8)
tcfg = TrainConfig(batch_size=8, max_epochs=max(1, steps // 100), steps_per_epoch=min(steps, 100))
table = sweep_lc_levels(base, [0, 1, 2], data, tcfg, seeds=(0,), out_dir=out / "context_sweep")

for s in table.summary():
    print(f"k={s['value']}  median PSNR {s['median_psnr']:.2f} dB  activations {s['footprint']:,}")

"""
Synthetic critters and their context stacks
===========================================

Two channels of sinusoidal strokes are averaged into one input image.  Each
stroke has a flat middle segment that looks the same in both channels, so a
small patch centred on it cannot tell the channels apart.  Lateral context
adds coarser, wider crops around the same centre.
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lcsplit.datagen import CritterParams, generate_critter_channels, superimpose
from lcsplit.pyramid import PatchSpec, build_lc_stack

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_output")
out.mkdir(parents=True, exist_ok=True)

params = CritterParams(canvas_size=256, n_join=25, seed=0)
d1, d2 = generate_critter_channels(params, 0)
x = superimpose(d1, d2)
print("channel means", d1.mean(), d2.mean(), "input mean", x.mean())

###############################################################################
# A 64 px patch plus three context crops of 128, 256 and 512 px, each
# brought back to 64 px by block averaging.  Crops that leave the canvas
# are mirrored.

spec = PatchSpec(center=(128, 128), size=64)
stack = build_lc_stack(x, spec, n_lc=3)
layers = stack.as_array()
print("stack shape", layers.shape)

fig, axes = plt.subplots(1, 3 + len(layers), figsize=(3 * (3 + len(layers)), 3))
for ax, img, title in zip(axes, (d1, d2, x), ("channel 1", "channel 2", "input")):
    ax.imshow(img, cmap="magma")
    ax.set_title(title)
for k, (ax, img) in enumerate(zip(axes[3:], layers)):
    ax.imshow(img, cmap="gray")
    ax.set_title(f"level {k}: {64 * 2**k} px view")
for ax in axes:
    ax.axis("off")
fig.tight_layout()
fig.savefig(out / "critters_and_context.png", dpi=80)
print("wrote", out / "critters_and_context.png")

# the mean of every context layer equals the mean of the raw crop it summarises
print("layer means", np.round(layers.mean(axis=(1, 2)), 4))

"""
Activation memory versus field of view
======================================

Widening what a vanilla ladder network sees means feeding bigger patches,
and activation memory grows with patch area.  Lateral context keeps the
patch at 64 px and adds one extra input per level instead.
"""
from lcsplit.model import ModelConfig, Variant, activation_footprint, receptive_field

rows = []
# a vanilla network never sees past its own patch, whatever its receptive field
for size in (64, 128, 256, 512):
    cfg = ModelConfig(variant=Variant.VANILLA, n_levels=4, patch_size=size)
    rows.append(("vanilla", size, min(size, receptive_field(cfg)), activation_footprint(cfg)))
for n_lc, variant in ((1, Variant.DEEP_LC), (2, Variant.DEEP_LC), (3, Variant.LC)):
    cfg = ModelConfig(variant=variant, n_levels=4, n_lc=n_lc, patch_size=64)
    rows.append((f"{variant.value} n_lc={n_lc}", 64, receptive_field(cfg), activation_footprint(cfg)))
cfg = ModelConfig(variant=Variant.LEAN_LC, n_levels=4, n_lc=3, patch_size=64)
rows.append(("lean_lc n_lc=3", 64, receptive_field(cfg), activation_footprint(cfg)))

print(f"{'model':<18}{'patch':>6}{'view':>7}{'activations':>14}")
for name, size, view, fp in rows:
    print(f"{name:<18}{size:>6}{view:>7}{fp:>14,}")

###############################################################################
# Same 512 px view, very different cost.

lc = activation_footprint(ModelConfig(variant=Variant.LC, n_levels=4, n_lc=3, patch_size=64))
big = activation_footprint(ModelConfig(variant=Variant.VANILLA, n_levels=4, patch_size=512))
print(f"LC at 64 px uses {lc / big:.1%} of the activations of vanilla at 512 px")

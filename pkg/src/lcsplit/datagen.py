"""Synthetic "sinusoidal critter" channel pairs, superimposition and dataset splits.

A critter is a straight stroke whose intensity along its axis follows a
sinusoid.  Each channel draws its frequency from its own band, so the channel
a stroke belongs to can be read off its profile.  The central ``n_join``
pixels of every stroke are replaced by a flat run at half amplitude, which is
identical in both channels; deciding who owns that run requires looking
beyond it.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import tifffile


class ConfigurationError(ValueError):
    """Raised for invalid generation, model or tiling parameters."""


@dataclass(frozen=True)
class CritterParams:
    canvas_size: int = 128
    n_join: int = 25
    strokes_per_channel: int = 6
    freq_band_1: tuple[float, float] = (0.04, 0.08)
    freq_band_2: tuple[float, float] = (0.12, 0.20)
    stroke_len: int = 80
    stroke_width: float = 3.0
    amplitude: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        lo1, hi1 = self.freq_band_1
        lo2, hi2 = self.freq_band_2
        if not (0 < lo1 <= hi1 and 0 < lo2 <= hi2):
            raise ConfigurationError(f"malformed frequency bands {self.freq_band_1}, {self.freq_band_2}")
        if max(lo1, lo2) <= min(hi1, hi2):
            raise ConfigurationError("frequency bands must be disjoint")
        if self.n_join < 0 or self.n_join >= self.stroke_len:
            raise ConfigurationError(f"need 0 <= n_join < stroke_len, got {self.n_join}, {self.stroke_len}")
        if self.strokes_per_channel < 0:
            raise ConfigurationError("strokes_per_channel must be non-negative")
        if self.stroke_width <= 0 or self.amplitude <= 0:
            raise ConfigurationError("stroke_width and amplitude must be positive")
        margin = int(np.ceil(self.stroke_width))
        if self.stroke_len + 2 * margin > self.canvas_size:
            raise ConfigurationError("stroke does not fit on the canvas")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["freq_band_1"] = list(self.freq_band_1)
        d["freq_band_2"] = list(self.freq_band_2)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CritterParams":
        d = dict(d)
        d["freq_band_1"] = tuple(d["freq_band_1"])
        d["freq_band_2"] = tuple(d["freq_band_2"])
        return cls(**d)


@dataclass(frozen=True)
class Stroke:
    """Geometry and profile of one rasterized critter."""

    start: tuple[float, float]  # (row, col) of t = 0
    direction: tuple[float, float]  # unit vector (drow, dcol)
    length: int
    freq: float
    phase: float
    channel: int

    def profile(self, t: np.ndarray, n_join: int, amplitude: float) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        values = amplitude * 0.5 * (1.0 + np.sin(2 * np.pi * self.freq * t + self.phase))
        j0 = (self.length - n_join) / 2.0
        in_join = (t >= j0) & (t < j0 + n_join)
        return np.where(in_join, amplitude / 2.0, values)


@dataclass
class ChannelPair:
    d1: np.ndarray
    d2: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.d1 = np.asarray(self.d1, dtype=np.float32)
        self.d2 = np.asarray(self.d2, dtype=np.float32)
        if self.d1.shape != self.d2.shape or self.d1.ndim != 2:
            raise ValueError(f"channel shapes differ or are not 2-D: {self.d1.shape} vs {self.d2.shape}")

    @property
    def mixed(self) -> np.ndarray:
        return superimpose(self.d1, self.d2)


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple[int, ...]
    val_ids: tuple[int, ...]
    test_ids: tuple[int, ...]

    def ids(self, name: str) -> tuple[int, ...]:
        try:
            return {"train": self.train_ids, "val": self.val_ids, "test": self.test_ids}[name]
        except KeyError:
            raise ValueError(f"unknown split {name!r}") from None

    def to_dict(self) -> dict:
        return {"train": list(self.train_ids), "val": list(self.val_ids), "test": list(self.test_ids)}


def _stroke_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def sample_strokes(params: CritterParams, index: int) -> list[Stroke]:
    """Draw the stroke geometry for image ``index``; channel 0 strokes first."""
    params.validate()
    if index < 0:
        raise ConfigurationError("index must be non-negative")
    rng = _stroke_rng(params.seed, index)
    size = params.canvas_size
    margin = float(np.ceil(params.stroke_width))
    strokes = []
    for channel, band in enumerate((params.freq_band_1, params.freq_band_2)):
        for _ in range(params.strokes_per_channel):
            theta = rng.uniform(0.0, 2 * np.pi)
            direction = (np.sin(theta), np.cos(theta))
            # pick the start so that the whole segment stays on the canvas
            ext_r = direction[0] * params.stroke_len
            ext_c = direction[1] * params.stroke_len
            r0 = rng.uniform(margin - min(0.0, ext_r), size - 1 - margin - max(0.0, ext_r))
            c0 = rng.uniform(margin - min(0.0, ext_c), size - 1 - margin - max(0.0, ext_c))
            strokes.append(
                Stroke(
                    start=(float(r0), float(c0)),
                    direction=(float(direction[0]), float(direction[1])),
                    length=params.stroke_len,
                    freq=float(rng.uniform(*band)),
                    phase=float(rng.uniform(0.0, 2 * np.pi)),
                    channel=channel,
                )
            )
    return strokes


def rasterize(strokes: Sequence[Stroke], params: CritterParams) -> tuple[np.ndarray, np.ndarray]:
    size = params.canvas_size
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    canvases = [np.zeros((size, size), dtype=np.float64) for _ in range(2)]
    half_w = params.stroke_width / 2.0
    for s in strokes:
        dr, dc = rows - s.start[0], cols - s.start[1]
        t = dr * s.direction[0] + dc * s.direction[1]
        perp = np.abs(dr * s.direction[1] - dc * s.direction[0])
        mask = (t >= 0) & (t < s.length) & (perp <= half_w)
        values = s.profile(t[mask], params.n_join, params.amplitude)
        target = canvases[s.channel]
        target[mask] = np.maximum(target[mask], values)
    return canvases[0].astype(np.float32), canvases[1].astype(np.float32)


def generate_critter_channels(params: CritterParams, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the two channel images of critter image ``index``.

    Deterministic in ``(params.seed, index)``; images never share random state.
    """
    return rasterize(sample_strokes(params, index), params)


def superimpose(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    d1 = np.asarray(d1, dtype=np.float32)
    d2 = np.asarray(d2, dtype=np.float32)
    if d1.shape != d2.shape:
        raise ValueError(f"shape mismatch: {d1.shape} vs {d2.shape}")
    return (d1 + d2) / np.float32(2.0)


def split_sizes(n: int, fractions: Sequence[float] = (0.8, 0.1, 0.1)) -> tuple[int, ...]:
    """Largest-remainder apportionment of ``n`` items over ``fractions``."""
    quotas = [n * f for f in fractions]
    sizes = [int(np.floor(q)) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    # ties go to the earlier bucket
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return tuple(sizes)


def split_dataset(n: int, seed: int) -> DatasetSplit:
    if n < 10:
        raise ValueError(f"need at least 10 images to split, got {n}")
    n_train, n_val, _ = split_sizes(n)
    perm = np.random.default_rng(seed).permutation(n)
    return DatasetSplit(
        train_ids=tuple(sorted(int(i) for i in perm[:n_train])),
        val_ids=tuple(sorted(int(i) for i in perm[n_train : n_train + n_val])),
        test_ids=tuple(sorted(int(i) for i in perm[n_train + n_val :])),
    )


def load_channel_stack(path: str | Path, channel_indices: Sequence[int]) -> list[ChannelPair]:
    """Read a float TIFF stack shaped (C, H, W) or (N, C, H, W) into channel pairs."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        data = tifffile.imread(path)
    except Exception as exc:  # tifffile raises a zoo of exception types
        raise ValueError(f"cannot read TIFF {path}: {exc}") from exc
    if data.ndim == 3:
        data = data[None]
    if data.ndim != 4:
        raise ValueError(f"expected (C,H,W) or (N,C,H,W) stack, got shape {data.shape}")
    if not np.issubdtype(data.dtype, np.number):
        raise ValueError(f"non-numeric TIFF dtype {data.dtype}")
    if len(channel_indices) != 2:
        raise ValueError("exactly two channel indices are required")
    n_channels = data.shape[1]
    for c in channel_indices:
        if not 0 <= c < n_channels:
            raise IndexError(f"channel {c} out of range for {n_channels}-channel stack")
    i, j = channel_indices
    return [
        ChannelPair(img[i].astype(np.float32), img[j].astype(np.float32), name=f"{path.stem}[{k}]")
        for k, img in enumerate(data)
    ]


@dataclass
class PairDataset:
    """Channel pairs plus their train/val/test partition."""

    pairs: list[ChannelPair]
    split: DatasetSplit
    meta: dict = field(default_factory=dict)

    def subset(self, name: str) -> list[ChannelPair]:
        return [self.pairs[i] for i in self.split.ids(name)]

    def fingerprint(self) -> str:
        """Digest of meta, split and pair names; identifies a dataset for result caching."""
        blob = json.dumps(
            {"meta": self.meta, "split": self.split.to_dict(), "names": [p.name for p in self.pairs]},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_critter_dataset(params: CritterParams, count: int, split_seed: int | None = None) -> PairDataset:
    pairs = [ChannelPair(*generate_critter_channels(params, i), name=f"critter_{i:05d}") for i in range(count)]
    split_seed = params.seed if split_seed is None else split_seed
    split = split_dataset(count, split_seed)
    return PairDataset(pairs, split, meta={"params": params.to_dict(), "count": count, "split_seed": split_seed})


MANIFEST_VERSION = 1


def write_dataset(dataset: PairDataset, out: str | Path) -> Path:
    """Write one two-page float32 TIFF per pair plus ``manifest.json``."""
    out = Path(out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    files = []
    for pair in dataset.pairs:
        rel = f"images/{pair.name}.tif"
        tifffile.imwrite(out / rel, np.stack([pair.d1, pair.d2]).astype(np.float32))
        files.append(rel)
    manifest = {
        "version": MANIFEST_VERSION,
        "meta": dataset.meta,
        "files": files,
        "split": dataset.split.to_dict(),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_dataset(manifest_path: str | Path) -> PairDataset:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    pairs = []
    for rel in manifest["files"]:
        (pair,) = load_channel_stack(root / rel, (0, 1))
        pair.name = Path(rel).stem
        pairs.append(pair)
    s = manifest["split"]
    split = DatasetSplit(tuple(s["train"]), tuple(s["val"]), tuple(s["test"]))
    return PairDataset(pairs, split, meta=manifest.get("meta", {}))

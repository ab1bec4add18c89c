"""Synthetic dataset generators, CSV ingestion, and split management.

Generators are deterministic under their seed. The skewed-baskets generator
plants one contiguous indicator block per class and differs between train
and test only in the noise-bit rate, reproducing a transfer-learning style
domain gap measurable as a per-bit entropy difference.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    kind: str  # "binary" | "real" | "image"
    n_classes: int
    side: int | None = None  # image edge length when kind == "image"
    label_mapping: dict | None = None  # original -> dense label
    splits: dict = field(default_factory=dict)  # name -> index array

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise DatasetError("feature/label row counts differ")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DatasetError("label out of range")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.kind,
                       self.n_classes, side=self.side)

    def replace_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.kind, self.n_classes, side=self.side)


@dataclass
class SkewSpec:
    n_classes: int = 10
    records: int = 10000  # per split
    width: int = 600
    p_ind: float = 0.8
    p_noise_train: float = 0.2
    p_noise_test: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.width % self.n_classes:
            raise DatasetError(
                f"width {self.width} not divisible by {self.n_classes} classes")
        for p in (self.p_ind, self.p_noise_train, self.p_noise_test):
            if not 0.0 <= p <= 1.0:
                raise DatasetError(f"probability {p} out of range")

    @property
    def block(self) -> int:
        return self.width // self.n_classes


_SKEW_CHUNK = 10000  # rows generated per slab; keeps big runs off the swap


def _skew_split(spec: SkewSpec, p_noise: float, rng: np.random.Generator) -> Dataset:
    # float32 storage: bits are exact either way, and the 10^5-record runs
    # otherwise spend most of their time page-faulting fresh memory
    labels = rng.integers(spec.n_classes, size=spec.records)
    bits = np.empty((spec.records, spec.width), dtype=np.float32)
    block_starts = labels * spec.block
    cols = np.arange(spec.width)
    for lo in range(0, spec.records, _SKEW_CHUNK):
        hi = min(lo + _SKEW_CHUNK, spec.records)
        u = rng.random((hi - lo, spec.width), dtype=np.float32)
        ind = (cols >= block_starts[lo:hi, None]) & (
            cols < block_starts[lo:hi, None] + spec.block)
        bits[lo:hi] = u < np.where(ind, np.float32(spec.p_ind), np.float32(p_noise))
    return Dataset(bits, labels.astype(np.int64), "binary", spec.n_classes)


def gen_skewed_purchases(spec: SkewSpec) -> tuple[Dataset, Dataset]:
    """Train/test basket data; indicator bits at p_ind in both splits, noise
    bits at p_noise_train vs p_noise_test."""
    rng = np.random.default_rng(spec.seed)
    train = _skew_split(spec, spec.p_noise_train, rng)
    test = _skew_split(spec, spec.p_noise_test, rng)
    return train, test


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def per_bit_entropy_gap(train: Dataset, test: Dataset, spec: SkewSpec,
                        noise_only: bool = True) -> float:
    """Mean per-bit Shannon entropy difference (test - train), class-conditional.

    Bit frequencies are estimated within each class; entropies are averaged
    over (class, position) pairs. noise_only restricts to positions outside
    the class's indicator block (the informative gap, H(p_test) - H(p_train)
    per noise bit); with noise_only=False indicator positions dilute the gap
    by a factor (1 - 1/n_classes).
    """
    gaps = []
    for c in range(spec.n_classes):
        tr = train.features[train.labels == c]
        te = test.features[test.labels == c]
        if not len(tr) or not len(te):
            continue
        h_tr = _binary_entropy(tr.mean(axis=0))
        h_te = _binary_entropy(te.mean(axis=0))
        mask = np.ones(spec.width, dtype=bool)
        if noise_only:
            mask[c * spec.block:(c + 1) * spec.block] = False
        gaps.append(h_te[mask] - h_tr[mask])
    if not gaps:
        raise DatasetError("no class present in both splits")
    return float(np.concatenate(gaps).mean())


def gen_unbalanced_carts(n_classes: int, n: int, width: int, gamma: float = 1.0,
                         pattern_strength: float = 0.85, seed: int = 0) -> Dataset:
    """Binary records with class sizes proportional to rank^(-gamma).

    Each class plants a high-probability contiguous bit block; background
    bits fire at 1 - pattern_strength, so records are class-separable but
    individually noisy enough to memorize.
    """
    if n_classes < 2:
        raise DatasetError(f"need at least 2 classes, got {n_classes}")
    if width < n_classes:
        raise DatasetError(f"width {width} smaller than class count {n_classes}")
    if n < n_classes:
        raise DatasetError(f"need at least one record per class, got n={n}")
    weights = np.arange(1, n_classes + 1, dtype=np.float64) ** (-gamma)
    raw = n * weights / weights.sum()
    sizes = np.floor(raw).astype(np.int64)
    remainder = raw - sizes
    for i in np.argsort(-remainder)[: n - int(sizes.sum())]:
        sizes[i] += 1
    while (sizes == 0).any():  # keep every class populated
        sizes[sizes.argmin()] += 1
        sizes[sizes.argmax()] -= 1

    rng = np.random.default_rng(seed)
    block = width // n_classes
    labels = np.repeat(np.arange(n_classes), sizes)
    thresholds = np.full((n, width), 1.0 - pattern_strength)
    for c in range(n_classes):
        rows = labels == c
        thresholds[rows, c * block:(c + 1) * block] = pattern_strength
    bits = (rng.random((n, width)) < thresholds).astype(np.float64)
    order = rng.permutation(n)
    return Dataset(bits[order], labels[order].astype(np.int64), "binary", n_classes)


IMAGE_PATTERNS = ("stripes-h", "stripes-v", "checker", "disk")


def _pattern_image(name: str, side: int, rng: np.random.Generator) -> np.ndarray:
    # small phase jitter and brightness variation keep records distinct while
    # leaving class centroids separable for a nearest-centroid baseline
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    period = max(side / 4.0, 2.0)
    phase = rng.uniform(-0.05, 0.05)
    if name == "stripes-h":
        base = (np.sin(2 * np.pi * (yy / period + phase)) + 1) / 2
    elif name == "stripes-v":
        base = (np.sin(2 * np.pi * (xx / period + phase)) + 1) / 2
    elif name == "checker":
        base = (np.sin(2 * np.pi * (xx / period + phase))
                * np.sin(2 * np.pi * (yy / period + phase)) + 1) / 2
    elif name == "disk":
        cx = side / 2 + phase * side
        r = np.hypot(xx - cx, yy - cx)
        base = (r < side / 3).astype(np.float64)
    else:
        raise DatasetError(f"unknown pattern {name!r}")
    img = 255 * rng.uniform(0.7, 1.0) * base + rng.normal(0, 20, size=(side, side))
    return np.clip(img, 0, 255)


def gen_gray_images(count: int, side: int, patterns=IMAGE_PATTERNS, seed: int = 0) -> Dataset:
    """Grayscale images in [0, 255] labeled by geometric pattern."""
    if side < 8:
        raise DatasetError(f"side must be >= 8, got {side}")
    patterns = list(patterns)
    rng = np.random.default_rng(seed)
    labels = rng.integers(len(patterns), size=count)
    flat = np.empty((count, side * side))
    for i, c in enumerate(labels):
        flat[i] = _pattern_image(patterns[c], side, rng).ravel()
    return Dataset(flat, labels.astype(np.int64), "image", len(patterns), side=side)


def save_csv_dataset(ds: Dataset, path) -> None:
    """Write header label,f0,... rows; image datasets get a sidecar meta JSON."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(ds.width)])
        binary = ds.kind == "binary"
        for y, row in zip(ds.labels, ds.features):
            if binary:
                writer.writerow([int(y)] + [int(v) for v in row])
            else:
                writer.writerow([int(y)] + [repr(float(v)) for v in row])
    if ds.kind == "image":
        meta = {"side": ds.side, "classes": ds.n_classes}
        path.with_suffix(".meta.json").write_text(json.dumps(meta))


def load_csv_dataset(path, label_column: str = "label", kind: str = "binary") -> Dataset:
    """Parse a rectangular CSV with a header into a Dataset.

    Binary columns are validated to contain only 0/1; labels are re-indexed
    densely in sorted order with the mapping recorded. Errors name the
    offending file line and column.
    """
    if kind not in ("binary", "real", "image"):
        raise DatasetError(f"unknown feature kind {kind!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if label_column not in header:
            raise DatasetError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
        width = len(header) - 1

        raw_labels: list[float] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            values = []
            for col, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column "
                        f"{header[col]!r}") from None
                if col == label_idx:
                    raw_labels.append(v)
                else:
                    if kind == "binary" and v not in (0.0, 1.0):
                        raise DatasetError(
                            f"{path}:{lineno}: non-binary value {cell!r} in column "
                            f"{header[col]!r}")
                    values.append(v)
            rows.append(values)

    if not rows:
        raise DatasetError(f"{path}: no data rows")
    features = np.asarray(rows, dtype=np.float64).reshape(len(rows), width)
    uniques = sorted(set(raw_labels))
    mapping = {orig: i for i, orig in enumerate(uniques)}
    labels = np.asarray([mapping[v] for v in raw_labels], dtype=np.int64)

    side = None
    if kind == "image":
        meta_path = path.with_suffix(".meta.json")
        if meta_path.exists():
            side = json.loads(meta_path.read_text())["side"]
        else:
            side = int(round(width ** 0.5))
    return Dataset(features, labels, kind, len(uniques), side=side, label_mapping=mapping)


def make_splits(dataset: Dataset, n: int, k_shadows: int, seed: int,
                shadow_size: int | None = None, stratified: bool = False,
                out_path=None):
    """Target/shadow split indices (delegating to the attack partitioner),
    optionally persisted as JSON arrays keyed by split name."""
    from . import attacks

    layout = attacks.partition_attack_data(dataset, n, k_shadows, seed,
                                           shadow_size=shadow_size, stratified=stratified)
    if out_path is not None:
        save_splits(layout.as_dict(), out_path)
    return layout


def save_splits(splits: dict, path) -> None:
    Path(path).write_text(json.dumps(
        {k: [int(i) for i in v] for k, v in splits.items()}, indent=0))


def load_splits(path) -> dict:
    raw = json.loads(Path(path).read_text())
    return {k: np.asarray(v, dtype=np.int64) for k, v in raw.items()}

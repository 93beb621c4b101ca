"""Datasets and file formats: synthetic blobs, MNIST IDX, and CSV.

Labels are 0-based in memory and 1-based in every file.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simplex import SimplexError, validate_simplex_rows

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
FILE_TOL = 1e-6
CENTER_SPACING = 3.0


class FormatError(ValueError):
    """A data file does not match its documented layout."""


@dataclass
class DatasetSplit:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,), 0-based
    tag: str = "train"
    m: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be (n, d), got {self.features.shape}")
        if len(self.labels) != len(self.features) or len(self.labels) == 0:
            raise ValueError("need n >= 1 samples with one label each")
        if self.m is None:
            self.m = int(self.labels.max()) + 1
        if self.labels.min() < 0 or self.labels.max() >= self.m:
            raise ValueError(f"labels outside [1, {self.m}]")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.m)


def _centers(m: int, d: int) -> np.ndarray:
    # neighbouring centers sit CENTER_SPACING apart in either layout
    c = np.zeros((m, d))
    if m <= d:
        c[np.arange(m), np.arange(m)] = CENTER_SPACING / math.sqrt(2.0)
    else:
        radius = CENTER_SPACING / (2.0 * math.sin(math.pi / m))
        ang = 2 * np.pi * np.arange(m) / m
        c[:, 0], c[:, 1] = radius * np.cos(ang), radius * np.sin(ang)
    return c


def stratified_split(labels: np.ndarray, rng: np.random.Generator, fractions=(0.70, 0.15, 0.15)):
    """Index arrays for train/validation/test, class by class."""
    parts = [[], [], []]
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        nc = len(idx)
        n_va = max(1, round(fractions[1] * nc))
        n_te = max(1, round(fractions[2] * nc))
        n_tr = nc - n_va - n_te
        if n_tr < 1:
            raise ValueError(f"class {c} has {nc} samples, too few for a three-way split")
        parts[0].append(idx[:n_tr])
        parts[1].append(idx[n_tr : n_tr + n_va])
        parts[2].append(idx[n_tr + n_va :])
    return [np.sort(np.concatenate(p)) for p in parts]


def synth_blobs(
    m: int, n_per_class, d: int, separation: float, seed: int
) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """Gaussian clusters with covariance ``I / separation``, split 70/15/15.

    Centers are scaled unit vectors when ``m <= d`` and evenly spaced points
    of a circle in the first two coordinates otherwise; either way
    neighbouring centers are ``CENTER_SPACING`` apart.
    """
    counts = [int(c) for c in n_per_class]
    if len(counts) != m:
        raise ValueError(f"need {m} class counts, got {len(counts)}")
    if min(counts) < 3:
        raise ValueError("every class needs at least 3 samples for a stratified split")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not separation > 0:
        raise ValueError(f"separation must be positive, got {separation}")
    rng = np.random.default_rng(seed)
    centers = _centers(m, d)
    labels = np.repeat(np.arange(m), counts)
    x = centers[labels] + rng.standard_normal((len(labels), d)) / math.sqrt(separation)
    splits = stratified_split(labels, rng)
    return tuple(
        DatasetSplit(x[idx], labels[idx], tag, m) for idx, tag in zip(splits, ("train", "validation", "test"))
    )


def _read_idx(path: Path, magic: int) -> tuple[tuple[int, ...], bytes]:
    raw = Path(path).read_bytes()
    ndim = 3 if magic == IDX_IMAGES_MAGIC else 1
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: expected at least {header} header bytes, got {len(raw)}")
    (got,) = struct.unpack(">i", raw[:4])
    if got != magic:
        raise FormatError(f"{path}: magic number {got}, expected {magic}")
    dims = struct.unpack(">" + "i" * ndim, raw[4:header])
    need = header + math.prod(dims)
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes, got {len(raw)}")
    return dims, raw[header:]


def load_idx(images_path, labels_path, tag: str = "train", m: int = 10) -> DatasetSplit:
    """MNIST-style IDX pair; pixels are scaled to ``[0, 1]``."""
    (n, rows, cols), pix = _read_idx(images_path, IDX_IMAGES_MAGIC)
    (nl,), lab = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if n != nl:
        raise FormatError(f"{n} images but {nl} labels")
    x = np.frombuffer(pix, dtype=np.uint8).reshape(n, rows * cols).astype(np.float64) / 255.0
    y = np.frombuffer(lab, dtype=np.uint8).astype(np.int64)
    if y.max() >= m:
        raise FormatError(f"label {y.max()} outside [0, {m - 1}]")
    return DatasetSplit(x, y, tag, m)


def load_mnist(directory, n_validation: int = 10000):
    """Train/validation/test splits from the four standard MNIST files.

    The last ``n_validation`` training images form the validation split.
    """
    d = Path(directory)
    full = load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    test = load_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte", tag="test")
    cut = full.n - n_validation
    train = DatasetSplit(full.features[:cut], full.labels[:cut], "train", 10)
    val = DatasetSplit(full.features[cut:], full.labels[cut:], "validation", 10)
    return train, val, test


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise FormatError(f"{path}: row {lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return header, np.array(rows)


def _labels_from(col: np.ndarray, m: int, path) -> np.ndarray:
    bad = (col != np.round(col)) | (col < 1) | (col > m)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FormatError(f"{path}: row {i + 2}: label {col[i]!r} outside [1, {m}]")
    return col.astype(np.int64) - 1


def read_predictions(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``y,p1,...,pm`` CSV into ``(probs, labels)`` (labels 0-based)."""
    header, data = _rows(path)
    m = len(header) - 1
    if header[0] != "y" or header[1:] != [f"p{j}" for j in range(1, m + 1)] or m < 2:
        raise FormatError(f"{path}: header must be y,p1,...,pm with m >= 2, got {','.join(header)}")
    probs = data[:, 1:]
    try:
        validate_simplex_rows(probs, FILE_TOL)
    except SimplexError as exc:
        raise FormatError(f"{path}: row {exc.row + 2}: {exc.reason}") from None
    return probs, _labels_from(data[:, 0], m, path)


def write_predictions(path, probs: np.ndarray, labels: np.ndarray) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    m = probs.shape[1]
    buf = io.StringIO()
    buf.write(",".join(["y"] + [f"p{j}" for j in range(1, m + 1)]) + "\n")
    for y, row in zip(labels, probs):
        buf.write(",".join([str(int(y) + 1)] + [format(v, ".17g") for v in row]) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_csv(path, tag: str = "train", m: int | None = None) -> DatasetSplit:
    """Dataset CSV with header ``x1,...,xd,y``. Features are taken as is."""
    header, data = _rows(path)
    d = len(header) - 1
    if header[-1] != "y" or header[:-1] != [f"x{j}" for j in range(1, d + 1)] or d < 1:
        raise FormatError(f"{path}: header must be x1,...,xd,y, got {','.join(header)}")
    col = data[:, -1]
    if m is None:
        m = int(col.max())
    return DatasetSplit(data[:, :-1], _labels_from(col, m, path), tag, m)


def write_csv(path, split: DatasetSplit) -> None:
    buf = io.StringIO()
    buf.write(",".join([f"x{j}" for j in range(1, split.d + 1)] + ["y"]) + "\n")
    for x, y in zip(split.features, split.labels):
        buf.write(",".join([format(v, ".17g") for v in x] + [str(int(y) + 1)]) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")

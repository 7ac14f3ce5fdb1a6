"""Dataset loading (CSV, IDX) and synthetic generators."""

from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import EmptyDataset, NonNumericCell, ParseError


@dataclass
class Dataset:
    data: np.ndarray
    names: list
    labels: np.ndarray | None = None
    image_shape: tuple | None = None
    params: dict = field(default_factory=dict)
    tangents: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def to_csv(self, path, label_name="label"):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            header = list(self.names) + ([label_name] if self.labels is not None else [])
            w.writerow(header)
            for i, row in enumerate(self.data):
                cells = [repr(float(x)) for x in row]
                if self.labels is not None:
                    cells.append(str(self.labels[i]))
                w.writerow(cells)


def load_csv(path, label_column=None):
    """CSV with a header row of dimension names; ``label_column`` names a non-numeric column."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise EmptyDataset(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise EmptyDataset(f"{path} has a header but no data rows")
    if label_column is not None and label_column not in header:
        raise ParseError(f"label column {label_column!r} not in header {header}")
    label_idx = header.index(label_column) if label_column is not None else None
    names = [h for k, h in enumerate(header) if k != label_idx]
    data, labels = [], []
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}", row=r)
        values = []
        for c, (name, cell) in enumerate(zip(header, row)):
            if c == label_idx:
                labels.append(cell.strip())
                continue
            text = cell.strip()
            if not text:
                raise ParseError(f"{path}: missing value at row {r}, column {name!r}", row=r, column=name)
            try:
                x = float(text)
            except ValueError:
                raise NonNumericCell(
                    f"{path}: non-numeric value {text!r} at row {r}, column {name!r}", row=r, column=name
                ) from None
            if not math.isfinite(x):
                raise NonNumericCell(f"{path}: non-finite value at row {r}, column {name!r}", row=r, column=name)
            values.append(x)
        data.append(values)
    return Dataset(np.array(data, dtype=float), names, np.array(labels) if label_idx is not None else None)


_IDX_TYPES = {
    0x08: (">u1", 1),
    0x09: (">i1", 1),
    0x0B: (">i2", 2),
    0x0C: (">i4", 4),
    0x0D: (">f4", 4),
    0x0E: (">f8", 8),
}


def load_idx(path, labels_path=None):
    """IDX image file (optionally gzipped); pixels scaled to [0, 1]."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise ParseError(f"{path}: truncated IDX header", row=0)
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype_code not in _IDX_TYPES:
        raise ParseError(f"{path}: bad IDX magic number at offset 0")
    dt, size = _IDX_TYPES[dtype_code]
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise ParseError(f"{path}: truncated IDX dimensions at offset 4")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header_end])
    count = int(np.prod(dims)) if dims else 0
    if count == 0 or dims[0] == 0:
        raise EmptyDataset(f"{path} holds no items")
    if len(raw) != header_end + count * size:
        raise ParseError(
            f"{path}: expected {count * size} data bytes after offset {header_end}, found {len(raw) - header_end}"
        )
    arr = np.frombuffer(raw, dtype=dt, count=count, offset=header_end).astype(float).reshape(dims)
    if dtype_code == 0x08:
        arr = arr / 255.0
    image_shape = tuple(dims[1:]) if ndim > 1 else None
    data = arr.reshape(dims[0], -1)
    names = [f"px{k}" for k in range(data.shape[1])]
    labels = None
    if labels_path is not None:
        lab = load_idx(labels_path)
        labels = (lab.data[:, 0] * 255).round().astype(int) if lab.data.shape[1] == 1 else None
    return Dataset(data, names, labels, image_shape)


def load_dataset(path, format="csv", label_column=None, labels_path=None) -> Dataset:
    if format == "csv":
        return load_csv(path, label_column)
    if format in ("idx", "idx-images"):
        return load_idx(path, labels_path)
    raise ValueError(f"unknown dataset format {format!r}")


# ---------------------------------------------------------------- synthetic


def iris():
    """Fisher's iris measurements (150 x 4) with species labels."""
    from sklearn.datasets import load_iris

    raw = load_iris()
    names = ["sepal length", "sepal width", "petal length", "petal width"]
    return Dataset(np.asarray(raw.data, dtype=float), names, np.asarray(raw.target_names)[raw.target])


def _param_labels(t, bins=5):
    edges = np.quantile(t, np.linspace(0, 1, bins + 1)[1:-1])
    return np.digitize(t, edges)


def s_curve(n=400, seed=0, noise=0.0):
    """S-shaped 2-manifold in 3-D; ``params['t']`` is the curve parameter."""
    rng = np.random.default_rng(seed)
    t = 3.0 * math.pi * (rng.random(n) - 0.5)
    h = 2.0 * rng.random(n)
    X = np.stack([np.sin(t), h, np.sign(t) * (np.cos(t) - 1.0)], axis=1)
    X += noise * rng.standard_normal(X.shape)
    tangent = np.stack([np.cos(t), np.zeros(n), -np.sign(t) * np.sin(t)], axis=1)
    return Dataset(X, ["x", "y", "z"], _param_labels(t), params={"t": t, "height": h}, tangents={"t": tangent})


def swiss_roll(n=400, seed=0):
    """``x = u cos u, y = u sin u, z = v`` for ``3pi/2 <= u <= 9pi/2``, ``0 <= v <= 15``."""
    rng = np.random.default_rng(seed)
    u = 1.5 * math.pi + 3.0 * math.pi * rng.random(n)
    v = 15.0 * rng.random(n)
    X = np.stack([u * np.cos(u), u * np.sin(u), v], axis=1)
    du = np.stack([np.cos(u) - u * np.sin(u), np.sin(u) + u * np.cos(u), np.zeros(n)], axis=1)
    du /= np.linalg.norm(du, axis=1, keepdims=True)
    dv = np.tile([0.0, 0.0, 1.0], (n, 1))
    return Dataset(X, ["x", "y", "z"], _param_labels(u), params={"u": u, "v": v}, tangents={"u": du, "v": dv})


def interlocked_rings(n=400, seed=0, noise=0.05):
    """Two unit circles linked like chain links, in the xy- and xz-planes."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = 2 * math.pi * rng.random(half)
    b = 2 * math.pi * rng.random(n - half)
    ring1 = np.stack([np.cos(a), np.sin(a), np.zeros(half)], axis=1)
    ring2 = np.stack([1.0 + np.cos(b), np.zeros(n - half), np.sin(b)], axis=1)
    X = np.vstack([ring1, ring2]) + noise * rng.standard_normal((n, 3))
    labels = np.array([0] * half + [1] * (n - half))
    return Dataset(X, ["x", "y", "z"], labels, params={"angle": np.concatenate([a, b])})


def gaussian_blobs(n=200, seed=0, centers=3, dim=4, spread=1.0, separation=10.0):
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((centers, dim)) * separation
    labels = np.arange(n) % centers
    X = means[labels] + spread * rng.standard_normal((n, dim))
    return Dataset(X, [f"x{j}" for j in range(dim)], labels)


GENERATORS = {
    "iris": lambda n=None, seed=0: iris(),
    "s-curve": s_curve,
    "swiss-roll": swiss_roll,
    "rings": interlocked_rings,
    "blobs": gaussian_blobs,
}


def generate(name, n=None, seed=0):
    key = name.replace("_", "-")
    if key not in GENERATORS:
        raise ValueError(f"unknown synthetic dataset {name!r}; choose from {sorted(GENERATORS)}")
    if n is None:
        return GENERATORS[key](seed=seed)
    return GENERATORS[key](n=n, seed=seed)

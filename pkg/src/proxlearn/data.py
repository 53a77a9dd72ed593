"""Dataset loaders, rescaling, train/test splits and the synthetic sinusoid."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str
    # per-feature affine map applied to the raw features: x_scaled = scale * x_raw + offset
    scale: np.ndarray | None = None
    offset: np.ndarray | None = None
    source: str | None = None
    checksum: str | None = None
    label_display: str = "pm1"
    n_classes: int | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y)
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"{self.X.shape[0]} rows but {self.y.shape[0]} labels")
        if not np.all(np.isfinite(self.X)):
            raise DataError(f"{self.name}: non-finite feature values")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_x(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.name, self.scale, self.offset,
                       self.source, self.checksum, self.label_display, self.n_classes)

    def raw_features(self) -> np.ndarray:
        """Invert the recorded affine rescaling."""
        if self.scale is None:
            return self.X.copy()
        return (self.X - self.offset) / self.scale

    def display_labels(self, labels=None):
        labels = self.y if labels is None else np.asarray(labels)
        if self.label_display == "01":
            return np.where(labels < 0, 0, 1)
        return labels

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "source": self.source,
            "sha256": self.checksum,
            "n_data": len(self),
            "n_x": self.n_x,
            "scale": None if self.scale is None else self.scale.tolist(),
            "offset": None if self.offset is None else self.offset.tolist(),
        }


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def minmax_affine(X, lo, hi):
    """Per-feature (scale, offset) sending each column's range onto [lo, hi].

    Constant columns map to the interval midpoint.
    """
    cmin, cmax = X.min(axis=0), X.max(axis=0)
    width = cmax - cmin
    safe = np.where(width > 0, width, 1.0)
    scale = np.where(width > 0, (hi - lo) / safe, 0.0)
    offset = np.where(width > 0, lo - cmin * scale, 0.5 * (lo + hi))
    return scale, offset


def _read_rows(path, sep=","):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([t.strip() for t in (line.split(sep) if sep else line.split())])
    return rows


def load_wdbc(path) -> Dataset:
    rows = _read_rows(path)
    labels, feats = [], []
    for k, r in enumerate(rows):
        if len(r) != 32:
            raise DataError(f"wdbc row {k}: expected 32 columns, got {len(r)}")
        if r[1] not in ("M", "B"):
            raise DataError(f"wdbc row {k}: unknown diagnosis {r[1]!r}")
        labels.append(1 if r[1] == "M" else -1)
        try:
            feats.append([float(v) for v in r[2:]])
        except ValueError as exc:
            raise DataError(f"wdbc row {k}: {exc}") from exc
    X = np.array(feats).reshape(-1, 30)
    scale, offset = minmax_affine(X, -1.0, 1.0)
    return Dataset(X * scale + offset, np.array(labels), "wdbc", scale, offset,
                   str(path), file_checksum(path))


def load_semeion(path) -> Dataset:
    rows = _read_rows(path, sep=None)
    feats, labels = [], []
    for k, r in enumerate(rows):
        if len(r) != 266:
            raise DataError(f"semeion row {k}: expected 266 columns, got {len(r)}")
        vals = np.array([float(v) for v in r])
        onehot = vals[256:]
        if not np.all(np.isin(onehot, (0.0, 1.0))) or onehot.sum() != 1:
            raise DataError(f"semeion row {k}: label columns are not one-hot")
        feats.append(vals[:256])
        labels.append(int(np.argmax(onehot)))
    X = np.array(feats).reshape(-1, 256)
    if not np.all(np.isin(X, (0.0, 1.0))):
        raise DataError("semeion pixels must be 0/1")
    scale, offset = np.full(256, 2.0), np.full(256, -1.0)
    return Dataset(X * scale + offset, np.array(labels), "semeion", scale, offset,
                   str(path), file_checksum(path), n_classes=10)


@dataclass(frozen=True)
class TabularSchema:
    """Column layout and rescaling rule for a headerless CSV with the label last.

    ``scaling`` is ``("minmax", lo, hi)`` or ``("factor", c)``.
    """

    name: str
    n_features: int
    positive: tuple
    negative: tuple
    scaling: tuple
    expected_rows: int | None = None


SCHEMAS = {
    "banana": TabularSchema("banana", 2, ("1", "1.0", "+1"), ("-1", "-1.0"), ("minmax", 0.0, 8.0), 5300),
    "diabetes": TabularSchema("diabetes", 8, ("tested_positive", "1", "1.0"),
                              ("tested_negative", "0", "0.0"), ("minmax", 0.0, 1.0), 768),
    "twonorm": TabularSchema("twonorm", 20, ("1", "1.0"), ("0", "0.0"), ("factor", 8.0), 7400),
}


def load_tabular(path, schema) -> Dataset:
    if isinstance(schema, str):
        try:
            schema = SCHEMAS[schema]
        except KeyError as exc:
            raise ConfigError(f"unknown tabular schema {schema!r}") from exc
    rows = _read_rows(path)
    feats, labels = [], []
    for k, r in enumerate(rows):
        if len(r) != schema.n_features + 1:
            raise DataError(f"{schema.name} row {k}: expected {schema.n_features + 1} columns, got {len(r)}")
        lab = r[-1]
        if lab in schema.positive:
            labels.append(1)
        elif lab in schema.negative:
            labels.append(-1)
        else:
            raise DataError(f"{schema.name} row {k}: unknown label {lab!r}")
        try:
            feats.append([float(v) for v in r[:-1]])
        except ValueError as exc:
            raise DataError(f"{schema.name} row {k}: {exc}") from exc
    X = np.array(feats).reshape(-1, schema.n_features)
    kind = schema.scaling[0]
    if kind == "minmax":
        scale, offset = minmax_affine(X, schema.scaling[1], schema.scaling[2])
    elif kind == "factor":
        scale = np.full(schema.n_features, float(schema.scaling[1]))
        offset = np.zeros(schema.n_features)
    else:
        raise ConfigError(f"unknown scaling rule {kind!r}")
    return Dataset(X * scale + offset, np.array(labels), schema.name, scale, offset,
                   str(path), file_checksum(path), label_display="01")


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "fraction"
    train_frac: float = 0.7
    n_train: int | None = None
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.mode == "fraction":
            if not 0 < self.train_frac < 1:
                raise ConfigError("train_frac must lie in (0, 1)")
        elif self.mode == "head_count":
            if self.n_train is None or self.n_train < 1:
                raise ConfigError("head_count split needs n_train >= 1")
        else:
            raise ConfigError(f"unknown split mode {self.mode!r}")


def split_indices(n, spec: SplitSpec):
    if spec.mode == "fraction":
        n_train = int(np.floor(spec.train_frac * n))
    else:
        n_train = spec.n_train
    if not 0 < n_train < n:
        raise ConfigError(f"degenerate split: {n_train} of {n} points for training")
    order = np.random.default_rng(spec.seed).permutation(n) if spec.shuffle else np.arange(n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def split(ds: Dataset, spec: SplitSpec):
    train_idx, test_idx = split_indices(len(ds), spec)
    return ds.subset(train_idx), ds.subset(test_idx)


def gen_sinusoid(n_points=100, x_range=(-np.pi, np.pi), seed=0) -> Dataset:
    lo, hi = float(x_range[0]), float(x_range[1])
    if n_points < 2:
        raise ConfigError("sinusoid needs at least 2 points")
    if not hi > lo:
        raise ConfigError(f"empty sinusoid range [{lo}, {hi}]")
    x = np.random.default_rng(seed).uniform(lo, hi, n_points)
    return Dataset(x[:, None], np.sin(x), "sinusoid")


def dataset_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.X).tobytes())
    h.update(np.ascontiguousarray(ds.y, dtype=np.float64).tobytes())
    return h.hexdigest()

"""Tabular datasets with missing-value masks and per-feature acquisition costs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

COST_ROW_MARKER = "#costs"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``X`` (n, p), availability mask ``present``, labels and costs.

    ``X[i, j]`` is meaningless where ``present[i, j]`` is false; it is stored as 0.
    Arrays are read-only once constructed.
    """

    X: np.ndarray
    present: np.ndarray
    y: np.ndarray
    costs: np.ndarray
    feature_names: tuple[str, ...]
    class_count: int
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = _frozen(self.X, np.float64)
        present = _frozen(self.present, bool)
        if X.ndim != 2:
            raise ValidationError("X must be 2-D")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"need n >= 1 and p >= 1, got {X.shape}")
        if present.shape != X.shape:
            raise ValidationError("present mask shape does not match X")
        X = np.where(present, X, 0.0)
        X.setflags(write=False)
        y = _frozen(self.y, np.int64)
        costs = _frozen(self.costs, np.float64)
        n, p = X.shape
        if y.shape != (n,):
            raise ValidationError("y must have one label per row")
        if costs.shape != (p,):
            raise ValidationError("costs must have one entry per feature")
        if not np.all(costs > 0) or not np.all(np.isfinite(costs)):
            raise ValidationError("all feature costs must be positive and finite")
        if not np.all(np.isfinite(X)):
            raise ValidationError("feature values must be finite")
        K = int(self.class_count)
        if K < 2:
            raise ValidationError("need at least two classes")
        if y.min() < 0 or y.max() >= K:
            raise ValidationError(f"labels must lie in [0, {K})")
        names = tuple(self.feature_names) or tuple(f"f{j}" for j in range(p))
        if len(names) != p:
            raise ValidationError("feature_names length must equal p")
        class_names = tuple(self.class_names) or tuple(str(k) for k in range(K))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "present", present)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_count", K)
        object.__setattr__(self, "class_names", class_names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        """(p, K), the numbers of features and classes."""
        return self.p, self.class_count

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.present[rows], self.y[rows], self.costs,
                       self.feature_names, self.class_count, self.class_names)

    def with_costs(self, costs) -> "Dataset":
        return Dataset(self.X, self.present, self.y, costs,
                       self.feature_names, self.class_count, self.class_names)

    def with_values(self, X, present=None) -> "Dataset":
        return Dataset(X, self.present if present is None else present, self.y,
                       self.costs, self.feature_names, self.class_count, self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.class_count)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not (0.0 < f < 1.0) for f in fracs):
            raise ValidationError(f"split fractions must lie in (0, 1): {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1: {fracs}")


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray


def load_csv(path, label_column=None, cost_row=None) -> Dataset:
    """Read a CSV with a header row; empty cells are missing values.

    ``label_column`` defaults to the last column. An optional second row
    starting with ``#costs`` gives one cost per feature column, in header
    order with the label column skipped. ``cost_row=None`` auto-detects it,
    ``True`` requires it and ``False`` treats every row as data. Without a
    cost row every feature costs 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", line=1)
    header = [h.strip() for h in rows[0]]
    if label_column is None:
        label_idx = len(header) - 1
    else:
        if label_column not in header:
            raise ValidationError(f"label column {label_column!r} not in header")
        label_idx = header.index(label_column)
    feat_idx = [j for j in range(len(header)) if j != label_idx]
    if not feat_idx:
        raise ValidationError("no feature columns")

    start = 1
    costs = None
    has_cost_row = len(rows) > 1 and rows[1] and rows[1][0].strip() == COST_ROW_MARKER
    if cost_row is True and not has_cost_row:
        raise ParseError(f"expected a {COST_ROW_MARKER} row", line=2)
    if has_cost_row and cost_row is not False:
        cells = rows[1][1:]
        if len(cells) != len(feat_idx):
            raise ParseError(f"cost row has {len(cells)} entries, expected {len(feat_idx)}", line=2)
        try:
            costs = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"non-numeric cost: {exc}", line=2) from None
        start = 2

    X, present, raw_labels = [], [], []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", line=lineno)
        vals, mask = [], []
        for j in feat_idx:
            cell = row[j].strip()
            if cell == "":
                vals.append(0.0)
                mask.append(False)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r} in column {header[j]!r}",
                                 line=lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value in column {header[j]!r}", line=lineno)
            vals.append(v)
            mask.append(True)
        label = row[label_idx].strip()
        if label == "":
            raise ParseError("missing label", line=lineno)
        X.append(vals)
        present.append(mask)
        raw_labels.append(label)
    if not X:
        raise ValidationError("no data rows")

    class_names: list[str] = []
    index: dict[str, int] = {}
    y = []
    for lab in raw_labels:
        if lab not in index:
            index[lab] = len(class_names)
            class_names.append(lab)
        y.append(index[lab])
    if len(class_names) < 2:
        raise ValidationError("dataset has a single class")
    p = len(feat_idx)
    return Dataset(
        X=np.array(X, dtype=np.float64).reshape(len(X), p),
        present=np.array(present, dtype=bool).reshape(len(X), p),
        y=np.array(y),
        costs=np.ones(p) if costs is None else np.array(costs),
        feature_names=tuple(header[j] for j in feat_idx),
        class_count=len(class_names),
        class_names=tuple(class_names),
    )


def save_csv(ds: Dataset, path, label_column="label", include_costs=True):
    """Write ``ds`` in the format read by :func:`load_csv`."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.feature_names, label_column])
        if include_costs:
            w.writerow([COST_ROW_MARKER, *(repr(float(c)) for c in ds.costs)])
        for i in range(ds.n):
            cells = [repr(float(ds.X[i, j])) if ds.present[i, j] else "" for j in range(ds.p)]
            w.writerow([*cells, ds.class_names[ds.y[i]]])


def assign_random_costs(p: int, lo: float = 0.1, hi: float = 1.0, seed: int = 0) -> np.ndarray:
    if not (lo > 0):
        raise ValidationError("lo must be positive")
    if hi < lo:
        raise ValidationError("hi must be >= lo")
    rng = np.random.default_rng(seed)
    return np.clip(rng.uniform(lo, hi, size=int(p)), lo, hi)


def normalize(train: Dataset, others=()):
    """Z-score every feature with statistics from the present training cells.

    Population std; features whose std is below 1e-12 map to 0. Missing cells
    stay missing. Returns ``(train_n, [others_n...], NormStats)``.
    """
    p = train.p
    mean = np.zeros(p)
    std = np.zeros(p)
    for j in range(p):
        col = train.X[train.present[:, j], j]
        if col.size:
            mean[j] = col.mean()
            std[j] = col.std()
    stats = NormStats(mean=mean, std=std)
    return apply_normalization(train, stats), [apply_normalization(d, stats) for d in others], stats


def apply_normalization(ds: Dataset, stats: NormStats) -> Dataset:
    safe = np.where(stats.std < 1e-12, 1.0, stats.std)
    Z = (ds.X - stats.mean) / safe
    Z[:, stats.std < 1e-12] = 0.0
    return ds.with_values(np.where(ds.present, Z, 0.0))


def split_indices(n: int, spec: SplitSpec):
    n_val = int(math.floor(n * spec.val_frac + 1e-9))
    n_test = int(math.floor(n * spec.test_frac + 1e-9))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValidationError(f"n={n} too small for split {spec}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def split(ds: Dataset, spec: SplitSpec):
    tr, va, te = split_indices(ds.n, spec)
    return ds.take(tr), ds.take(va), ds.take(te)


def make_unbalanced(ds: Dataset, minority_label: int, target_ratio: float, seed: int = 0) -> Dataset:
    """Randomly drop minority rows until the minority proportion hits ``target_ratio``.

    Majority rows and survivor order are untouched.
    """
    if ds.class_count != 2:
        raise ValidationError("make_unbalanced needs a binary dataset")
    is_min = ds.y == minority_label
    m0 = int(is_min.sum())
    maj = ds.n - m0
    if maj == 0 or m0 == 0:
        raise ValidationError("both classes must be present")
    current = m0 / ds.n
    if not (0.0 < target_ratio < current):
        raise ValidationError(
            f"target_ratio must be in (0, {current:.6f}), got {target_ratio}")
    keep_m = int(round(target_ratio * maj / (1.0 - target_ratio)))
    keep_m = max(1, min(keep_m, m0))
    rng = np.random.default_rng(seed)
    drop = rng.choice(np.flatnonzero(is_min), size=m0 - keep_m, replace=False)
    mask = np.ones(ds.n, dtype=bool)
    mask[drop] = False
    return ds.take(np.flatnonzero(mask))


def mask_random_cells(ds: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """Mark ``round(fraction * #present)`` randomly chosen present cells as missing."""
    if not (0.0 <= fraction < 1.0):
        raise ValidationError("fraction must be in [0, 1)")
    rng = np.random.default_rng(seed)
    cells = np.flatnonzero(ds.present)
    drop = rng.choice(cells, size=int(round(fraction * cells.size)), replace=False)
    present = ds.present.copy()
    present.flat[drop] = False
    return ds.with_values(ds.X, present)

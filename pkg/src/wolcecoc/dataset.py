"""Labeled multiclass data: parsing, [0,1] scaling and stratified folds."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised when a data file cannot be turned into a valid Dataset."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ""
    original_labels: tuple = field(default=())

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=int)
        if X.ndim != 2:
            raise DatasetError("features must be a 2-D array")
        if y.shape != (X.shape[0],):
            raise DatasetError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        P = int(self.class_count)
        if y.size and (y.min() < 1 or y.max() > P):
            raise DatasetError(f"labels must lie in 1..{P}")
        counts = np.bincount(y, minlength=P + 1)[1:]
        if np.any(counts == 0):
            missing = [int(c) + 1 for c in np.flatnonzero(counts == 0)]
            raise DatasetError(f"classes with no examples: {missing}")
        if X.shape[0] < P:
            raise DatasetError("fewer examples than classes")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_count", P)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        """Rows `idx`, keeping the class numbering (every class must survive)."""
        return Dataset(self.features[idx], self.labels[idx], self.class_count,
                       self.name, self.original_labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count + 1)[1:]


def densify_labels(raw):
    """Map arbitrary labels to 1..P in ascending order of the original value."""
    raw = list(raw)
    try:
        keys = sorted(set(raw), key=float)
    except (TypeError, ValueError):
        keys = sorted(set(raw))
    index = {k: i + 1 for i, k in enumerate(keys)}
    return np.array([index[v] for v in raw], dtype=int), tuple(keys)


def _split(line: str, delimiter):
    if delimiter is None:
        if "," in line:
            delimiter = ","
        elif ";" in line:
            delimiter = ";"
    if delimiter is None or delimiter.isspace():
        return line.split()
    return [tok.strip() for tok in line.split(delimiter)]


def _parse_delimited(lines, delimiter, label_column):
    rows, raw_labels = [], []
    width = None
    for lineno, line in lines:
        toks = _split(line, delimiter)
        if width is None:
            width = len(toks)
            if width < 2:
                raise DatasetError(f"line {lineno}: need at least one feature and a label")
        elif len(toks) != width:
            raise DatasetError(f"line {lineno}: expected {width} fields, got {len(toks)}")
        col = label_column if label_column >= 0 else width + label_column
        if not 0 <= col < width:
            raise DatasetError(f"label column {label_column} out of range for {width} fields")
        raw_labels.append(toks[col])
        feats = toks[:col] + toks[col + 1:]
        row = []
        for j, tok in enumerate(feats):
            if tok in ("", "?", "NA", "nan", "NaN"):
                raise DatasetError(f"line {lineno}, column {j + 1}: missing value")
            try:
                row.append(float(tok))
            except ValueError:
                raise DatasetError(f"line {lineno}, column {j + 1}: cannot parse {tok!r}") from None
        rows.append(row)
    return rows, raw_labels


def _parse_sparse(lines):
    entries, raw_labels = [], []
    d = 0
    for lineno, line in lines:
        toks = line.split()
        raw_labels.append(toks[0])
        row = {}
        for j, tok in enumerate(toks[1:], start=2):
            m = re.fullmatch(r"(\d+):(\S+)", tok)
            if m is None:
                raise DatasetError(f"line {lineno}, field {j}: expected idx:val, got {tok!r}")
            idx = int(m.group(1))
            if idx < 1:
                raise DatasetError(f"line {lineno}, field {j}: indices are 1-based")
            try:
                row[idx] = float(m.group(2))
            except ValueError:
                raise DatasetError(f"line {lineno}, field {j}: cannot parse {m.group(2)!r}") from None
            d = max(d, idx)
        entries.append(row)
    rows = np.zeros((len(entries), d))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            rows[i, idx - 1] = val
    return rows, raw_labels


def load_dataset(path, format="delimited", delimiter=None, label_column=-1, name=None) -> Dataset:
    """Read a labeled data file.

    ``format`` is ``"delimited"`` (d numeric fields plus a label field, the
    label last unless ``label_column`` says otherwise) or ``"sparse-index"``
    (``label idx:val ...`` with 1-based indices). Blank lines and lines
    starting with ``#`` are skipped. Labels are densified to 1..P.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1)]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise DatasetError(f"{path}: no data rows")
    if format == "delimited":
        rows, raw = _parse_delimited(lines, delimiter, label_column)
    elif format == "sparse-index":
        rows, raw = _parse_sparse(lines)
    else:
        raise DatasetError(f"unknown format {format!r}")
    labels, originals = densify_labels(raw)
    return Dataset(np.asarray(rows, dtype=float), labels, len(originals),
                   name or path.stem, originals)


# -- bundled benchmark sets -------------------------------------------------

BUILTIN = ("iris", "wine", "glass", "thyroid")
DATA_DIR_ENV = "WOLCECOC_DATA_DIR"


def load_builtin(name: str) -> Dataset:
    """Load one of the UCI sets by name.

    Iris, Wine and Glass ship with the package. Thyroid (new-thyroid) is not
    redistributable from here; drop ``thyroid.csv`` (features then label) or
    the UCI ``new-thyroid.data`` (label first) into ``$WOLCECOC_DATA_DIR``.
    """
    name = name.lower()
    extra = os.environ.get(DATA_DIR_ENV)
    if extra:
        for fname, col in ((f"{name}.csv", -1), ("new-thyroid.data", 0)):
            if fname.endswith(".data") and name != "thyroid":
                continue
            p = Path(extra) / fname
            if p.exists():
                return load_dataset(p, label_column=col, name=name)
    pkg = resources.files("wolcecoc") / "data" / f"{name}.csv"
    if not pkg.is_file():
        raise DatasetError(
            f"dataset {name!r} not available; place it in ${DATA_DIR_ENV} "
            f"(known: {', '.join(BUILTIN)})")
    with resources.as_file(pkg) as p:
        return load_dataset(p, name=name)


def resolve_dataset(ref: str, format="delimited", label_column=-1) -> Dataset:
    """A builtin name or a file path."""
    if ref.lower() in BUILTIN and not Path(ref).exists():
        return load_builtin(ref)
    return load_dataset(ref, format=format, label_column=label_column)


# -- scaling ----------------------------------------------------------------

def unit_range_stats(X):
    X = np.asarray(X, dtype=float)
    return X.min(axis=0), X.max(axis=0)


def apply_unit_range(X, lo, hi, clip=False):
    """x' = (x - lo) / (hi - lo); dimensions with hi == lo map to 0."""
    X = np.asarray(X, dtype=float)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (X - lo) / safe, 0.0)
    if clip:
        out = np.clip(out, 0.0, 1.0)
    return out


def normalize_unit_range(ds: Dataset) -> Dataset:
    lo, hi = unit_range_stats(ds.features)
    X = apply_unit_range(ds.features, lo, hi)
    return Dataset(X, ds.labels, ds.class_count, ds.name, ds.original_labels)


def normalize_split(X_train, X_test, policy="fold-local"):
    """Scale a train/test feature pair.

    ``fold-local`` fits the per-dimension range on the training rows only and
    applies it to both (test values may fall slightly outside [0, 1]);
    ``global`` expects the caller to have normalized the full set already and
    returns the inputs unchanged.
    """
    if policy == "global":
        return np.asarray(X_train, dtype=float), np.asarray(X_test, dtype=float)
    if policy != "fold-local":
        raise ValueError(f"unknown normalization policy {policy!r}")
    lo, hi = unit_range_stats(X_train)
    return apply_unit_range(X_train, lo, hi), apply_unit_range(X_test, lo, hi)


# -- folds ------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    fold_count: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        a = np.array(self.assignments, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def test_indices(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == f)

    def train_indices(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != f)

    def splits(self):
        for f in range(self.fold_count):
            yield self.train_indices(f), self.test_indices(f)


def stratified_folds(ds: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    """Assign every example to one of ``k`` folds, stratified by class.

    Examples of each class are shuffled and laid out class after class; the
    j-th example in that layout goes to fold ``j mod k``. Each class
    therefore lands floor(n_c/k) or ceil(n_c/k) times in every fold.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > ds.n:
        raise ValueError(f"{k} folds for {ds.n} examples")
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    order = []
    for c in range(1, ds.class_count + 1):
        idx = np.flatnonzero(ds.labels == c)
        order.append(rng.permutation(idx))
    order = np.concatenate(order)
    assignments = np.empty(ds.n, dtype=np.int64)
    assignments[order] = np.arange(ds.n) % k
    return FoldPlan(k, assignments, seed)

"""Ternary ECOC coding matrices over {-1, 0, +1}."""

from __future__ import annotations

from itertools import combinations
from pathlib import Path

import numpy as np


class CodingError(ValueError):
    pass


class CodingMatrix:
    """Immutable P x Q ternary matrix; row p is the codeword of class p+1.

    Construction does not validate; call :func:`validate` (or
    :meth:`check`) when the invariants matter.
    """

    __slots__ = ("_m",)

    def __init__(self, entries):
        m = np.array(entries, dtype=np.int8)
        if m.ndim == 1:
            m = m.reshape(-1, 1) if m.size else m.reshape(0, 0)
        if m.ndim != 2:
            raise CodingError("coding matrix must be 2-D")
        if not np.isin(m, (-1, 0, 1)).all():
            raise CodingError("entries must be in {-1, 0, 1}")
        m.setflags(write=False)
        self._m = m

    @classmethod
    def empty(cls, P: int) -> "CodingMatrix":
        return cls(np.zeros((P, 0), dtype=np.int8))

    @property
    def entries(self) -> np.ndarray:
        return self._m

    @property
    def P(self) -> int:
        return self._m.shape[0]

    @property
    def Q(self) -> int:
        return self._m.shape[1]

    def column(self, q: int) -> np.ndarray:
        return self._m[:, q]

    def has_column(self, col, up_to_sign=True) -> bool:
        """True if ``col`` (or, by default, ``-col``) is already a column."""
        col = np.asarray(col, dtype=np.int8).reshape(-1, 1)
        if self.Q == 0:
            return False
        same = (self._m == col).all(axis=0)
        if up_to_sign:
            same |= (self._m == -col).all(axis=0)
        return bool(same.any())

    def check(self) -> "CodingMatrix":
        report = validate(self)
        if report:
            raise CodingError("; ".join(report))
        return self

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, CodingMatrix) and np.array_equal(self._m, other._m)

    def __hash__(self):
        return hash((self._m.shape, self._m.tobytes()))

    def __repr__(self):
        return f"CodingMatrix(P={self.P}, Q={self.Q})"


def _need_classes(P):
    if P < 2:
        raise CodingError(f"need at least 2 classes, got {P}")


def make_one_vs_all(P: int) -> CodingMatrix:
    _need_classes(P)
    return CodingMatrix(2 * np.eye(P, dtype=np.int8) - 1)


def make_one_vs_one(P: int) -> CodingMatrix:
    """One column per class pair (i, j), i < j, in lexicographic order."""
    _need_classes(P)
    pairs = list(combinations(range(P), 2))
    m = np.zeros((P, len(pairs)), dtype=np.int8)
    for q, (i, j) in enumerate(pairs):
        m[i, q] = 1
        m[j, q] = -1
    return CodingMatrix(m)


def make_random_ternary(P: int, Q: int, zero_prob: float = 0.5, seed: int = 0,
                        allow_duplicate_columns: bool = False,
                        max_draws: int | None = None) -> CodingMatrix:
    """Sparse random code with i.i.d. entries, rejection-resampled.

    Each column has P(0) = ``zero_prob`` and +1/-1 equiprobable otherwise. A
    drawn column is kept only if it has both signs and (unless
    ``allow_duplicate_columns``) duplicates no kept column up to sign. With
    few classes there are fewer distinct bipartitions than Q (P=3 has 6), so
    fixed-length random codes need ``allow_duplicate_columns=True``. After Q
    columns are kept, the whole matrix must have distinct rows and no
    all-zero row, or we start over. Column draws are capped at 100*Q.
    """
    _need_classes(P)
    if Q < 1:
        raise CodingError("code length must be positive")
    if not 0.0 <= zero_prob < 1.0:
        raise CodingError("zero_prob must be in [0, 1)")
    budget = 100 * Q if max_draws is None else max_draws
    rng = np.random.default_rng(seed)
    draws = 0
    cols: list[np.ndarray] = []
    while draws < budget:
        draws += 1
        nz = rng.random(P) >= zero_prob
        sign = np.where(rng.random(P) < 0.5, 1, -1)
        col = (nz * sign).astype(np.int8)
        if not ((col == 1).any() and (col == -1).any()):
            continue
        if not allow_duplicate_columns and any(
                np.array_equal(col, c) or np.array_equal(col, -c) for c in cols):
            continue
        cols.append(col)
        if len(cols) == Q:
            M = CodingMatrix(np.stack(cols, axis=1))
            if not validate(M):
                return M
            cols = []
    raise CodingError(f"no valid {P}x{Q} ternary code within {budget} column draws")


def validate(M) -> list[str]:
    """List every violated coding-matrix invariant (1-based indices).

    Empty list means the matrix is valid: rows pairwise distinct, no all-zero
    row, and every column holds at least one +1 and one -1.
    """
    m = np.asarray(M)
    report = []
    P, Q = m.shape
    for i, j in combinations(range(P), 2):
        if np.array_equal(m[i], m[j]):
            report.append(f"rows ({i + 1},{j + 1}) are identical")
    for p in range(P):
        if Q and not m[p].any():
            report.append(f"row {p + 1} is all zero")
    for q in range(Q):
        col = m[:, q]
        if not (col == 1).any() or not (col == -1).any():
            report.append(f"column {q + 1} lacks a +1 or a -1")
    if Q == 0:
        report.append("matrix has no columns")
    return report


def check_column(col) -> np.ndarray:
    col = np.asarray(col, dtype=np.int8)
    if col.ndim != 1 or not np.isin(col, (-1, 0, 1)).all():
        raise CodingError("column must be a ternary vector")
    if not ((col == 1).any() and (col == -1).any()):
        raise CodingError("column needs at least one +1 and one -1")
    return col


def append_column(M: CodingMatrix, col) -> CodingMatrix:
    """New matrix with ``col`` appended; duplicates of existing columns allowed."""
    col = check_column(col)
    if col.shape[0] != M.P:
        raise CodingError(f"column has {col.shape[0]} entries, matrix has {M.P} rows")
    return CodingMatrix(np.column_stack([M.entries, col]))


def pair_column(i: int, j: int, P: int) -> np.ndarray:
    """Column separating classes i and j (1-based): +1 on the smaller index."""
    if i == j:
        raise CodingError("a pair needs two different classes")
    if not (1 <= i <= P and 1 <= j <= P):
        raise CodingError(f"classes must lie in 1..{P}")
    col = np.zeros(P, dtype=np.int8)
    col[min(i, j) - 1] = 1
    col[max(i, j) - 1] = -1
    return col


# -- text format: "P Q" then P rows of Q entries --------------------------

def dumps(M: CodingMatrix) -> str:
    lines = [f"{M.P} {M.Q}"]
    lines += [" ".join(str(int(v)) for v in row) for row in M.entries]
    return "\n".join(lines) + "\n"


def loads(text: str) -> CodingMatrix:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise CodingError("first line must be 'P Q'")
    P, Q = (int(t) for t in rows[0])
    body = rows[1:]
    if len(body) != P or any(len(r) != Q for r in body):
        raise CodingError(f"expected {P} rows of {Q} entries")
    return CodingMatrix([[int(t) for t in r] for r in body])


def save(M: CodingMatrix, path) -> None:
    Path(path).write_text(dumps(M), encoding="utf-8")


def load(path) -> CodingMatrix:
    return loads(Path(path).read_text(encoding="utf-8"))

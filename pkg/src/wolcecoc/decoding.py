"""Decoding rules, weight matrices and class-pair risk matrices.

All decoders take a batch of test codewords ``X`` (n x Q, entries in
[-1, 1]) and a coding matrix, and return 1-based class labels. Every argmin
breaks ties toward the smallest class index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEASIBILITY_TOL = 1e-9


class DecodingError(ValueError):
    pass


def loss(theta, kind="linear"):
    theta = np.asarray(theta, dtype=float)
    if kind == "linear":
        return -theta
    if kind == "exponential":
        return np.exp(-theta)
    raise DecodingError(f"unknown loss {kind!r}")


def _codewords(X, M):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = np.asarray(M, dtype=float)
    if X.shape[1] != m.shape[1]:
        raise DecodingError(f"codewords have length {X.shape[1]}, code has {m.shape[1]} columns")
    return X, m


def _argmin_label(scores):
    return np.argmin(scores, axis=1) + 1


def per_class_losses(X, M, kind="linear"):
    """u[i, p, q] = loss(x_iq * m_pq), unnormalized."""
    X, m = _codewords(X, M)
    return loss(X[:, None, :] * m[None, :, :], kind)


# -- weight matrices -----------------------------------------------------------

def weight_problems(W, M, tol=FEASIBILITY_TOL) -> list[str]:
    """Reasons ``W`` is outside the feasible set for ``M`` (empty if feasible)."""
    W = np.asarray(W, dtype=float)
    m = np.asarray(M)
    out = []
    if W.shape != m.shape:
        return [f"weight matrix shape {W.shape} != coding shape {m.shape}"]
    if not np.isfinite(W).all():
        out.append("non-finite weights")
    bad = np.argwhere((m == 0) & (W != 0))
    if bad.size:
        out.append(f"nonzero weight on zero code entries {[(int(p) + 1, int(q) + 1) for p, q in bad[:5]]}")
    if (W < -tol).any() or (W > 1 + tol).any():
        out.append("weights outside [0, 1]")
    sums = W.sum(axis=1)
    rows = np.flatnonzero(np.abs(sums - 1) > tol)
    if rows.size:
        out.append(f"rows {[int(r) + 1 for r in rows]} do not sum to 1")
    return out


def check_weights(W, M):
    problems = weight_problems(W, M)
    if problems:
        raise DecodingError("infeasible weight matrix: " + "; ".join(problems))
    return np.asarray(W, dtype=float)


def uniform_weights(M) -> np.ndarray:
    nz = (np.asarray(M) != 0).astype(float)
    return nz / nz.sum(axis=1, keepdims=True)


def empirical_weights(M, accuracies) -> np.ndarray:
    """Loss-weighted decoding weights from training accuracies.

    ``accuracies`` is either P x Q (accuracy of dichotomizer q on class p's
    examples) or a length-Q vector shared by all classes. Rows whose
    accuracies are all zero fall back to uniform weights.
    """
    m = np.asarray(M)
    acc = np.asarray(accuracies, dtype=float)
    if acc.ndim == 1:
        acc = np.broadcast_to(acc, m.shape)
    if acc.shape != m.shape:
        raise DecodingError("accuracy matrix shape does not match the code")
    if (acc < 0).any() or (acc > 1).any():
        raise DecodingError("accuracies must lie in [0, 1]")
    H = np.where(m != 0, acc, 0.0)
    sums = H.sum(axis=1, keepdims=True)
    U = uniform_weights(m)
    return np.where(sums > 0, H / np.where(sums > 0, sums, 1.0), U)


def class_accuracies(outputs, labels, M) -> np.ndarray:
    """P x Q fraction of class-p examples on the correct side of column q.

    A zero output counts as +1. Entries where m_pq = 0 are 0.
    """
    X, m = _codewords(outputs, M)
    labels = np.asarray(labels)
    P, Q = m.shape
    hard = np.where(X >= 0, 1.0, -1.0)
    acc = np.zeros((P, Q))
    for p in range(P):
        rows = hard[labels == p + 1]
        if rows.shape[0]:
            acc[p] = (rows * m[p] > 0).mean(axis=0)
    return np.where(m != 0, acc, 0.0)


# -- decoders ---------------------------------------------------------------------

def hd_scores(X, M):
    """Generalized Hamming distance; zero code entries (or zero outputs) cost 1/2."""
    X, m = _codewords(X, M)
    return ((1.0 - np.sign(X)[:, None, :] * m[None, :, :]) / 2.0).sum(axis=2)


def hd_decode(X, M):
    return _argmin_label(hd_scores(X, M))


def lb_scores(X, M, kind="linear"):
    return per_class_losses(X, M, kind).sum(axis=2)


def lb_decode(X, M, kind="linear"):
    return _argmin_label(lb_scores(X, M, kind))


def lw_scores(X, M, W, kind="linear"):
    W = check_weights(W, M)
    return (per_class_losses(X, M, kind) * W[None]).sum(axis=2)


def lw_decode(X, M, W, kind="linear"):
    return _argmin_label(lw_scores(X, M, W, kind))


def ow_decode(X, M, W_opt, kind="linear"):
    """Same rule as :func:`lw_decode`, used with an optimized weight matrix."""
    return lw_decode(X, M, W_opt, kind)


# -- loss tensors -------------------------------------------------------------------

@dataclass(frozen=True)
class LossTensor:
    """Normalized per-example, per-class loss vectors.

    ``u[i, p, q]`` is loss(x_iq m_pq) / u_star with u_star the largest
    absolute raw entry (1 when every entry is zero).
    """

    u: np.ndarray
    loss_kind: str
    u_star: float

    @property
    def shape(self):
        return self.u.shape

    def class_scores(self, W) -> np.ndarray:
        """s[i, p] = w_p . u_ip."""
        return np.einsum("ipq,pq->ip", self.u, np.asarray(W, dtype=float))

    def to_text(self, labels=None) -> str:
        """Delimited export: one row per (i, p) with 9 significant digits."""
        n, P, Q = self.u.shape
        head = ["example", "class"] + ([] if labels is None else ["label"]) + \
            [f"q{q + 1}" for q in range(Q)]
        lines = [f"# loss={self.loss_kind} u_star={self.u_star:.9g}", ",".join(head)]
        for i in range(n):
            for p in range(P):
                cells = [str(i + 1), str(p + 1)]
                if labels is not None:
                    cells.append(str(int(labels[i])))
                cells += [f"{v:.9g}" for v in self.u[i, p]]
                lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def build_loss_tensor(X, labels, M, kind="linear") -> LossTensor:
    X, m = _codewords(X, M)
    if labels is not None and len(labels) != X.shape[0]:
        raise DecodingError("labels and codewords differ in length")
    u = per_class_losses(X, m, kind)
    u_star = float(np.abs(u).max()) if u.size else 0.0
    if u_star > 0:
        u = u / u_star
    else:
        u_star = 1.0
    u.setflags(write=False)
    return LossTensor(u, kind, u_star)


# -- pair risk matrices --------------------------------------------------------------

@dataclass(frozen=True)
class PairRiskMatrix:
    eps: np.ndarray
    kind: str

    def to_text(self) -> str:
        P = self.eps.shape[0]
        lines = [f"# kind={self.kind}", ",".join(["class"] + [str(j + 1) for j in range(P)])]
        for i in range(P):
            lines.append(",".join([str(i + 1)] + [f"{v:.9g}" for v in self.eps[i]]))
        return "\n".join(lines) + "\n"


def pair_risk_matrix(tensor: LossTensor, labels, W, kind="training-risk") -> PairRiskMatrix:
    """Confusion counts or weighted-loss misclassification mass between classes.

    ``training-risk``: eps[i, j] sums, over class-i examples that class j
    strictly beats every other class on, the score gap s_i - s_j.
    ``confusion``: eps[i, j] counts class-i examples decoded as j.
    """
    labels = np.asarray(labels, dtype=int)
    S = tensor.class_scores(W)
    n, P = S.shape
    eps = np.zeros((P, P))
    rows = np.arange(n)
    if kind == "confusion":
        pred = np.argmin(S, axis=1)
        np.add.at(eps, (labels - 1, pred), 1.0)
    elif kind == "training-risk":
        for j in range(P):
            others = np.delete(S, j, axis=1).min(axis=1)
            hit = others - S[:, j] > 0
            gap = S[rows, labels - 1] - S[:, j]
            np.add.at(eps[:, j], labels[hit] - 1, gap[hit])
    else:
        raise DecodingError(f"unknown risk kind {kind!r}")
    np.fill_diagonal(eps, 0.0)
    return PairRiskMatrix(eps, kind)


def top_confusing_pairs(eps, s: int = 1):
    """Up to ``s`` class pairs (i < j, 1-based) with the largest eps_ij + eps_ji.

    Zero-risk pairs are dropped; ties go to the lexicographically smaller pair.
    """
    if s < 1:
        raise ValueError("s must be positive")
    E = eps.eps if isinstance(eps, PairRiskMatrix) else np.asarray(eps, dtype=float)
    P = E.shape[0]
    pairs = []
    for i in range(P):
        for j in range(i + 1, P):
            r = float(E[i, j] + E[j, i])
            if r > 0:
                pairs.append(((i + 1, j + 1), r))
    pairs.sort(key=lambda pr: (-pr[1], pr[0]))
    return pairs[:s]


def save_text(obj, path, **kw) -> None:
    Path(path).write_text(obj.to_text(**kw), encoding="utf-8")

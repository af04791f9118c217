"""Binary base learners for ECOC columns.

Two kinds of dichotomizer are used: discrete AdaBoost over decision stumps
(the "simple" learner) and a clustering dichotomizer that splits the input
space with k-means and boosts stumps inside each mixed region. Both expose
``margin(X)`` returning values in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import check_column

#: alpha for a round with zero weighted error: 0.5*ln((1-1e-10)/1e-10)
EPS_FLOOR = 1e-10
ALPHA_CAP = 0.5 * np.log((1.0 - EPS_FLOOR) / EPS_FLOOR)


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class BinaryProblem:
    features: np.ndarray
    targets: np.ndarray
    source: np.ndarray = field(default=None)
    rows: np.ndarray = field(default=None)

    @property
    def m(self) -> int:
        return self.features.shape[0]


def induce_binary_problem(ds, col) -> BinaryProblem:
    """Relabel ``ds`` by coding column ``col``; classes coded 0 are dropped."""
    col = check_column(col)
    if col.shape[0] != ds.class_count:
        raise LearnerError(f"column has {col.shape[0]} entries for {ds.class_count} classes")
    code = col[ds.labels - 1].astype(int)
    keep = np.flatnonzero(code != 0)
    t = code[keep]
    if not (t == 1).any() or not (t == -1).any():
        raise LearnerError(f"column {col.tolist()} induces a problem with a single sign")
    return BinaryProblem(ds.features[keep], t, col.copy(), keep)


# -- AdaBoost with decision stumps -------------------------------------------

@dataclass(frozen=True)
class StumpEnsemble:
    """h_t(x) = polarity_t * (+1 if x[feature_t] > threshold_t else -1)."""

    feature: np.ndarray
    threshold: np.ndarray
    polarity: np.ndarray
    alpha: np.ndarray
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kind = "simple"

    @property
    def rounds(self) -> int:
        return int(self.alpha.shape[0])

    def raw(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.rounds == 0:
            return np.zeros(X.shape[0])
        h = np.where(X[:, self.feature] > self.threshold, 1.0, -1.0) * self.polarity
        return h @ self.alpha

    def margin(self, X) -> np.ndarray:
        """Normalized vote sum(alpha h) / sum|alpha|, in [-1, 1]; 0 if empty."""
        total = np.abs(self.alpha).sum()
        if total == 0:
            return np.zeros(np.atleast_2d(X).shape[0])
        return np.clip(self.raw(X) / total, -1.0, 1.0)

    def predict(self, X) -> np.ndarray:
        return np.where(self.margin(X) >= 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "kind": "simple",
            "feature": self.feature.tolist(),
            "threshold": [None if np.isneginf(t) else float(t) for t in self.threshold],
            "polarity": self.polarity.astype(int).tolist(),
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "StumpEnsemble":
        thr = np.array([-np.inf if t is None else t for t in d["threshold"]], dtype=float)
        return cls(np.array(d["feature"], dtype=np.int64), thr,
                   np.array(d["polarity"], dtype=float), np.array(d["alpha"], dtype=float))


def stump_errors(X, y, w, order=None):
    """Weighted error of every candidate stump.

    Candidates per feature are -inf plus the midpoints between consecutive
    distinct sorted values, each with polarity +1 and -1. Returns
    ``(err, thresholds)`` where ``err`` has shape (d, m, 2) (invalid slots are
    +inf) and ``thresholds`` has shape (d, m); slot k means "the k smallest
    values fall on the negative side".
    """
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    if order is None:
        order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ws = w[order]
    ys = y[order]
    wpos = np.where(ys > 0, ws, 0.0)
    wneg = ws - wpos
    cpos = np.vstack([np.zeros(d), np.cumsum(wpos, axis=0)])[:m]
    cneg = np.vstack([np.zeros(d), np.cumsum(wneg, axis=0)])[:m]
    tot_pos, tot_neg = wpos.sum(axis=0), wneg.sum(axis=0)
    # polarity +1: predict -1 on the first k sorted values
    e_plus = cpos + (tot_neg - cneg)
    e_minus = cneg + (tot_pos - cpos)
    valid = np.ones((m, d), dtype=bool)
    valid[1:] = xs[1:] > xs[:-1]
    thr = np.full((m, d), -np.inf)
    thr[1:] = 0.5 * (xs[1:] + xs[:-1])
    err = np.stack([e_plus, e_minus], axis=-1)
    err[~valid] = np.inf
    return err.transpose(1, 0, 2), thr.T


def best_stump(X, y, w, order=None):
    """(feature, threshold, polarity, error) minimizing the weighted error.

    Ties go to the lowest feature, then the lowest threshold, then +1.
    """
    err, thr = stump_errors(X, y, w, order)
    flat = int(np.argmin(err))
    f, k, s = np.unravel_index(flat, err.shape)
    return int(f), float(thr[f, k]), (1.0 if s == 0 else -1.0), float(err[f, k, s])


def train_adaboost(prob: BinaryProblem, rounds: int = 40) -> StumpEnsemble:
    """Discrete AdaBoost with exhaustive decision stumps.

    Stops early when a round reaches zero error (the stump is kept with a
    capped vote) or when the best stump is no better than chance.
    """
    X = np.asarray(prob.features, dtype=float)
    y = np.asarray(prob.targets, dtype=float)
    if rounds < 1:
        raise LearnerError("rounds must be positive")
    if not (y > 0).any() or not (y < 0).any():
        raise LearnerError("AdaBoost needs both signs")
    m = X.shape[0]
    order = np.argsort(X, axis=0, kind="stable")
    w = np.full(m, 1.0 / m)
    feats, thrs, pols, alphas, errs = [], [], [], [], []
    for _ in range(rounds):
        f, thr, pol, eps = best_stump(X, y, w, order)
        if eps >= 0.5:
            break
        perfect = eps <= EPS_FLOOR
        alpha = ALPHA_CAP if perfect else 0.5 * np.log((1.0 - eps) / eps)
        feats.append(f)
        thrs.append(thr)
        pols.append(pol)
        alphas.append(alpha)
        errs.append(eps)
        if perfect:
            break
        h = pol * np.where(X[:, f] > thr, 1.0, -1.0)
        w = w * np.exp(-alpha * y * h)
        w /= w.sum()
    return StumpEnsemble(np.array(feats, dtype=np.int64), np.array(thrs, dtype=float),
                         np.array(pols, dtype=float), np.array(alphas, dtype=float),
                         np.array(errs, dtype=float))


def predict_margin(e: StumpEnsemble, x) -> float:
    return float(e.margin(np.atleast_2d(x))[0])


# -- k-means ------------------------------------------------------------------

@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    objective: float
    history: tuple
    iterations: int


def _sqdist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from k distinct sampled points.

    Assignment ties go to the lowest cluster index. A cluster left empty is
    refilled with the point farthest from its own centroid. Runs until the
    assignment stops changing or ``max_iter`` updates.
    """
    X = np.asarray(points, dtype=float)
    m = X.shape[0]
    if k < 1:
        raise LearnerError("k must be positive")
    if m < k:
        raise LearnerError(f"{m} points for {k} clusters")
    _, first = np.unique(X, axis=0, return_index=True)
    first = np.sort(first)
    if first.size < k:
        raise LearnerError(f"only {first.size} distinct points for {k} clusters")
    rng = np.random.default_rng(seed)
    C = X[np.sort(rng.choice(first, size=k, replace=False))].copy()
    prev = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        D = _sqdist(X, C)
        a = np.argmin(D, axis=1)
        own = D[np.arange(m), a]
        for c in range(k):
            if (a == c).any():
                continue
            sizes = np.bincount(a, minlength=k)
            movable = np.flatnonzero(sizes[a] > 1)
            j = movable[np.argmax(own[movable])]
            a[j] = c
            own[j] = 0.0
            C[c] = X[j]
        history.append(float(own.sum()))
        if prev is not None and np.array_equal(a, prev):
            break
        for c in range(k):
            C[c] = X[a == c].mean(axis=0)
        history.append(float(((X - C[a]) ** 2).sum()))
        prev = a
    obj = float(((X - C[a]) ** 2).sum())
    return KMeansResult(C, a, obj, tuple(history), it)


# -- layered clustering dichotomizer --------------------------------------------

@dataclass(frozen=True)
class Region:
    centroid: np.ndarray
    payload: object  # StumpEnsemble, or +1/-1 for a single-sign region


@dataclass(frozen=True)
class ClusteringDichotomizer:
    regions: tuple
    kind = "layered"

    @property
    def centroids(self) -> np.ndarray:
        return np.stack([r.centroid for r in self.regions])

    def host_regions(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.argmin(_sqdist(X, self.centroids), axis=1)

    def margin(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        host = self.host_regions(X)
        out = np.zeros(X.shape[0])
        for r, region in enumerate(self.regions):
            sel = host == r
            if not sel.any():
                continue
            if isinstance(region.payload, StumpEnsemble):
                out[sel] = region.payload.margin(X[sel])
            else:
                out[sel] = float(region.payload)
        return out

    def predict(self, X) -> np.ndarray:
        return np.where(self.margin(X) >= 0, 1, -1)

    def to_dict(self) -> dict:
        regions = []
        for r in self.regions:
            payload = r.payload.to_dict() if isinstance(r.payload, StumpEnsemble) \
                else {"kind": "sign", "sign": int(r.payload)}
            regions.append({"centroid": r.centroid.tolist(), "payload": payload})
        return {"kind": "layered", "regions": regions}

    @classmethod
    def from_dict(cls, d) -> "ClusteringDichotomizer":
        regions = []
        for r in d["regions"]:
            p = r["payload"]
            payload = StumpEnsemble.from_dict(p) if p["kind"] == "simple" else int(p["sign"])
            regions.append(Region(np.array(r["centroid"], dtype=float), payload))
        return cls(tuple(regions))


def train_layered_dichotomizer(prob: BinaryProblem, n_regions: int = 2, rounds: int = 40,
                               seed: int = 0) -> ClusteringDichotomizer:
    """Split the pair's examples with k-means (targets ignored), then learn per region.

    A region holding both signs gets its own boosted stumps; a single-sign
    region just remembers that sign.
    """
    X = np.asarray(prob.features, dtype=float)
    y = np.asarray(prob.targets)
    if n_regions < 2:
        raise LearnerError("need at least 2 regions")
    if not (y > 0).any() or not (y < 0).any():
        raise LearnerError("layered dichotomizer needs both signs")
    if X.shape[0] < n_regions:
        raise LearnerError(f"{X.shape[0]} examples for {n_regions} regions")
    km = kmeans(X, n_regions, seed=seed)
    regions = []
    for r in range(n_regions):
        sel = km.assignments == r
        yr = y[sel]
        if (yr > 0).any() and (yr < 0).any():
            payload = train_adaboost(BinaryProblem(X[sel], yr), rounds)
        else:
            payload = 1 if yr[0] > 0 else -1
        regions.append(Region(km.centroids[r].copy(), payload))
    return ClusteringDichotomizer(tuple(regions))


def predict_layered(c: ClusteringDichotomizer, x) -> float:
    return float(c.margin(np.atleast_2d(x))[0])


def dichotomizer_from_dict(d):
    if d["kind"] == "simple":
        return StumpEnsemble.from_dict(d)
    if d["kind"] == "layered":
        return ClusteringDichotomizer.from_dict(d)
    raise LearnerError(f"unknown dichotomizer kind {d['kind']!r}")

"""Growing an ECOC ensemble with optimized decoding weights.

Each round optimizes the decoding weights on the training codewords, finds
the class pairs carrying the most weighted training risk and adds one
dichotomizer per pair. A pair whose column is already in the code gets a
clustering-based dichotomizer instead of another plain boosted one, so the
new column still brings something different. Rounds stop once the optimal
risk has stalled for ``Z`` consecutive rounds or after ``T`` rounds.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import coding, decoding
from .coding import CodingMatrix, make_one_vs_all
from .dataset import Dataset, apply_unit_range
from .learners import (LearnerError, dichotomizer_from_dict, induce_binary_problem,
                       train_adaboost, train_layered_dichotomizer)
from .owopt import solve_ow_cpa

MODEL_FORMAT = "wolcecoc-model"
MODEL_VERSION = 1
DECODERS = ("hd", "lb", "lw", "ow")


class WolcError(RuntimeError):
    pass


@dataclass(frozen=True)
class WolcConfig:
    s: int = 3
    Z: int = 3
    eta: float = 0.01
    T: int | None = None  # None means 3 * P
    n_regions: int = 2
    boost_rounds: int = 40
    loss_kind: str = "linear"
    epsilon_cpa: float = 1e-4
    seed: int = 0
    hard_outputs: bool = False
    risk_kind: str = "training-risk"

    def __post_init__(self):
        if self.s < 1 or self.Z < 1 or self.boost_rounds < 1:
            raise WolcError("s, Z and boost_rounds must be positive")
        if not self.eta > 0:
            raise WolcError("eta must be positive")
        if self.T is not None and self.T < 1:
            raise WolcError("T must be positive")
        if self.n_regions < 2:
            raise WolcError("n_regions must be at least 2")
        if self.epsilon_cpa <= 0:
            raise WolcError("epsilon_cpa must be positive")
        if self.loss_kind not in ("linear", "exponential"):
            raise WolcError(f"unknown loss {self.loss_kind!r}")
        if self.risk_kind not in ("training-risk", "confusion"):
            raise WolcError(f"unknown risk kind {self.risk_kind!r}")

    def max_iterations(self, P: int) -> int:
        return 3 * P if self.T is None else self.T


@dataclass(frozen=True)
class IterationRecord:
    t: int
    risk: float
    Q: int
    z: int
    pairs: tuple = ()
    pair_risks: tuple = ()
    stubborn: tuple = ()
    cpa_rounds: int = 0
    working_set: int = 0

    def to_line(self) -> str:
        pairs = ",".join(f"{i}-{j}" for i, j in self.pairs) or "-"
        risks = ",".join(f"{r:.9g}" for r in self.pair_risks) or "-"
        stub = ",".join(str(int(b)) for b in self.stubborn) or "-"
        return (f"t={self.t} risk={self.risk:.12g} Q={self.Q} z={self.z} pairs={pairs} "
                f"pair_risks={risks} stubborn={stub} cpa_rounds={self.cpa_rounds} "
                f"working_set={self.working_set}")


@dataclass(frozen=True)
class EnsembleModel:
    M: CodingMatrix
    dichotomizers: tuple
    W: np.ndarray
    history: tuple = ()
    accuracies: np.ndarray | None = None  # P x Q training accuracy, for LW decoding
    config: WolcConfig = field(default_factory=WolcConfig)
    normalization: tuple | None = None  # (lo, hi) applied to raw features
    feature_count: int | None = None
    train_risk: float = float("nan")

    def __post_init__(self):
        if len(self.dichotomizers) != self.M.Q:
            raise WolcError(f"{len(self.dichotomizers)} dichotomizers for {self.M.Q} columns")
        W = np.array(decoding.check_weights(self.W, self.M), dtype=float)
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def P(self) -> int:
        return self.M.P

    @property
    def Q(self) -> int:
        return self.M.Q

    def prepare(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.feature_count is not None and X.shape[1] != self.feature_count:
            raise WolcError(f"model expects {self.feature_count} features, got {X.shape[1]}")
        if self.normalization is not None:
            lo, hi = self.normalization
            X = apply_unit_range(X, np.asarray(lo), np.asarray(hi))
        return X

    def codewords(self, X) -> np.ndarray:
        """n x Q dichotomizer outputs in [-1, 1] (signs if ``hard_outputs``)."""
        X = self.prepare(X)
        return _outputs(self.dichotomizers, X, self.config.hard_outputs)

    def scores(self, X, decoder="ow") -> np.ndarray:
        return decode_scores(self, self.codewords(X), decoder)

    def predict(self, X, decoder="ow") -> np.ndarray:
        return np.argmin(self.scores(X, decoder), axis=1) + 1

    def with_normalization(self, lo, hi) -> "EnsembleModel":
        return replace(self, normalization=(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)))


def _hard(v):
    return np.where(v >= 0, 1.0, -1.0)


def _outputs(dichotomizers, X, hard=False):
    cols = [d.margin(X) for d in dichotomizers]
    out = np.column_stack(cols) if cols else np.zeros((X.shape[0], 0))
    return _hard(out) if hard else out


def decode_scores(model: EnsembleModel, X_code, decoder="ow") -> np.ndarray:
    """Per-class scores (lower is better) for precomputed codewords."""
    kind = model.config.loss_kind
    if decoder == "hd":
        return decoding.hd_scores(X_code, model.M)
    if decoder == "lb":
        return decoding.lb_scores(X_code, model.M, kind)
    if decoder == "lw":
        acc = model.accuracies if model.accuracies is not None else np.ones(model.M.entries.shape)
        return decoding.lw_scores(X_code, model.M, decoding.empirical_weights(model.M, acc), kind)
    if decoder == "ow":
        return decoding.lw_scores(X_code, model.M, model.W, kind)
    raise WolcError(f"unknown decoder {decoder!r}; choose from {', '.join(DECODERS)}")


def predict(model: EnsembleModel, X, decoder="ow") -> np.ndarray:
    return model.predict(X, decoder)


def tie_rate(scores, tol=1e-12) -> float:
    """Fraction of rows whose minimum score is shared by more than one class."""
    S = np.asarray(scores, dtype=float)
    best = S.min(axis=1, keepdims=True)
    if not S.size:
        return 0.0
    return float((((S - best) <= tol).sum(axis=1) > 1).mean())


def _simple(ds, col, cfg):
    return train_adaboost(induce_binary_problem(ds, col), cfg.boost_rounds)


def _layered(ds, col, cfg, seed):
    prob = induce_binary_problem(ds, col)
    return train_layered_dichotomizer(prob, cfg.n_regions, cfg.boost_rounds, seed=seed)


def derived_seed(seed, t, k) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, t, k]).generate_state(1)[0])


def initialize(ds: Dataset, cfg: WolcConfig = WolcConfig(), init_code: CodingMatrix | None = None
               ) -> EnsembleModel:
    """One boosted dichotomizer per initial column, uniform weights."""
    M = make_one_vs_all(ds.class_count) if init_code is None else init_code
    if M.P != ds.class_count:
        raise WolcError(f"initial code has {M.P} rows for {ds.class_count} classes")
    M.check()
    dich = tuple(_simple(ds, M.column(q), cfg) for q in range(M.Q))
    return _finalize(ds, cfg, M, dich, decoding.uniform_weights(M), ())


def _finalize(ds, cfg, M, dich, W, history, outputs=None, risk=float("nan")):
    out = _outputs(dich, ds.features, cfg.hard_outputs) if outputs is None else outputs
    acc = decoding.class_accuracies(out, ds.labels, M)
    return EnsembleModel(M, tuple(dich), W, tuple(history), acc, cfg,
                         feature_count=ds.feature_count, train_risk=risk)


def train_wolc(ds: Dataset, cfg: WolcConfig = WolcConfig(), init_code: CodingMatrix | None = None,
               trace=None) -> EnsembleModel:
    """Run the grow-and-reweight loop and return the best snapshot.

    The snapshot is the (code, dichotomizers, weights) triple that produced
    the last risk that improved by more than ``eta`` relative to the round
    before, i.e. the state the weights were optimized for, without the
    columns appended afterwards. A zero-risk round returns immediately.
    """
    P = ds.class_count
    labels = ds.labels
    T = cfg.max_iterations(P)
    start = initialize(ds, cfg, init_code)
    M, dich = start.M, list(start.dichotomizers)
    outs = [d.margin(ds.features) for d in dich]
    best = (M, tuple(dich), start.W, None, float("nan"))
    prev = np.inf
    z = 0
    history = []
    for t in range(1, T + 1):
        X_code = np.column_stack(outs)
        if cfg.hard_outputs:
            X_code = _hard(X_code)
        tensor = decoding.build_loss_tensor(X_code, labels, M, cfg.loss_kind)
        sol = solve_ow_cpa(tensor, labels, M, cfg.epsilon_cpa)
        W, J = sol.W, sol.objective
        state = (M, tuple(dich), W, X_code, J)
        if J <= cfg.epsilon_cpa:  # zero up to the cutting-plane precision
            history.append(IterationRecord(t, J, M.Q, z, cpa_rounds=sol.iterations,
                                           working_set=sol.working_set_size))
            _emit(trace, history[-1])
            best = state
            break
        risk = decoding.pair_risk_matrix(tensor, labels, W, cfg.risk_kind)
        chosen = decoding.top_confusing_pairs(risk, cfg.s)
        pairs, stubborn = [], []
        for k, ((i, j), _) in enumerate(chosen):
            col = coding.pair_column(i, j, P)
            repeat = M.has_column(col)
            try:
                h = _layered(ds, col, cfg, derived_seed(cfg.seed, t, k)) if repeat else _simple(ds, col, cfg)
            except LearnerError as exc:
                if not repeat:
                    raise WolcError(f"round {t}, pair ({i},{j}): {exc}") from exc
                # too few distinct points to cluster: fall back to plain boosting
                h = _simple(ds, col, cfg)
            M = coding.append_column(M, col)
            dich.append(h)
            outs.append(h.margin(ds.features))
            pairs.append((i, j))
            stubborn.append(repeat)
        z, improved = patience_step(prev, J, z, cfg.eta)
        if improved:
            best = state
        history.append(IterationRecord(t, J, state[0].Q, z, tuple(pairs),
                                       tuple(r for _, r in chosen), tuple(stubborn),
                                       sol.iterations, sol.working_set_size))
        _emit(trace, history[-1])
        prev = J
        if z >= cfg.Z:
            break
    bM, bdich, bW, bout, bJ = best
    return _finalize(ds, cfg, bM, bdich, bW, history, outputs=bout, risk=bJ)


def patience_step(prev: float, risk: float, z: int, eta: float) -> tuple[int, bool]:
    """Update the stall counter; ``improved`` means take a snapshot.

    A round stalls when the relative drop (prev - risk) / risk is at most
    ``eta``; otherwise the counter resets. The first round (prev = inf)
    always counts as an improvement.
    """
    if (prev - risk) / risk <= eta:
        return z + 1, False
    return 0, True


def _emit(trace, rec):
    if trace is None:
        return
    if isinstance(trace, list):
        trace.append(rec.to_line())
    else:
        trace.write(rec.to_line() + "\n")


def train_fixed_code(ds: Dataset, M: CodingMatrix, cfg: WolcConfig = WolcConfig()) -> EnsembleModel:
    """Baseline ensemble: one boosted dichotomizer per column, uniform weights."""
    if M.P != ds.class_count:
        raise WolcError(f"code has {M.P} rows for {ds.class_count} classes")
    M.check()
    dich = tuple(_simple(ds, M.column(q), cfg) for q in range(M.Q))
    return _finalize(ds, cfg, M, dich, decoding.uniform_weights(M), ())


def fit_weights(model: EnsembleModel, ds: Dataset) -> EnsembleModel:
    """Replace the model's weights by the optimized ones for training set ``ds``."""
    X_code = _outputs(model.dichotomizers, ds.features, model.config.hard_outputs)
    tensor = decoding.build_loss_tensor(X_code, ds.labels, model.M, model.config.loss_kind)
    sol = solve_ow_cpa(tensor, ds.labels, model.M, model.config.epsilon_cpa)
    return replace(model, W=sol.W, train_risk=sol.objective)


def history_lines(model: EnsembleModel) -> str:
    return "".join(rec.to_line() + "\n" for rec in model.history)


# -- serialization -----------------------------------------------------------------

def model_to_dict(model: EnsembleModel) -> dict:
    cfg = asdict(model.config)
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": cfg,
        "code": model.M.entries.tolist(),
        "weights": model.W.tolist(),
        "accuracies": None if model.accuracies is None else model.accuracies.tolist(),
        "normalization": None if model.normalization is None
        else [np.asarray(a).tolist() for a in model.normalization],
        "feature_count": model.feature_count,
        "train_risk": None if np.isnan(model.train_risk) else model.train_risk,
        "dichotomizers": [d.to_dict() for d in model.dichotomizers],
        "history": [asdict(r) for r in model.history],
    }


def model_from_dict(d: dict) -> EnsembleModel:
    if d.get("format") != MODEL_FORMAT:
        raise WolcError("not a model file")
    if d.get("version") != MODEL_VERSION:
        raise WolcError(f"unsupported model version {d.get('version')}")
    hist = []
    for r in d["history"]:
        r = dict(r)
        r["pairs"] = tuple(tuple(p) for p in r["pairs"])
        r["pair_risks"] = tuple(r["pair_risks"])
        r["stubborn"] = tuple(r["stubborn"])
        hist.append(IterationRecord(**r))
    norm = d.get("normalization")
    return EnsembleModel(
        CodingMatrix(d["code"]),
        tuple(dichotomizer_from_dict(x) for x in d["dichotomizers"]),
        np.array(d["weights"], dtype=float),
        tuple(hist),
        None if d["accuracies"] is None else np.array(d["accuracies"], dtype=float),
        WolcConfig(**d["config"]),
        None if norm is None else tuple(np.array(a, dtype=float) for a in norm),
        d.get("feature_count"),
        float("nan") if d.get("train_risk") is None else float(d["train_risk"]),
    )


def save_model(model: EnsembleModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> EnsembleModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise WolcError(f"{path}: not a model file ({exc})") from exc
    return model_from_dict(d)

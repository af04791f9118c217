"""Repeated stratified cross-validation of coding/decoding combinations.

A method name is ``<coding>-<decoder>``: coding one of ``wolc``, ``1vsall``,
``1vs1``, ``random``; decoder one of ``hd``, ``lb``, ``lw``, ``ow``. Every
repeat reshuffles the folds with ``seed ^ repeat``. Within one fold, methods
sharing a coding share its trained dichotomizers.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .coding import make_one_vs_all, make_one_vs_one, make_random_ternary
from .dataset import (Dataset, normalize_split, normalize_unit_range, resolve_dataset,
                      stratified_folds)
from .wolc import WolcConfig, derived_seed, fit_weights, tie_rate, train_fixed_code, train_wolc

CODINGS = ("wolc", "1vsall", "1vs1", "random")
DECODERS = ("hd", "lb", "lw", "ow")
METHODS = tuple(f"{c}-{d}" for c in CODINGS for d in DECODERS)
RANDOM_CODE_LENGTH = 10


class HarnessError(RuntimeError):
    pass


def split_method(name: str) -> tuple[str, str]:
    if name not in METHODS:
        raise HarnessError(f"unknown method {name!r}; registered: {', '.join(METHODS)}")
    coding, decoder = name.rsplit("-", 1)
    return coding, decoder


@dataclass(frozen=True)
class RunSpec:
    dataset: str
    method: str = "wolc-ow"
    repeats: int = 10
    folds: int = 10
    seed: int = 0
    config: WolcConfig = field(default_factory=WolcConfig)
    normalization: str = "fold-local"
    random_code_length: int = RANDOM_CODE_LENGTH

    def __post_init__(self):
        split_method(self.method)
        if self.repeats < 1 or self.folds < 2:
            raise HarnessError("need repeats >= 1 and folds >= 2")
        if self.normalization not in ("fold-local", "global"):
            raise HarnessError(f"unknown normalization policy {self.normalization!r}")


@dataclass
class RunReport:
    dataset: str
    method: str
    repeats: int
    folds: int
    seed: int
    normalization: str
    accuracies: np.ndarray  # repeats x folds
    code_lengths: np.ndarray  # repeats x folds
    tie_rates: np.ndarray  # repeats x folds
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def mean_accuracy(self) -> float:
        return float(self.accuracies.mean())

    @property
    def std_accuracy(self) -> float:
        a = self.accuracies.ravel()
        return float(a.std(ddof=1)) if a.size > 1 else 0.0

    @property
    def mean_code_length(self) -> float:
        return float(self.code_lengths.mean())

    @property
    def std_code_length(self) -> float:
        q = self.code_lengths.ravel()
        return float(q.std(ddof=1)) if q.size > 1 else 0.0

    def same_results(self, other: "RunReport") -> bool:
        """Equal in everything except wall time."""
        return (self.dataset, self.method, self.repeats, self.folds, self.seed,
                self.normalization, self.config) == \
            (other.dataset, other.method, other.repeats, other.folds, other.seed,
             other.normalization, other.config) and \
            np.array_equal(self.accuracies, other.accuracies) and \
            np.array_equal(self.code_lengths, other.code_lengths) and \
            np.array_equal(self.tie_rates, other.tie_rates)


# -- running ------------------------------------------------------------------------

def _build(coding, dtr, cfg, code_len, seed):
    P = dtr.class_count
    if coding == "wolc":
        return train_wolc(dtr, replace(cfg, seed=seed))
    if coding == "1vsall":
        M = make_one_vs_all(P)
    elif coding == "1vs1":
        M = make_one_vs_one(P)
    else:
        distinct = (3 ** P - 2 ** (P + 1) + 1) // 2  # bipartition columns up to sign
        M = make_random_ternary(P, code_len, seed=seed, allow_duplicate_columns=code_len > distinct)
    return train_fixed_code(dtr, M, cfg)


def _run_cell(job):
    r, f = job[7], job[8]
    try:
        return _cell(*job)
    except Exception as exc:
        raise HarnessError(f"repeat {r}, fold {f}: {type(exc).__name__}: {exc}") from exc


def _cell(X, y, P, methods, cfg, norm, code_len, r, f, train, test, seed):
    Xtr, Xte = normalize_split(X[train], X[test], norm)
    dtr = Dataset(Xtr, y[train], P)
    models, out = {}, []
    cell_seed = derived_seed(seed, r, f)
    for name in methods:
        coding, decoder = split_method(name)
        if coding not in models:
            models[coding] = _build(coding, dtr, cfg, code_len, cell_seed)
        model = models[coding]
        if decoder == "ow" and coding != "wolc":
            key = coding + "+ow"
            if key not in models:
                models[key] = fit_weights(model, dtr)
            model = models[key]
        S = model.scores(Xte, decoder)
        pred = np.argmin(S, axis=1) + 1
        out.append((float(np.mean(pred == y[test])), model.Q, tie_rate(S)))
    return out


def run_grid(dataset, methods, repeats=10, folds=10, seed=0, config: WolcConfig = WolcConfig(),
             normalization="fold-local", random_code_length=RANDOM_CODE_LENGTH, jobs=1,
             ) -> dict[str, RunReport]:
    """Cross-validate several methods on one dataset with shared folds and models."""
    methods = list(dict.fromkeys(methods))
    for name in methods:
        split_method(name)
    ds = resolve_dataset(dataset) if isinstance(dataset, str) else dataset
    name = dataset if isinstance(dataset, str) else (ds.name or "data")
    if normalization == "global":
        ds = normalize_unit_range(ds)
    jobs_list = []
    for r in range(repeats):
        plan = stratified_folds(ds, folds, seed ^ r)
        for f, (train, test) in enumerate(plan.splits()):
            jobs_list.append((ds.features, ds.labels, ds.class_count, methods, config,
                              normalization, random_code_length, r, f, train, test, seed))
    t0 = time.perf_counter()
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_run_cell, jobs_list))
        else:
            results = [_run_cell(job) for job in jobs_list]
    except HarnessError as exc:
        raise HarnessError(f"{name}: {exc}") from exc
    wall = time.perf_counter() - t0
    cfg_echo = _config_echo(config, random_code_length)
    reports = {}
    for k, meth in enumerate(methods):
        acc = np.array([res[k][0] for res in results]).reshape(repeats, folds)
        qs = np.array([res[k][1] for res in results], dtype=float).reshape(repeats, folds)
        ties = np.array([res[k][2] for res in results]).reshape(repeats, folds)
        reports[meth] = RunReport(name, meth, repeats, folds, seed, normalization, acc, qs, ties,
                                  dict(cfg_echo), wall)
    return reports


def run_benchmark(spec: RunSpec, jobs=1, dataset: Dataset | None = None) -> RunReport:
    ref = spec.dataset if dataset is None else dataset
    out = run_grid(ref, [spec.method], spec.repeats, spec.folds, spec.seed, spec.config,
                   spec.normalization, spec.random_code_length, jobs)
    rep = out[spec.method]
    rep.dataset = spec.dataset
    return rep


def _config_echo(cfg: WolcConfig, code_len) -> dict:
    d = {k: ("3P" if v is None and k == "T" else v) for k, v in asdict(cfg).items()}
    d["random_code_length"] = code_len
    return {k: str(v) for k, v in d.items()}


# -- ranking ------------------------------------------------------------------------

@dataclass
class RankTable:
    datasets: list
    methods: list
    accuracy: np.ndarray  # datasets x methods
    ranks: np.ndarray

    @property
    def mean_rank(self) -> np.ndarray:
        return self.ranks.mean(axis=0)

    def to_text(self) -> str:
        w = max(8, *(len(m) for m in self.methods))
        lines = ["dataset".ljust(12) + "".join(m.rjust(w + 2) for m in self.methods)]
        for d, accs, rks in zip(self.datasets, self.accuracy, self.ranks):
            lines.append(d.ljust(12) + "".join(f"{100 * a:.2f}".rjust(w + 2) for a in accs))
            lines.append("".ljust(12) + "".join(f"[{r:g}]".rjust(w + 2) for r in rks))
        lines.append("Rank".ljust(12) + "".join(f"{r:.2f}".rjust(w + 2) for r in self.mean_rank))
        return "\n".join(lines) + "\n"


def compare_grid(reports) -> RankTable:
    """Rank methods per dataset by mean accuracy (1 is best, ties averaged)."""
    reports = list(reports)
    methods = list(dict.fromkeys(r.method for r in reports))
    if len(methods) < 2:
        raise HarnessError("need at least two methods to rank")
    by = {}
    for r in reports:
        by.setdefault(r.method, {})[r.dataset] = r
    datasets = list(by[methods[0]])
    for m in methods:
        if set(by[m]) != set(datasets):
            raise HarnessError(f"method {m} was run on {sorted(by[m])}, expected {sorted(datasets)}")
    acc = np.array([[by[m][d].mean_accuracy for m in methods] for d in datasets])
    ranks = np.array([rankdata(-row, method="average") for row in acc])
    return RankTable(datasets, methods, acc, ranks)


# -- reports -------------------------------------------------------------------------

def _as_list(reports):
    if isinstance(reports, RunReport):
        reports = [reports]
    reports = list(reports)
    if not reports:
        raise HarnessError("nothing to report")
    for r in reports:
        if r.accuracies.size == 0:
            raise HarnessError(f"report for {r.method} on {r.dataset} has no cells")
    return reports


def format_table(reports, timing=True) -> str:
    """Accuracy (%) with std in parentheses underneath, plus mean code length."""
    reports = _as_list(reports)
    head = f"{'dataset':<12}{'method':<14}{'accuracy':>10}{'code length':>13}"
    if timing:
        head += f"{'time (s)':>10}"
    lines = [head]
    for r in reports:
        row = f"{r.dataset:<12}{r.method:<14}{100 * r.mean_accuracy:>10.2f}{r.mean_code_length:>13.2f}"
        if timing:
            row += f"{r.wall_time:>10.1f}"
        lines.append(row)
        lines.append(f"{'':<26}{f'({100 * r.std_accuracy:.2f})':>10}{f'({r.std_code_length:.2f})':>13}")
    first = reports[0]
    lines.append("")
    lines.append(f"# {first.repeats}x{first.folds}-fold stratified CV, seed={first.seed}, "
                 f"normalization={first.normalization}")
    lines.append("# config " + " ".join(f"{k}={v}" for k, v in first.config.items()))
    return "\n".join(lines) + "\n"


def format_records(reports, timing=True) -> str:
    """One key=value line per cell, one aggregate line and one config line per report."""
    lines = []
    for r in _as_list(reports):
        base = f"dataset={r.dataset} method={r.method}"
        lines.append(f"record=config {base} repeats={r.repeats} folds={r.folds} seed={r.seed} "
                     f"normalization={r.normalization} "
                     + " ".join(f"cfg.{k}={v}" for k, v in r.config.items()))
        for i in range(r.repeats):
            for j in range(r.folds):
                lines.append(f"record=cell {base} repeat={i} fold={j} "
                             f"accuracy={float(r.accuracies[i, j])!r} "
                             f"code_length={float(r.code_lengths[i, j])!r} "
                             f"tie_rate={float(r.tie_rates[i, j])!r}")
        agg = (f"record=aggregate {base} mean_accuracy={r.mean_accuracy!r} "
               f"std_accuracy={r.std_accuracy!r} mean_code_length={r.mean_code_length!r}")
        if timing:
            agg += f" wall_time={float(r.wall_time)!r}"
        lines.append(agg)
    return "\n".join(lines) + "\n"


def emit_report(reports, path=None, format="text-table", timing=True) -> str:
    if format == "text-table":
        text = format_table(reports, timing)
    elif format == "records":
        text = format_records(reports, timing)
    else:
        raise HarnessError(f"unknown report format {format!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _kv(line):
    return dict(tok.split("=", 1) for tok in line.split())


def parse_records(text: str) -> list[RunReport]:
    """Inverse of :func:`format_records`."""
    heads, cells, aggs = {}, {}, {}
    order = []
    for line in text.splitlines():
        if not line.strip():
            continue
        kv = _kv(line)
        key = (kv["dataset"], kv["method"])
        kind = kv.pop("record")
        if kind == "config":
            heads[key] = kv
            order.append(key)
            cells[key] = []
        elif kind == "cell":
            cells[key].append(kv)
        elif kind == "aggregate":
            aggs[key] = kv
        else:
            raise HarnessError(f"unknown record kind {kind!r}")
    out = []
    for key in order:
        h = heads[key]
        R, F = int(h["repeats"]), int(h["folds"])
        acc, qs, ties = np.zeros((R, F)), np.zeros((R, F)), np.zeros((R, F))
        for c in cells[key]:
            i, j = int(c["repeat"]), int(c["fold"])
            acc[i, j] = float(c["accuracy"])
            qs[i, j] = float(c["code_length"])
            ties[i, j] = float(c["tie_rate"])
        if len(cells[key]) != R * F:
            raise HarnessError(f"{key}: {len(cells[key])} cells for {R}x{F}")
        cfg = {k[4:]: v for k, v in h.items() if k.startswith("cfg.")}
        wall = float(aggs.get(key, {}).get("wall_time", 0.0))
        out.append(RunReport(h["dataset"], h["method"], R, F, int(h["seed"]), h["normalization"],
                             acc, qs, ties, cfg, wall))
    return out

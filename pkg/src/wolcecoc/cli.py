"""Command-line entry point: ``wolcecoc {gen-code,train,predict,benchmark}``.

Every subcommand takes ``--config FILE``, a flat ``key=value`` file whose keys
are the long option names with underscores (``boost_rounds=40``). Flags given
on the command line override the file; unknown keys are an error. Each
written artifact gets a ``.config`` file beside it holding the effective
settings.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, coding
from .coding import CodingError
from .dataset import DatasetError, resolve_dataset, unit_range_stats, apply_unit_range, Dataset
from .decoding import DecodingError
from .evalharness import (METHODS, HarnessError, compare_grid, emit_report, run_grid)
from .learners import LearnerError
from .owopt import OwError, SimplexError
from .wolc import (DECODERS, WolcConfig, WolcError, history_lines, load_model, save_model,
                   train_wolc)

EXPECTED_ERRORS = (CodingError, DatasetError, DecodingError, HarnessError, LearnerError,
                   OwError, SimplexError, WolcError, OSError)


class UsageError(ValueError):
    pass


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _code_length_limit(text):
    t = str(text).strip()
    return None if t.upper() == "3P" else int(t)


def _classes(text):
    P = int(text)
    if P < 2:
        raise ValueError("need at least 2 classes")
    return P


@dataclass(frozen=True)
class Option:
    key: str
    type: object
    default: object
    help: str
    choices: tuple | None = None

    @property
    def flag(self):
        return "--" + self.key.replace("_", "-")

    def parse(self, text):
        try:
            value = self.type(text)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{self.key}: {exc}") from None
        if self.choices is not None and value not in self.choices:
            raise UsageError(f"{self.key}: {value!r} is not one of {', '.join(map(str, self.choices))}")
        return value


MODEL_OPTIONS = [
    Option("s", int, 3, "class pairs added per round"),
    Option("Z", int, 3, "patience: rounds without relative improvement above eta"),
    Option("eta", float, 0.01, "relative risk improvement that counts as progress"),
    Option("T", _code_length_limit, None, "maximum rounds; '3P' means three times the class count"),
    Option("n_regions", int, 2, "regions per layered-clustering dichotomizer"),
    Option("boost_rounds", int, 40, "AdaBoost rounds (decision stumps) per dichotomizer"),
    Option("loss_kind", str, "linear", "decoding loss", ("linear", "exponential")),
    Option("epsilon_cpa", float, 1e-4, "cutting-plane tolerance"),
    Option("seed", int, 0, "master random seed"),
    Option("hard_outputs", _bool, False, "use dichotomizer signs instead of margins"),
    Option("risk_kind", str, "training-risk", "pair risk used to pick class pairs",
           ("training-risk", "confusion")),
]

DATA_OPTIONS = [
    Option("format", str, "delimited", "dataset file format", ("delimited", "sparse-index")),
    Option("label_column", int, -1, "label field of delimited rows (0-based, -1 = last)"),
]

GEN_OPTIONS = [
    Option("method", str, "one-vs-all", "code generator",
           ("one-vs-all", "one-vs-one", "random", "1vsall", "1vs1")),
    Option("classes", _classes, None, "number of classes P (at least 2)"),
    Option("length", int, 10, "code length of a random code"),
    Option("zero_prob", float, 0.5, "probability of a zero entry in a random code"),
    Option("seed", int, 0, "random seed"),
    Option("allow_duplicates", _bool, False, "let a random code repeat a column"),
]

TRAIN_OPTIONS = MODEL_OPTIONS + DATA_OPTIONS + [
    Option("normalize", _bool, True, "scale features to [0, 1]; the model stores the range"),
]

PREDICT_OPTIONS = DATA_OPTIONS + [
    Option("decoder", str, "ow", "decoding rule", DECODERS),
]

BENCH_OPTIONS = MODEL_OPTIONS + [
    Option("methods", str, "wolc-ow,1vsall-hd", "comma-separated <coding>-<decoder> names"),
    Option("repeats", int, 10, "cross-validation repeats"),
    Option("folds", int, 10, "folds per repeat"),
    Option("normalization", str, "fold-local", "feature scaling policy", ("fold-local", "global")),
    Option("random_code_length", int, 10, "code length of the random baseline"),
    Option("jobs", int, 1, "worker processes"),
]


def _fmt_default(opt):
    if opt.key == "T" and opt.default is None:
        return "3P"
    if opt.default is None:
        return "required"
    return str(opt.default).lower() if isinstance(opt.default, bool) else str(opt.default)


def _add_options(p, options):
    p.add_argument("--config", metavar="FILE", help="flat key=value settings file")
    for opt in options:
        metavar = opt.key.upper() if opt.choices is None else "{" + ",".join(opt.choices) + "}"
        p.add_argument(opt.flag, dest=opt.key, default=argparse.SUPPRESS, metavar=metavar,
                       help=f"{opt.help} (default: {_fmt_default(opt)})")


def read_config_file(path, options) -> dict:
    """Parse a key=value file against ``options``; unknown keys are rejected."""
    known = {o.key: o for o in options}
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}:{n}: unknown key {key!r}; known: {', '.join(known)}")
        out[key] = known[key].parse(value)
    return out


def effective_settings(args, options) -> dict:
    """Defaults, then the config file, then command-line flags."""
    settings = {o.key: o.default for o in options}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config, options))
    for o in options:
        if hasattr(args, o.key):
            settings[o.key] = o.parse(getattr(args, o.key))
    return settings


def echo_lines(settings) -> str:
    def show(k, v):
        if k == "T" and v is None:
            return "3P"
        return str(v).lower() if isinstance(v, bool) else str(v)
    return "".join(f"{k}={show(k, v)}\n" for k, v in settings.items())


def write_echo(path, settings, extra=None):
    items = dict(settings)
    items.update(extra or {})
    Path(str(path) + ".config").write_text(echo_lines(items), encoding="utf-8")


def wolc_config(settings) -> WolcConfig:
    return WolcConfig(**{f.name: settings[f.name] for f in fields(WolcConfig)})


# -- gen-code -------------------------------------------------------------------------

def cmd_gen_code(args, out=None) -> int:
    out = out or sys.stdout
    st = effective_settings(args, GEN_OPTIONS)
    P = st["classes"]
    if P is None:
        raise UsageError("--classes is required")
    method = {"1vsall": "one-vs-all", "1vs1": "one-vs-one"}.get(st["method"], st["method"])
    if method == "one-vs-all":
        M = coding.make_one_vs_all(P)
    elif method == "one-vs-one":
        M = coding.make_one_vs_one(P)
    else:
        M = coding.make_random_ternary(P, st["length"], st["zero_prob"], st["seed"],
                                       st["allow_duplicates"])
    problems = coding.validate(M)
    coding.save(M, args.output)
    write_echo(args.output, st)
    print(f"wrote {P}x{M.Q} {method} code to {args.output}", file=out)
    print("valid" if not problems else "invalid: " + "; ".join(problems), file=out)
    return 0 if not problems else 1


# -- train ----------------------------------------------------------------------------

def cmd_train(args, out=None) -> int:
    out = out or sys.stdout
    st = effective_settings(args, TRAIN_OPTIONS)
    cfg = wolc_config(st)
    ds = resolve_dataset(args.data, st["format"], st["label_column"])
    init = coding.load(args.init_code) if args.init_code else None
    lo = hi = None
    if st["normalize"]:
        lo, hi = unit_range_stats(ds.features)
        ds = Dataset(apply_unit_range(ds.features, lo, hi), ds.labels, ds.class_count,
                     ds.name, ds.original_labels)
    trace = sys.stderr if args.verbose else None
    model = train_wolc(ds, cfg, init_code=init, trace=trace)
    if lo is not None:
        model = model.with_normalization(lo, hi)
    history = args.history or str(args.output) + ".history"
    save_model(model, args.output)
    Path(history).write_text(history_lines(model), encoding="utf-8")
    write_echo(args.output, st, {"data": args.data, "init_code": args.init_code or "1vsall"})
    print(f"trained on {ds.n} examples, {ds.class_count} classes: Q={model.Q}, "
          f"training risk={model.train_risk:.6g}, rounds={len(model.history)}", file=out)
    print(f"model -> {args.output}; history -> {history}", file=out)
    return 0


# -- predict --------------------------------------------------------------------------

def _read_rows(path, fmt, label_column, d):
    """Feature rows for prediction; a trailing (or ``label_column``) label is dropped."""
    if fmt == "sparse-index" or (str(path).lower() in ("iris", "wine", "glass", "thyroid")
                                 and not Path(path).exists()):
        return resolve_dataset(path, fmt, label_column).features
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [t for t in line.replace(",", " ").split()]
        if len(parts) == d + 1:
            del parts[label_column]
        if len(parts) != d:
            raise DatasetError(f"{path}:{n}: {len(parts)} fields, model expects {d} features")
        try:
            rows.append([float(t) for t in parts])
        except ValueError as exc:
            raise DatasetError(f"{path}:{n}: {exc}") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return np.array(rows)


def cmd_predict(args, out=None) -> int:
    out = out or sys.stdout
    st = effective_settings(args, PREDICT_OPTIONS)
    model = load_model(args.model)
    d = model.feature_count
    X = _read_rows(args.data, st["format"], st["label_column"], d)
    if X.shape[1] != d:
        raise DatasetError(f"data has {X.shape[1]} features, model expects {d}")
    S = model.scores(X, st["decoder"])
    labels = np.argmin(S, axis=1) + 1
    text = "".join(f"{int(y)}\n" for y in labels)
    if args.output in (None, "-"):
        out.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")
        write_echo(args.output, st, {"model": args.model, "data": args.data})
    if args.scores:
        lines = ["# " + ",".join(f"class{p + 1}" for p in range(S.shape[1]))]
        lines += [",".join(f"{v:.9g}" for v in row) for row in S]
        Path(args.scores).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


# -- benchmark ------------------------------------------------------------------------

def cmd_benchmark(args, out=None) -> int:
    out = out or sys.stdout
    st = effective_settings(args, BENCH_OPTIONS)
    methods = [m.strip() for m in st["methods"].split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {', '.join(bad) or '(none)'}; "
                         f"registered: {', '.join(METHODS)}")
    datasets = [d.strip() for d in args.dataset.split(",") if d.strip()]
    cfg = wolc_config(st)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    reports, failures = [], []
    for name in datasets:
        try:
            got = run_grid(name, methods, st["repeats"], st["folds"], st["seed"], cfg,
                           st["normalization"], st["random_code_length"], st["jobs"])
        except EXPECTED_ERRORS as exc:
            failures.append(f"{name}: {exc}")
            print(f"FAILED {name}: {exc}", file=sys.stderr)
            continue
        reports.extend(got.values())
        print(f"done {name}: " + ", ".join(f"{m} {100 * r.mean_accuracy:.2f}"
                                           for m, r in got.items()), file=out)
    if reports:
        emit_report(reports, outdir / "report.txt", "text-table", timing=not args.no_timing)
        emit_report(reports, outdir / "records.txt", "records", timing=not args.no_timing)
        done = {r.dataset for r in reports}
        if len(methods) > 1:
            table = compare_grid(reports)
            (outdir / "ranks.txt").write_text(table.to_text(), encoding="utf-8")
            out.write(table.to_text())
        print(f"reports for {', '.join(sorted(done))} -> {outdir}", file=out)
    write_echo(outdir / "benchmark", st, {"dataset": ",".join(datasets)})
    if failures:
        (outdir / "failures.txt").write_text("\n".join(failures) + "\n", encoding="utf-8")
        print(f"{len(failures)} of {len(datasets)} datasets failed; see {outdir / 'failures.txt'}",
              file=sys.stderr)
        return 1
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wolcecoc",
                                 description="Ternary ECOC with optimized-weight decoding.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-code", help="write a coding matrix")
    _add_options(g, GEN_OPTIONS)
    g.add_argument("-o", "--output", required=True, help="coding-matrix file to write")
    g.set_defaults(func=cmd_gen_code, options=GEN_OPTIONS)

    t = sub.add_parser("train", help="train a WOLC-ECOC model")
    t.add_argument("--data", required=True, help="dataset file or builtin name (iris, wine, glass, thyroid)")
    t.add_argument("--init-code", help="initial coding matrix file (default: one-vs-all)")
    _add_options(t, TRAIN_OPTIONS)
    t.add_argument("-o", "--output", required=True, help="model file (JSON)")
    t.add_argument("--history", help="history log (default: <output>.history)")
    t.add_argument("-v", "--verbose", action="store_true", help="print one line per round to stderr")
    t.set_defaults(func=cmd_train, options=TRAIN_OPTIONS)

    p = sub.add_parser("predict", help="label rows with a trained model")
    p.add_argument("--model", required=True, help="model file from 'train'")
    p.add_argument("--data", required=True, help="rows to label; a label field is ignored")
    _add_options(p, PREDICT_OPTIONS)
    p.add_argument("-o", "--output", help="predictions file, one label per line (default: stdout)")
    p.add_argument("--scores", help="also write per-class decoding scores here")
    p.set_defaults(func=cmd_predict, options=PREDICT_OPTIONS)

    b = sub.add_parser("benchmark", help="repeated stratified cross-validation")
    b.add_argument("--dataset", required=True, help="comma-separated builtin names or files")
    _add_options(b, BENCH_OPTIONS)
    b.add_argument("-o", "--output", default="bench-out", help="output directory (default: bench-out)")
    b.add_argument("--no-timing", action="store_true", help="leave wall times out of the reports")
    b.set_defaults(func=cmd_benchmark, options=BENCH_OPTIONS)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"wolcecoc {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except EXPECTED_ERRORS as exc:
        print(f"wolcecoc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

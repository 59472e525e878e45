"""Command-line front end.

Subcommands: ``gen``, ``run``, ``eval``, ``sweep``, ``bench`` and
``oracle``.  Single runs are written as JSON, tables as CSV.  Exit codes
are 0 on success, 1 on a runtime failure (with a JSON error object on
stderr) and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import audit
from .cap import cap_cluster, cap_subset, time_iterations
from .ckm import CkmConfig, ckm_cluster
from .compose import load_bilinear, make_composition, random_bilinear
from .core import Assignment, Dataset, build_catalog, build_similarity, read_dataset
from .gcr import GcrConfig, gcr_cluster, ward_singletons
from .metrics import evaluate
from .synth import SynthConfig, generate_trial, save_trial, trial_paths

ALGORITHMS = ("cap", "cap-subset", "ckm", "gcr", "ward")


def sub_seed(seed: int, name: str) -> int:
    """Independent seed for one named consumer of randomness."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


@dataclass
class RunResult:
    algorithm: str
    config: dict
    assignments: list
    metrics: dict | None
    objective: float | None
    iterations: int | None
    wall_ms: float
    seed: int
    n: int

    def to_json(self):
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_dict(cls, raw):
        return cls(**{k: raw.get(k) for k in cls.__dataclass_fields__})


# -- composition and run parameters -------------------------------------------

def composition_from(args, p):
    kind = args.g
    if kind == "bilinear":
        if args.g_weights:
            return load_bilinear(args.g_weights)
        return random_bilinear(p, seed=args.g_seed)
    return make_composition(kind)


def run_params(args):
    keys = ("d", "gamma", "damping", "tau", "k", "threshold", "restarts", "lr",
            "subset_size", "metric", "seed", "max_iter", "max_alternations",
            "gradient_steps", "g", "g_seed", "g_weights")
    return {k: getattr(args, k) for k in keys}


def run_algorithm(alg: str, dataset: Dataset, params: dict, g=None) -> RunResult:
    """Run one algorithm; ``params`` holds the flag values by destination name."""
    if g is None:
        ns = argparse.Namespace(g=params.get("g", "sum"), g_weights=params.get("g_weights"),
                                g_seed=params.get("g_seed", 0))
        g = composition_from(ns, dataset.p)
    seed = int(params.get("seed", 0))
    metric = params.get("metric") or ("squared" if alg == "ckm" else "unsquared")
    d = int(params.get("d", 2))
    t0 = time.perf_counter()
    iterations = None
    if alg == "cap":
        res = cap_cluster(dataset, g=g, gamma=params["gamma"], damping=params["damping"],
                          max_iter=params["max_iter"], metric=metric, d=d)
        labels, objective, iterations = res.assignment, res.objective, res.iterations
    elif alg == "cap-subset":
        labels = cap_subset(dataset, d=d, g=g, gamma=params["gamma"],
                            subset_size=params["subset_size"], seed=sub_seed(seed, "subset"),
                            damping=params["damping"], max_iter=params["max_iter"],
                            metric=metric)
        objective = None
    elif alg == "ckm":
        k = _need(params, "k", alg)
        cfg = CkmConfig(k=k, d=min(d, k), learning_rate=params["lr"],
                        restarts=params["restarts"],
                        max_alternations=params["max_alternations"],
                        gradient_steps=params["gradient_steps"], seed=sub_seed(seed, "init"))
        res = ckm_cluster(dataset, cfg, g)
        labels, objective, iterations = res.assignment, res.ssd, res.run.alternations
    elif alg == "gcr":
        cfg = _gcr_config(params, d)
        res = gcr_cluster(dataset, cfg, g)
        labels, objective = res.assignment, res.total_distance
    elif alg == "ward":
        k, thr = params.get("k"), params.get("threshold")
        if k is None and thr is None:
            raise ValueError("ward needs --k or --threshold")
        labels = ward_singletons(dataset, k, thr if k is None else None)
        objective = None
    else:
        raise ValueError(f"unknown algorithm {alg!r}")
    wall = 1000.0 * (time.perf_counter() - t0)
    metrics = evaluate(labels, dataset.labels).as_dict() if dataset.labels else None
    config = dict(params, algorithm=alg, metric=metric, g_describe=g.describe())
    return RunResult(alg, config, [list(lab) for lab in labels.labels], metrics,
                     objective, iterations, wall, seed, dataset.n)


def _need(params, key, alg):
    if params.get(key) is None:
        raise ValueError(f"{alg} needs --{key.replace('_', '-')}")
    return int(params[key])


def _gcr_config(params, d):
    k, thr = params.get("k"), params.get("threshold")
    if k is None and thr is None:
        raise ValueError("gcr needs --k or --threshold")
    return GcrConfig(base_k=k, distance_threshold=None if k is not None else thr,
                     tau=params["tau"], d=d)


# -- tables --------------------------------------------------------------------

def mean_stderr(values):
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def emit_table(results, out=None) -> str:
    """CRI and ARI tables, algorithms by n, cells ``mean (stderr)`` in percent."""
    groups = {}
    for r in results:
        r = r if isinstance(r, RunResult) else RunResult.from_dict(r)
        if not r.metrics:
            warnings.warn(f"{r.algorithm} run at n={r.n} has no metrics; omitted")
            continue
        groups.setdefault((r.algorithm, r.n), []).append(r.metrics)
    algs = sorted({a for a, _ in groups})
    sizes = sorted({n for _, n in groups})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for block, key in (("CRI", "cri"), ("ARI", "ari")):
        w.writerow([block])
        w.writerow(["algorithm"] + [f"n={n}" for n in sizes])
        for a in algs:
            row = [a]
            for n in sizes:
                cell = groups.get((a, n))
                if not cell:
                    warnings.warn(f"no trials for {a} at n={n}; cell left empty")
                    row.append("")
                    continue
                m, se = mean_stderr([100.0 * c[key] for c in cell])
                row.append(f"{m:.1f} ({se:.1f})")
            w.writerow(row)
        w.writerow([])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text, encoding="utf-8")
    return text


# -- subcommands ---------------------------------------------------------------

def _load(path, labels=None):
    csv_path, side = trial_paths(path)
    return read_dataset(csv_path, labels if labels else side)


def cmd_gen(args):
    g = composition_from(args, args.p)
    cfg = SynthConfig(l=args.l, d=args.d, per_cluster=args.per_cluster, p=args.p,
                      separation=args.separation, sigma=args.sigma, g=g,
                      seed=sub_seed(args.seed, "data"), balanced=not args.unbalanced)
    trial = generate_trial(cfg)
    csv_path, labels_path = save_trial(trial.dataset, args.out)
    meta = dict(cfg.as_dict(), cli_seed=args.seed, n=trial.dataset.n,
                csv=str(csv_path), labels=str(labels_path))
    print(json.dumps(meta))
    return 0


def cmd_run(args):
    dataset = _load(args.data, args.labels)
    g = composition_from(args, dataset.p)
    result = run_algorithm(args.alg, dataset, run_params(args), g)
    result.config["data"] = str(args.data)
    text = result.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text)
    return 0


def _read_labels(path):
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        return raw, Assignment(tuple(tuple(v) for v in raw["assignments"]))
    return None, Assignment(tuple(tuple(v) for v in raw))


def cmd_eval(args):
    truth = None
    if args.truth:
        _, truth = _read_labels(args.truth)
    runs, rows = [], []
    for path in args.pred:
        record, pred = _read_labels(path)
        if truth is not None:
            metrics = evaluate(pred, truth).as_dict()
        elif record is not None and record.get("metrics"):
            metrics = record["metrics"]
        else:
            raise ValueError(f"{path}: no ground truth given and none recorded")
        rows.append(dict(file=str(path), **metrics))
        if record is not None:
            record = dict(record, metrics=metrics)
            runs.append(RunResult.from_dict(record))
    for row in rows:
        print(json.dumps(row))
    if args.table:
        if not runs:
            raise ValueError("--table needs RunResult files")
        emit_table(runs, args.table)
    return 0


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args):
    values = _floats(args.values)
    params = run_params(args)
    trials = []
    for t in range(args.trials):
        cfg = SynthConfig(l=args.l, d=args.d, per_cluster=args.per_cluster, p=args.p,
                          separation=args.separation, sigma=args.sigma,
                          seed=sub_seed(args.seed + t, "data"))
        trials.append(generate_trial(cfg).dataset)
    rows = []
    for v in values:
        setting = dict(params, **{args.param: int(v) if args.param in ("k", "restarts") else v})
        scores = []
        for t, ds in enumerate(trials):
            setting["seed"] = args.seed + t
            g = composition_from(args, ds.p)
            scores.append(run_algorithm(args.alg, ds, setting, g).metrics["cri"])
        m, se = mean_stderr(scores)
        rows.append((f"{args.param}={v:g}", m, se))
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setting", "mean", "stderr"])
        w.writerows(rows)
    best = max(rows, key=lambda r: r[1])
    print(json.dumps({"best": best[0], "mean": best[1], "stderr": best[2]}))
    return 0


def cmd_bench(args):
    ns = [int(v) for v in args.ns.split(",")]
    rng = np.random.default_rng(sub_seed(args.seed, "data"))
    rows = []
    for n in ns:
        x = rng.normal(size=(n, args.p))
        ds = Dataset(x)
        if args.alg == "cap":
            cat = build_catalog(n, min(args.d, n))
            table = build_similarity(ds, cat, make_composition("sum"), args.gamma)
            times = time_iterations(table.values, cat, args.iterations, args.damping)
            rows.append((n, float(np.median(times)), len(times)))
        else:
            params = run_params(args)
            t0 = time.perf_counter()
            run_algorithm(args.alg, ds, params)
            rows.append((n, time.perf_counter() - t0, 1))
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "seconds", "repeats"])
        w.writerows(rows)
    if len(rows) > 1:
        slope = np.polyfit(np.log([r[0] for r in rows]), np.log([r[1] for r in rows]), 1)[0]
        print(json.dumps({"loglog_slope": float(slope)}))
    return 0


class _open_out:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", newline="", encoding="utf-8") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()


def cmd_oracle(args):
    suites = list(audit.SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in suites:
        if name == "maxes":
            rep = audit.audit_maxes(args.instances, max_n=max(args.max_n, 1), seed=args.seed)
        elif name == "alpha":
            rep = audit.audit_messages(args.instances, max_n=min(args.max_n, 6), seed=args.seed)
        elif name == "cap":
            rep = audit.audit_cap(args.instances, max_n=args.max_n, seed=args.seed)
        else:
            rep = audit.audit_reassign(max_k=min(args.max_n, 6), instances=args.instances,
                                       seed=args.seed)
        print(json.dumps(rep.as_dict()))
        ok &= rep.passed
    return 0 if ok else 1


# -- parser --------------------------------------------------------------------

def _add_common(p, with_data=True):
    if with_data:
        p.add_argument("--data", required=True, help="dataset CSV (or prefix)")
        p.add_argument("--labels", help="ground-truth labels JSON (default: sidecar)")
    p.add_argument("--alg", choices=ALGORITHMS, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--gamma", type=float, default=-4.0)
    p.add_argument("--damping", type=float, default=0.65)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--subset-size", type=int, default=150)
    p.add_argument("--metric", choices=("unsquared", "squared"))
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--max-alternations", type=int, default=100)
    p.add_argument("--gradient-steps", type=int, default=10)
    _add_g(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")


def _add_g(p):
    p.add_argument("--g", choices=("sum", "mean", "max", "bilinear"), default="sum")
    p.add_argument("--g-weights", help="bilinear weights JSON")
    p.add_argument("--g-seed", type=int, default=0)


def _add_synth(p):
    p.add_argument("--l", type=int, default=5)
    p.add_argument("--per-cluster", type=int, default=10)
    p.add_argument("--p", type=int, default=8)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="compclust", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset pair")
    _add_synth(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--unbalanced", action="store_true")
    _add_g(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="cluster one dataset")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score label files against ground truth")
    p.add_argument("pred", nargs="+", help="RunResult JSON or label-list JSON")
    p.add_argument("--truth", help="ground-truth labels JSON")
    p.add_argument("--table", help="write CRI/ARI tables CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-search one hyperparameter on synthetic trials")
    _add_common(p, with_data=False)
    _add_synth(p)
    p.add_argument("--param", required=True,
                   choices=("gamma", "damping", "tau", "k", "threshold", "restarts", "lr"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="timing versus n")
    _add_common(p, with_data=False)
    p.add_argument("--ns", default="50,100,200,400")
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--iterations", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="compare fast paths against the oracles")
    p.add_argument("--suite", choices=("cap", "maxes", "alpha", "reassign", "all"),
                   default="all")
    p.add_argument("--max-n", type=int, default=8)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)   # exits 2 on usage errors
    try:
        return args.func(args)
    except Exception as exc:  # report any runtime failure as JSON
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("line", "field"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

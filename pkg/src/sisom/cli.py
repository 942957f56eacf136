"""Command-line entry point: ``sisom <subcommand> --config cfg.json --out-dir run/``.

Exit code 1 means a usage or config error; 2 means the run itself failed.

Run directory layout::

    config.snapshot.json   validated config
    manifest.json          config hash, seed, versions, wall clock, file hashes
    checkpoints/           model files
    metrics/               score tables, OOD results, histograms, audits
    curves/                AL learning curves and pool membership
    data/                  generated CSVs (gen-data)
"""
import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from importlib.metadata import PackageNotFoundError, version as _pkg_version

import numpy as np

from . import __version__, comparison, config as cfgmod, data, kernels
from .active import run_cycles
from .errors import ConfigError, SisomError
from .experiment import (al_config_for, benchmark_for, load_datasets, steepness_for, train_model)
from .nn import accuracy, load_model, save_model
from .ood import evaluate_checkpoint, run_benchmark
from .scoring import score_batch
from .steepness import SteepnessSearchSpace, optimize, save_table

log = logging.getLogger("sisom")

SUBCOMMANDS = ("gen-data", "train", "score", "al-run", "ood-eval", "optimize-steepness", "subset",
               "life-cycle")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


class Run:
    """Output directory bookkeeping; every written file ends up in the manifest."""

    def __init__(self, out_dir, cfg, command):
        self.root = out_dir
        self.cfg = cfg
        self.command = command
        self.files = []
        self.t0 = time.perf_counter()
        for sub in ("checkpoints", "metrics", "curves"):
            os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
        self.write_text("config.snapshot.json", json.dumps(cfg.model_dump(mode="json"), indent=2,
                                                           sort_keys=True) + "\n")

    def path(self, rel):
        full = os.path.join(self.root, rel)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        if rel not in self.files:
            self.files.append(rel)
        return full

    def write_text(self, rel, text):
        with open(self.path(rel), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def write_json(self, rel, obj):
        self.write_text(rel, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_csv(self, rel, header, rows):
        with open(self.path(rel), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    def finish(self):
        digests = {}
        for rel in sorted(self.files):
            with open(os.path.join(self.root, rel), "rb") as fh:
                digests[rel] = hashlib.sha256(fh.read()).hexdigest()
        manifest = {"command": self.command, "config_hash": self.cfg.hash(), "seed": self.cfg.seed,
                    "versions": {"sisom": __version__, "python": platform.python_version(),
                                 "numpy": np.__version__, "numba": _dist_version("numba")},
                    "kernel_backend": kernels.backend(),
                    "wall_clock_s": round(time.perf_counter() - self.t0, 6), "files": digests}
        with open(os.path.join(self.root, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _dist_version(name):
    try:
        return _pkg_version(name)
    except PackageNotFoundError:
        return None


def _g(v):
    return f"{float(v):.17g}"


def _model(args, cfg, train_ds):
    if getattr(args, "model", None):
        return load_model(args.model)
    return train_model(cfg, train_ds)


def _write_histograms(run, hists):
    for scorer, ckpt, name, edges, ind_c, ood_c in hists:
        run.write_csv(f"metrics/hist_{ckpt}_{scorer}_{name}.csv",
                      ["bin_left", "bin_right", "ind_count", "ood_count"],
                      [[_g(edges[i]), _g(edges[i + 1]), int(ind_c[i]), int(ood_c[i])]
                       for i in range(len(ind_c))])


def cmd_gen_data(args, cfg, run):
    train_ds, test_ds, oods = load_datasets(cfg)
    data.save_csv(train_ds, run.path("data/train.csv"))
    data.save_csv(test_ds, run.path("data/test.csv"))
    for name, _, ds in oods:
        data.save_csv(ds, run.path(f"data/ood_{name}.csv"))


def cmd_train(args, cfg, run):
    train_ds, test_ds, _ = load_datasets(cfg)
    model = train_model(cfg, train_ds)
    save_model(model, run.path("checkpoints/model.mlp"))
    run.write_json("metrics/train.json", {
        "train_accuracy": accuracy(model, train_ds.features, train_ds.labels),
        "test_accuracy": accuracy(model, test_ds.features, test_ds.labels) if len(test_ds) else None,
        "final_loss": model.loss_history[-1] if model.loss_history else None,
        "epochs": cfg.train.epochs})


def _comparison_set(cfg, model, train_ds):
    cset = comparison.build(model, train_ds.features, train_ds.labels, steepness_for(cfg),
                            train_ds.ids, cfg.scorer.class_source)
    if cfg.subset.enabled:
        radius = None if cfg.subset.radius == "auto-median-nn" else cfg.subset.radius
        cset = comparison.reduce(cset, radius, cfg.subset.fraction)
    return cset


def cmd_score(args, cfg, run):
    train_ds, test_ds, oods = load_datasets(cfg)
    model = _model(args, cfg, train_ds)
    cset = _comparison_set(cfg, model, train_ds)
    targets = [("test", test_ds)] + [(n, d) for n, _, d in oods]
    if args.input:
        targets = [(os.path.splitext(os.path.basename(args.input))[0], data.load_csv(args.input))]
    r_avg = None
    for name, ds in targets:
        b = score_batch(model, steepness_for(cfg), cset, ds.features, cfg.scorer.mode,
                        cfg.scorer.r_avg_override, ds.ids, cfg.scorer.standardize)
        r_avg = b.r_avg
        run.write_csv(f"metrics/scores_{name}.csv",
                      ["sample_id", "pseudo_class", "d_in", "d_out", "r", "r_ood", "energy", "fused"],
                      [[int(b.sample_id[i]), int(b.pseudo_class[i])]
                       + [_g(v[i]) for v in (b.d_in, b.d_out, b.r, b.r_ood, b.energy, b.fused)]
                       for i in range(len(b))])
        run.write_json(f"metrics/scores_{name}.json", {
            "mode": cfg.scorer.mode, "r_avg": r_avg, "r_avg_source":
                "override" if cfg.scorer.r_avg_override is not None else "separability",
            "config_hash": cfg.hash(), "ind_score": "r_ood" if cfg.scorer.mode == "sisom" else "-fused",
            "n": len(b)})


def cmd_ood_eval(args, cfg, run):
    train_ds, test_ds, oods = load_datasets(cfg)
    model = _model(args, cfg, train_ds)
    bench = benchmark_for(cfg, test_ds, oods)
    rows, hists, _ = evaluate_checkpoint(model, train_ds.features, train_ds.labels, bench)
    run.write_json("metrics/ood_results.json", {"config_hash": cfg.hash(), "results": rows,
                                                "ind_score": _orientation()})
    _write_histograms(run, hists)


def _orientation():
    return {"sisom": "r_ood", "sisome": "-fused", "energy": "-energy"}


def _curve_rows(state, cfg):
    return [[h.cycle, len(h.labeled_ids), cfg.al.strategy, cfg.seed, _g(h.test_accuracy), _g(h.r_avg),
             f"{h.wall_clock_s:.6f}"] for h in state.history]


def _run_al(cfg, run):
    train_ds, test_ds, oods = load_datasets(cfg)
    state, models = run_cycles(train_ds, test_ds, al_config_for(cfg),
                               checkpoint_dir=os.path.join(run.root, "checkpoints"))
    for c in range(1, len(models)):
        run.path(f"checkpoints/cycle_{c:03d}.mlp")
    run.write_csv("curves/learning_curve.csv",
                  ["cycle", "labeled_size", "strategy", "seed", "test_accuracy", "r_avg", "wall_clock_s"],
                  _curve_rows(state, cfg))
    run.write_json("curves/pools.json", {"cycles": [
        {"cycle": h.cycle, "labeled_ids": h.labeled_ids.tolist(), "queried": h.queried.tolist(),
         "query_mean_r": None if np.isnan(h.query_mean_r) else h.query_mean_r} for h in state.history]})
    return train_ds, test_ds, oods, state, models


def cmd_al_run(args, cfg, run):
    _run_al(cfg, run)


def cmd_life_cycle(args, cfg, run):
    train_ds, test_ds, oods, state, models = _run_al(cfg, run)
    pos = {int(i): k for k, i in enumerate(train_ds.ids)}
    mode = "sisome" if args.scorer is None else args.scorer
    bench = benchmark_for(cfg, test_ds, oods, mode=mode)
    ckpts = []
    for h in state.history[1:]:
        rows = np.array([pos[int(i)] for i in h.labeled_ids])
        ckpts.append((f"cycle_{h.cycle:03d}", models[h.cycle], train_ds.features[rows],
                      train_ds.labels[rows]))
    results, hists = run_benchmark(ckpts, bench)
    blocks = []
    for h, (name, *_rest) in zip(state.history[1:], ckpts):
        blocks.append({"cycle": h.cycle, "checkpoint": name, "labeled_size": int(len(h.labeled_ids)),
                       "test_accuracy": h.test_accuracy,
                       "rows": [r for r in results if r["checkpoint"] == name]})
    run.write_json("metrics/life_cycle.json", {"config_hash": cfg.hash(), "scorer": mode,
                                               "baseline": "energy", "ind_score": _orientation(),
                                               "cycles": blocks})
    _write_histograms(run, hists)


def cmd_optimize_steepness(args, cfg, run):
    if cfg.steepness.search is None:
        raise ConfigError("optimize-steepness needs steepness.search")
    train_ds, _, _ = load_datasets(cfg)
    model = _model(args, cfg, train_ds)
    space = SteepnessSearchSpace(tuple(tuple(l) for l in cfg.steepness.search), cfg.steepness.monotone)
    best, table = optimize(model, train_ds.features, train_ds.labels, space, cfg.scorer.class_source)
    save_table(table, run.path("metrics/steepness_search.csv"))
    run.write_json("metrics/steepness_best.json", {"alpha": list(best.alpha),
                                                   "r_avg": min(r for _, r in table),
                                                   "n_candidates": len(table)})


def cmd_subset(args, cfg, run):
    train_ds, _, _ = load_datasets(cfg)
    model = _model(args, cfg, train_ds)
    full = comparison.build(model, train_ds.features, train_ds.labels, steepness_for(cfg), train_ds.ids,
                            cfg.scorer.class_source)
    radius = None if cfg.subset.radius == "auto-median-nn" else cfg.subset.radius
    reduced = comparison.reduce(full, radius, cfg.subset.fraction)
    comparison.save_csv(reduced, run.path("metrics/comparison_set.csv"))
    rad = reduced.radius if not isinstance(reduced.radius, dict) else {str(k): v for k, v in reduced.radius.items()}
    run.write_json("metrics/subset.json", {
        "fraction": cfg.subset.fraction, "radius": rad, "full_size": len(full), "reduced_size": len(reduced),
        "per_class": {str(c): int(len(i)) for c, i in reduced.by_class.items()}})


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "score": cmd_score, "al-run": cmd_al_run,
            "ood-eval": cmd_ood_eval, "optimize-steepness": cmd_optimize_steepness, "subset": cmd_subset,
            "life-cycle": cmd_life_cycle}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out-dir", default="run", help="run directory (default: ./run)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, value parsed as JSON when possible")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="sisom", description="SISOM active learning and OOD detection")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("score", "ood-eval", "optimize-steepness", "subset"):
            p.add_argument("--model", help="use this checkpoint instead of training")
        if name == "score":
            p.add_argument("--input", help="CSV of samples to score (default: test + OOD sets)")
        if name == "life-cycle":
            p.add_argument("--scorer", choices=("sisom", "sisome", "energy"),
                           help="scorer for the OOD phase (default: sisome)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "sisom: error: a subcommand is required")
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load(args.config, args.override, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        run = Run(args.out_dir, cfg, args.command)
        COMMANDS[args.command](args, cfg, run)
        run.finish()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SisomError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

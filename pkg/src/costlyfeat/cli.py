"""Command-line front end.

Subcommands: train, evaluate, benchmark, rules, inspect-checkpoint,
make-synthetic. Settings come from built-in defaults, then an optional TOML
config file (``--config``), then command-line flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import data, metrics, net, rules, synthetic
from .errors import CostlyFeatError
from .pipeline import SWEEP_LAMBDAS, RunConfig, manifest, prepare, run, summarize

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("costlyfeat")


def _floats(text):
    return tuple(float(x) for x in text.split(","))


def _delta(text):
    return text if text == "auto" else float(text)


def _add_run_flags(p):
    # defaults stay None so that file values are only overridden by explicit flags
    g = p.add_argument_group("data")
    g.add_argument("--dataset", help="CSV file (header row, optional #costs row)")
    g.add_argument("--label-column", dest="label_column")
    g.add_argument("--costs", choices=["random", "file"],
                   help="feature costs: uniform random in [cost-lo, cost-hi] or the CSV #costs row")
    g.add_argument("--cost-lo", dest="cost_lo", type=float)
    g.add_argument("--cost-hi", dest="cost_hi", type=float)
    g.add_argument("--split", type=_floats, help="train,val,test fractions (default 0.6,0.2,0.2)")
    g.add_argument("--unbalance", type=float,
                   help="delete minority rows until this minority proportion is reached")
    g.add_argument("--minority-class", dest="minority_class", type=int)
    g = p.add_argument_group("reward")
    g.add_argument("--lambda", dest="lam", type=float, help="cost scale (default 0.01)")
    g.add_argument("--delta", type=_delta, help="majority-class reward weight or 'auto'")
    g.add_argument("--gamma", type=float)
    g.add_argument("--t-max", dest="t_max", type=int)
    g = p.add_argument_group("training")
    g.add_argument("--seed", type=int)
    g.add_argument("--hidden", type=int, help="trunk width (default 256)")
    g.add_argument("--a2c-epochs", dest="a2c_epochs", type=int)
    g.add_argument("--a2c-lr", dest="a2c_lr", type=float)
    g.add_argument("--entropy-weight", dest="entropy_weight", type=float)
    g.add_argument("--value-loss-weight", dest="value_loss_weight", type=float)
    g.add_argument("--eval-every", dest="eval_every", type=int)
    g.add_argument("--skip-mcts", dest="skip_mcts", action="store_const", const=True)
    g.add_argument("--mcts-sims", dest="mcts_sims", type=int)
    g.add_argument("--c-puct", dest="c_puct", type=float)
    g.add_argument("--mcts-iterations", dest="mcts_iterations", type=int)
    g.add_argument("--samples-per-iteration", dest="samples_per_iteration", type=int)
    g.add_argument("--mcts-lr", dest="mcts_lr", type=float)
    g.add_argument("--mcts-batch-size", dest="mcts_batch_size", type=int)
    g.add_argument("--mcts-train-epochs", dest="mcts_train_epochs", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--no-visit-log", dest="visit_log", action="store_const", const=False)
    g.add_argument("--rule-sims", dest="rule_sims", type=int,
                   help="simulations per decision for the rule visit log (default: --mcts-sims)")
    p.add_argument("--config", help="TOML file with the same keys as the flags (underscored)")
    p.add_argument("--out", help="output directory")


def load_config(args) -> RunConfig:
    merged = {}
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            merged.update(tomllib.load(fh))
    for key in RunConfig.keys():
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    return RunConfig.from_mapping(merged)


def cmd_train(args):
    cfg = load_config(args)
    res = run(cfg)
    print(json.dumps({"out": cfg.out, "test": asdict(res.report)}, sort_keys=True))
    return 0


def _load_run(run_dir):
    run_dir = Path(run_dir)
    doc = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    return RunConfig.from_mapping(doc["config"])


def cmd_evaluate(args):
    cfg = _load_run(args.run)
    prep = prepare(cfg)
    ckpt = Path(args.checkpoint) if args.checkpoint else Path(args.run) / "checkpoint.ckpt"
    theta, _ = net.load_checkpoint(ckpt)
    if args.dataset:
        pre = json.loads((Path(args.run) / "preprocess.json").read_text(encoding="utf-8"))
        ds = data.load_csv(args.dataset, cfg.label_column, cost_row=None)
        ds = ds.with_costs(pre["costs"])
        ds = data.apply_normalization(ds, data.NormStats(np.array(pre["mean"]), np.array(pre["std"])))
        name = args.dataset
    else:
        ds = {"train": prep.train, "val": prep.val, "test": prep.test}[args.split]
        name = f"{cfg.dataset}:{args.split}"
    rep = metrics.evaluate(theta, ds, prep.reward)
    if args.results:
        metrics.append_result(args.results, name, cfg.lam, cfg.seed, rep)
    print(rep.to_json())
    return 0


def cmd_benchmark(args):
    base = load_config(args)
    lambdas = args.lambdas or (base.lam,)
    out = Path(base.out)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "results.csv"
    if table.exists():
        table.unlink()
    rows, failures = [], []
    for lam in lambdas:
        for seed in range(1, args.repeats + 1):
            cfg = replace(base, lam=lam, seed=seed, out=str(out / f"lam{lam:g}_seed{seed}"),
                          visit_log=False)
            try:
                res = run(cfg, write=args.keep_runs)
            except CostlyFeatError as exc:
                failures.append({"lambda": lam, "seed": seed, "error": str(exc)})
                log.error("lambda=%g seed=%d failed: %s", lam, seed, exc)
                continue
            metrics.append_result(table, base.dataset, lam, seed, res.report)
            rows.append({"lambda": lam, "seed": seed, **asdict(res.report)})
    summary = {
        "manifest": manifest(base),
        "repeats": args.repeats,
        "lambdas": list(lambdas),
        "per_lambda": {repr(lam): summarize([r for r in rows if r["lambda"] == lam])
                       for lam in lambdas},
        "failures": failures,
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                                      encoding="utf-8")
    print(json.dumps(summary["per_lambda"], sort_keys=True))
    return 0 if rows else 1


def cmd_rules(args):
    tree = rules.aggregate_file(args.visit_log, args.bins, args.min_visits, args.count_mode)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    rules.export(tree, prefix.with_suffix(".dot"), "dot")
    rules.export(tree, prefix.with_suffix(".json"), "json")
    print(json.dumps({"nodes": sum(1 for _ in tree.nodes()),
                      "dot": str(prefix.with_suffix(".dot")),
                      "json": str(prefix.with_suffix(".json"))}))
    return 0


def cmd_inspect(args):
    theta, header = net.load_checkpoint(args.checkpoint)
    info = dict(header)
    info["param_count"] = int(theta.flat.size)
    info["param_norm"] = float(np.linalg.norm(theta.flat))
    print(json.dumps(info, sort_keys=True, indent=2))
    return 0


SYNTHETIC = {
    "single": synthetic.single_informative,
    "redundant": synthetic.redundant_informative,
    "binary-and": synthetic.binary_and,
    "gaussian": synthetic.gaussian_binary,
}


def cmd_make_synthetic(args):
    ds = SYNTHETIC[args.kind](n=args.n, seed=args.seed)
    data.save_csv(ds, args.out)
    print(json.dumps({"out": args.out, "n": ds.n, "p": ds.p, "K": ds.class_count}))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="costlyfeat",
        description="Cost-sensitive feature acquisition with actor-critic and neural MCTS.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train A2C then improve with MCTS; write artifacts")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a trained run")
    p.add_argument("--run", required=True, help="run directory written by `train`")
    p.add_argument("--checkpoint", help="checkpoint file (default: RUN/checkpoint.ckpt)")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--dataset", help="evaluate this CSV with the run's costs and normalization")
    p.add_argument("--results", help="append a row to this results table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="repeat split/train/evaluate over seeds and lambdas")
    _add_run_flags(p)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--lambdas", type=_floats,
                   help=f"comma-separated lambda sweep, e.g. {','.join(map(str, SWEEP_LAMBDAS))}")
    p.add_argument("--keep-runs", action="store_true", help="write per-seed artifacts too")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("rules", help="extract a decision-rule tree from a visit log")
    p.add_argument("--visit-log", required=True)
    p.add_argument("--min-visits", type=int, default=50)
    p.add_argument("--bins", type=int, default=3)
    p.add_argument("--count-mode", choices=["trajectories", "simulations"], default="trajectories")
    p.add_argument("--out", default="rules", help="output prefix; writes PREFIX.dot and PREFIX.json")
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("inspect-checkpoint", help="print a checkpoint header")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("make-synthetic", help="write a synthetic dataset CSV")
    p.add_argument("--kind", choices=sorted(SYNTHETIC), default="redundant")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "benchmark" and args.repeats < 1:
        parser.error("--repeats must be >= 1")
    try:
        return args.func(args)
    except (CostlyFeatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end experiment runs: data preparation, actor-critic, search improvement, evaluation."""
from __future__ import annotations

import json
import logging
import platform
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, a2c, data, env, kernels, mcts, metrics, net

log = logging.getLogger(__name__)

SWEEP_LAMBDAS = (1.0, 0.1, 0.01, 0.001)


def substream(seed: int, name: str) -> int:
    """Independent integer seed for a named component of a run."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


@dataclass
class RunConfig:
    dataset: str | None = None
    label_column: str | None = None
    costs: str = "random"            # "random" or "file"
    cost_lo: float = 0.1
    cost_hi: float = 1.0
    lam: float = 0.01
    delta: str | float = "auto"
    gamma: float = 1.0
    t_max: int | None = None
    minority_class: int | None = None
    unbalance: float | None = None
    split: tuple = (0.6, 0.2, 0.2)
    seed: int = 1
    hidden: int = 256
    a2c_epochs: int = 200
    a2c_lr: float = 1e-3
    entropy_weight: float = 0.01
    value_loss_weight: float = 1.0
    eval_every: int = 1
    skip_mcts: bool = False
    mcts_sims: int = 200
    c_puct: float = 1.5
    mcts_iterations: int = 20
    samples_per_iteration: int = 512
    mcts_lr: float = 1e-3
    mcts_batch_size: int = 32
    mcts_train_epochs: int = 4
    patience: int = 3
    visit_log: bool = True
    rule_sims: int | None = None
    out: str = "runs/latest"
    extra: dict = field(default_factory=dict)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls) if f.name != "extra"]

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = set(cls.keys())
        aliases = {"lambda": "lam"}
        kw, extra = {}, {}
        for k, v in mapping.items():
            k = aliases.get(k.replace("-", "_"), k.replace("-", "_"))
            (kw if k in known else extra)[k] = v
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**kw)
        cfg.split = tuple(float(x) for x in cfg.split)
        if cfg.delta != "auto":
            cfg.delta = float(cfg.delta)
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d["split"] = list(self.split)
        return d


@dataclass
class PreparedData:
    train: data.Dataset
    val: data.Dataset
    test: data.Dataset
    stats: data.NormStats
    costs: np.ndarray
    reward: env.RewardConfig


def prepare(cfg: RunConfig, ds: data.Dataset | None = None) -> PreparedData:
    if ds is None:
        if not cfg.dataset:
            raise ValueError("no dataset given")
        ds = data.load_csv(cfg.dataset, cfg.label_column, cost_row=None)
    if cfg.costs == "random":
        ds = ds.with_costs(data.assign_random_costs(ds.p, cfg.cost_lo, cfg.cost_hi,
                                                    substream(cfg.seed, "costs")))
    elif cfg.costs != "file":
        raise ValueError(f"costs must be 'random' or 'file', got {cfg.costs!r}")
    if cfg.unbalance is not None:
        minority = 1 if cfg.minority_class is None else cfg.minority_class
        ds = data.make_unbalanced(ds, minority, cfg.unbalance, substream(cfg.seed, "unbalance"))
    spec = data.SplitSpec(*cfg.split, seed=substream(cfg.seed, "split"))
    tr, va, te = data.split(ds, spec)
    tr, (va, te), stats = data.normalize(tr, [va, te])
    minority = cfg.minority_class
    if minority is None and cfg.unbalance is not None:
        minority = 1
    rc = env.resolve_reward_config(tr, cfg.lam, cfg.delta, cfg.gamma, minority, cfg.t_max)
    return PreparedData(tr, va, te, stats, ds.costs, rc)


def a2c_config(cfg: RunConfig, rc) -> a2c.A2CConfig:
    return a2c.A2CConfig(epochs=cfg.a2c_epochs, lr=cfg.a2c_lr, entropy_weight=cfg.entropy_weight,
                         value_loss_weight=cfg.value_loss_weight, hidden=cfg.hidden,
                         eval_every=cfg.eval_every, seed=substream(cfg.seed, "a2c"), reward=rc)


def mcts_config(cfg: RunConfig, rc, simulations=None) -> mcts.MCTSConfig:
    return mcts.MCTSConfig(simulations=simulations or cfg.mcts_sims, c_puct=cfg.c_puct,
                           samples_per_iteration=cfg.samples_per_iteration,
                           iterations=cfg.mcts_iterations, lr=cfg.mcts_lr,
                           batch_size=cfg.mcts_batch_size, train_epochs=cfg.mcts_train_epochs,
                           value_loss_weight=cfg.value_loss_weight, patience=cfg.patience,
                           seed=substream(cfg.seed, "mcts"), reward=rc)


@dataclass
class RunResult:
    theta: net.NetworkParams
    theta_a2c: net.NetworkParams
    a2c_log: list
    mcts_log: list
    report: metrics.EvalReport
    report_a2c: metrics.EvalReport
    prepared: PreparedData
    visit_records: list | None = None


def run(cfg: RunConfig, ds: data.Dataset | None = None, write=True) -> RunResult:
    """Actor-critic training, then search improvement unless ``cfg.skip_mcts``.

    With ``write`` the artifacts listed in the README land in ``cfg.out``.
    """
    prep = prepare(cfg, ds)
    rc = prep.reward
    theta_a2c, a2c_log = a2c.train(prep.train, prep.val, a2c_config(cfg, rc))
    mcfg = mcts_config(cfg, rc)
    if cfg.skip_mcts:
        theta, mcts_log = theta_a2c, []
    else:
        theta, mcts_log = mcts.improve(theta_a2c, prep.train, prep.val, mcfg)
    report_a2c = metrics.evaluate(theta_a2c, prep.test, rc)
    report = report_a2c if cfg.skip_mcts else metrics.evaluate(theta, prep.test, rc)
    records = None
    if cfg.visit_log:
        rcfg = mcts_config(cfg, rc, simulations=cfg.rule_sims)
        records = mcts.collect_visit_log(prep.train, theta, rcfg)
    result = RunResult(theta, theta_a2c, a2c_log, mcts_log, report, report_a2c, prep, records)
    if write:
        write_artifacts(cfg, result)
    return result


def manifest(cfg: RunConfig, prep: PreparedData | None = None) -> dict:
    doc = {
        "package": "costlyfeat",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
        "config": cfg.to_dict(),
        "seeds": {name: substream(cfg.seed, name)
                  for name in ("costs", "unbalance", "split", "a2c", "mcts")},
    }
    if prep is not None:
        doc["reward"] = asdict(prep.reward)
        doc["n"] = {"train": prep.train.n, "val": prep.val.n, "test": prep.test.n}
    return doc


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_artifacts(cfg: RunConfig, res: RunResult):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prep = res.prepared
    _dump(manifest(cfg, prep), out / "manifest.json")
    _dump({
        "feature_names": list(prep.train.feature_names),
        "class_names": list(prep.train.class_names),
        "costs": [float(c) for c in prep.costs],
        "mean": [float(v) for v in prep.stats.mean],
        "std": [float(v) for v in prep.stats.std],
        "reward": asdict(prep.reward),
    }, out / "preprocess.json")
    a2c.dump_log(res.a2c_log, out / "a2c_log.jsonl")
    a2c.dump_log(res.mcts_log, out / "mcts_log.jsonl")
    net.save_checkpoint(res.theta_a2c, out / "checkpoint_a2c.ckpt", {"stage": "a2c"})
    stage = "a2c" if cfg.skip_mcts else "mcts"
    net.save_checkpoint(res.theta, out / "checkpoint.ckpt", {"stage": stage})
    _dump({"test": asdict(res.report), "test_a2c": asdict(res.report_a2c)}, out / "report.json")
    if res.visit_records is not None:
        mcts.write_visit_log(res.visit_records, out / "visit_log.jsonl", prep.train)


def summarize(rows):
    """Mean and population std of the numeric result columns."""
    out = {}
    for key in ("accuracy", "mean_cost", "auc", "objective"):
        vals = [r[key] for r in rows if r.get(key) is not None]
        if vals:
            out[key] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "n": len(vals)}
    return out

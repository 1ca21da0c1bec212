"""Policy evaluation: accuracy, acquisition cost, AUC and the accuracy/cost objective."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .rollout import play

RESULT_COLUMNS = ("dataset", "lambda", "seed", "accuracy", "mean_cost", "auc", "objective")


@dataclass
class EvalReport:
    """Greedy-policy evaluation of one dataset.

    ``selection_objective`` weighs each row's correctness like the terminal
    reward (minority rows 1, majority rows delta) before subtracting
    lambda * mean_cost; it equals ``objective`` when the reward is unweighted
    and is what training uses to pick checkpoints.
    """

    accuracy: float
    mean_cost: float
    auc: float | None
    objective: float
    confusion: list
    mean_features: float
    n: int
    lam: float
    selection_objective: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied scores count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(theta, ds, rc, positive_class=None) -> EvalReport:
    """Greedy rollouts over every row of ``ds``.

    For binary tasks the AUC score of a row is the probability of
    Classify(positive) renormalized over the two Classify actions, taken
    at the state where the policy stopped. ``positive_class`` defaults to
    the reward config's minority class, else class 1.
    """
    if theta.p != ds.p or theta.K != ds.class_count:
        raise ValidationError(
            f"network expects (p={theta.p}, K={theta.K}), dataset has {ds.shape}")
    K = ds.class_count
    if positive_class is None:
        positive_class = 1 if rc.minority_class is None else rc.minority_class
    confusion = np.zeros((K, K), dtype=np.int64)
    costs = np.zeros(ds.n)
    n_feat = np.zeros(ds.n)
    scores = np.zeros(ds.n)
    correct = np.zeros(ds.n)
    for i in range(ds.n):
        res = play(ds, i, theta, rc, mode="greedy")
        confusion[ds.y[i], res.prediction] += 1
        correct[i] = res.prediction == ds.y[i]
        costs[i] = res.final_state.accumulated_cost
        n_feat[i] = res.final_state.t
        if K == 2:
            cls = res.probs[ds.p:]
            tot = cls.sum()
            scores[i] = cls[positive_class] / tot if tot > 0 else 0.5
    accuracy = float(np.trace(confusion) / ds.n)
    mean_cost = float(costs.mean())
    if rc.majority_weight == 1.0:
        weighted = accuracy
    else:
        w = np.where(ds.y == rc.minority_class, 1.0, rc.delta)
        weighted = float((w * correct).sum() / w.sum())
    score_auc = None
    if K == 2 and 0 < np.sum(ds.y == positive_class) < ds.n:
        score_auc = auc(scores, (ds.y == positive_class).astype(int))
    return EvalReport(
        accuracy=accuracy,
        mean_cost=mean_cost,
        auc=score_auc,
        objective=accuracy - rc.lam * mean_cost,
        confusion=confusion.tolist(),
        mean_features=float(n_feat.mean()),
        n=ds.n,
        lam=rc.lam,
        selection_objective=weighted - rc.lam * mean_cost,
    )


def append_result(path, dataset, lam, seed, report: EvalReport):
    """Append one row to a results table, writing the header for a new file."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(RESULT_COLUMNS)
        w.writerow([dataset, repr(float(lam)), seed, repr(report.accuracy),
                    repr(report.mean_cost), "" if report.auc is None else repr(report.auc),
                    repr(report.objective)])

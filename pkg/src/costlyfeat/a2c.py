"""On-policy advantage actor-critic training of the shared network.

One epoch is one pass over the shuffled training rows with one episode per
row. Gradients are accumulated over an episode and applied once at its end.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import net
from .env import RewardConfig
from .errors import DivergenceError
from .metrics import evaluate
from .rollout import Transition, run_episode  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)

DIVERGENCE_TD = 1e3


@dataclass
class A2CConfig:
    epochs: int = 200
    lr: float = 1e-3
    entropy_weight: float = 0.01
    value_loss_weight: float = 1.0
    hidden: int = 256
    eval_every: int = 1
    seed: int = 0
    reward: RewardConfig = field(default_factory=RewardConfig)

    @property
    def gamma(self):
        return self.reward.gamma


def td_errors(episode, theta, gamma) -> np.ndarray:
    """r_t + gamma * v(s_{t+1}) * (1 - done) - v(s_t) for every transition."""
    X = np.array([tr.state_vec for tr in episode] + [episode[-1].next_state_vec])
    legal = np.array([tr.legal for tr in episode] + [episode[-1].next_legal])
    v = net.forward_batch(theta, X, legal).values
    r = np.array([tr.reward for tr in episode])
    done = np.array([tr.done for tr in episode], dtype=np.float64)
    return r + gamma * v[1:] * (1.0 - done) - v[:-1]


def episode_gradient(theta, episode, td, cfg: A2CConfig):
    batch = [net.A2CSample(tr.state_vec, tr.legal, tr.action, float(d), cfg.entropy_weight)
             for tr, d in zip(episode, td)]
    return net.a2c_gradient(theta, batch, cfg.value_loss_weight)


def train(ds_train, ds_val, cfg: A2CConfig, theta=None):
    """Train from ``theta`` (fresh init when None).

    Returns ``(best_theta, log)`` where the log holds one dict per epoch and
    ``best_theta`` maximizes the validation selection objective, i.e.
    accuracy - lambda * mean cost with rows weighted like the terminal
    reward (earliest epoch wins ties).
    """
    rc = cfg.reward
    rng_init, rng_ep = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    if theta is None:
        theta = net.init(ds_train.p, ds_train.class_count, cfg.hidden,
                         seed=int(rng_init.integers(2**31)))
    opt = net.AdamState.zeros(theta)
    records = []
    best, best_obj = theta.copy(), -np.inf
    for epoch in range(1, cfg.epochs + 1):
        total_reward, abs_td, n_steps, ent = 0.0, 0.0, 0, 0.0
        for row in rng_ep.permutation(ds_train.n):
            episode = run_episode(ds_train, int(row), theta, rc, rng_ep, "stochastic")
            td = td_errors(episode, theta, rc.gamma)
            grad = episode_gradient(theta, episode, td, cfg)
            theta, opt = net.apply_update(theta, grad, opt, cfg.lr)
            total_reward += sum(tr.reward for tr in episode)
            abs_td += float(np.abs(td).sum())
            n_steps += len(episode)
            ent += float(net.entropy(np.array([tr.probs for tr in episode]),
                                     np.array([tr.legal for tr in episode])).sum())
        mean_abs_td = abs_td / n_steps
        if not np.isfinite(mean_abs_td) or mean_abs_td > DIVERGENCE_TD:
            raise DivergenceError(
                f"A2C diverged at epoch {epoch}: mean |td| = {mean_abs_td:.3g}",
                {"epoch": epoch, "mean_abs_td": mean_abs_td,
                 "param_norm": float(np.linalg.norm(theta.flat))})
        rec = {"epoch": epoch, "mean_reward": total_reward / ds_train.n,
               "entropy": ent / n_steps, "mean_abs_td": mean_abs_td}
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            rep = evaluate(theta, ds_val, rc)
            rec.update(val_accuracy=rep.accuracy, val_mean_cost=rep.mean_cost,
                       val_objective=rep.objective, val_selection=rep.selection_objective)
            if rep.selection_objective > best_obj:
                best, best_obj = theta.copy(), rep.selection_objective
        log.debug("a2c %s", rec)
        records.append(rec)
    return best, records


def dump_log(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

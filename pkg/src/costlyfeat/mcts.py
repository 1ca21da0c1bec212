"""Neural Monte Carlo tree search as a policy-improvement operator.

Each training sample gets its own search tree over the acquisition MDP.
Edges carry the instant reward of their action (``-lambda * c_i`` for an
acquisition, the terminal reward for a Classify), and edge Q values are
running means of the discounted return ``G = r + gamma * G_child`` seen
through the edge, so ``Q(s, a) ~ R(s, a) + gamma * V(s')`` at every depth.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import env, kernels, net
from .errors import DivergenceError
from .metrics import evaluate

log = logging.getLogger(__name__)

VISIT_LOG_SCHEMA = "costlyfeat.visitlog/1"


@dataclass
class MCTSConfig:
    simulations: int = 200
    c_puct: float = 1.5
    samples_per_iteration: int = 512
    iterations: int = 20
    lr: float = 1e-3
    batch_size: int = 32
    train_epochs: int = 1
    value_loss_weight: float = 1.0
    patience: int = 3
    seed: int = 0
    reward: env.RewardConfig = field(default_factory=env.RewardConfig)

    def __post_init__(self):
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")
        if not self.c_puct > 0:
            raise ValueError("c_puct must be > 0")

    @property
    def gamma(self):
        return self.reward.gamma

    @property
    def t_max(self):
        return self.reward.t_max


class SearchNode:
    """Search-tree node with per-action edge statistics in flat arrays.

    ``Q``, ``N`` and ``prior`` have length p + K; only entries where
    ``legal`` is true are edges. A terminal node stands for the episode
    after a Classify and has no edges.
    """

    __slots__ = ("state", "legal", "prior", "Q", "N", "children", "rewards", "value",
                 "expanded", "terminal", "terminal_reward")

    def __init__(self, state, legal=None, terminal=False, terminal_reward=0.0):
        self.state = state
        self.legal = legal
        self.prior = None
        self.Q = None
        self.N = None
        self.children = {}
        self.rewards = {}
        self.value = None
        self.expanded = False
        self.terminal = terminal
        self.terminal_reward = terminal_reward

    @property
    def edges(self):
        """{action: (Q, N, prior)} for every legal action of an expanded node."""
        if not self.expanded or self.terminal:
            return {}
        return {int(a): (float(self.Q[a]), int(self.N[a]), float(self.prior[a]))
                for a in np.flatnonzero(self.legal)}

    @property
    def visits(self) -> int:
        return 0 if self.N is None else int(self.N.sum())


class SearchLabel(NamedTuple):
    state_vec: np.ndarray
    legal: np.ndarray
    pi: np.ndarray
    z: float


def q_bootstrap(r: float, gamma: float, v_next: float) -> float:
    return r + gamma * v_next


def puct_select(node: SearchNode, c: float) -> int:
    """argmax_a Q + c * prior * sqrt(sum_b N_b) / (N_a + 1) over legal actions.

    Before any visit the exploration term is zero everywhere, so the
    highest-prior action is taken. Ties go to the lowest action index.
    """
    return kernels.puct_select(node.Q, node.N, node.prior, node.legal, c)


def expand_and_evaluate(node: SearchNode, theta) -> float:
    """Attach priors and zeroed edge stats; return v(s) (terminal reward for terminals)."""
    if node.terminal:
        node.expanded = True
        node.value = node.terminal_reward
        return node.terminal_reward
    pv = net.forward(theta, node.state.encode(), node.legal)
    A = len(node.legal)
    node.prior = pv.probs
    node.Q = np.zeros(A)
    node.N = np.zeros(A, dtype=np.int64)
    node.value = pv.value
    node.expanded = True
    return pv.value


def backup(path, leaf_value: float, gamma: float):
    """Propagate a simulation result from the leaf back to the root.

    ``path`` lists ``(node, action, reward)`` from root to leaf. Walking
    upward, ``G <- reward + gamma * G`` (starting from ``leaf_value``) and
    the edge's N and running-mean Q absorb that G.
    """
    G = leaf_value
    for node, a, r in reversed(path):
        G = r + gamma * G
        kernels.update_edge(node.Q, node.N, a, G)


class DatasetModel:
    """Transition model of the acquisition MDP for rows of ``ds``."""

    def __init__(self, ds, rc: env.RewardConfig):
        self.ds = ds
        self.rc = rc

    def reset(self, row):
        return env.reset(self.ds, row)

    def legal(self, state):
        return env.legal_actions(state, self.ds, self.rc.t_max)

    def step(self, state, a):
        return env.step(state, a, self.ds, self.rc)


class Searcher:
    """Runs searches under a fixed network snapshot.

    ``model`` supplies ``reset(row)``, ``legal(state)`` and
    ``step(state, a) -> (next_state, reward, done)``; it defaults to the
    dataset MDP. States must provide ``encode()``.
    """

    def __init__(self, ds, theta, cfg: MCTSConfig, model=None):
        self.ds = ds
        self.theta = theta
        self.cfg = cfg
        self.rc = cfg.reward
        self.model = model if model is not None else DatasetModel(ds, cfg.reward)

    def root(self, row: int) -> SearchNode:
        s = self.model.reset(row)
        node = SearchNode(s, self.model.legal(s))
        expand_and_evaluate(node, self.theta)
        return node

    def child(self, node: SearchNode, a: int):
        """Existing or new child of ``node`` along ``a``; returns (child, reward, created)."""
        ch = node.children.get(a)
        if ch is not None:
            return ch, node.rewards[a], False
        nxt, r, done = self.model.step(node.state, a)
        if done:
            ch = SearchNode(node.state, terminal=True, terminal_reward=r)
        else:
            ch = SearchNode(nxt, self.model.legal(nxt))
        node.children[a] = ch
        node.rewards[a] = r
        return ch, r, True

    def simulate(self, root: SearchNode):
        """One select/expand/evaluate/backup pass. Returns the path length."""
        node, path = root, []
        c = self.cfg.c_puct
        while True:
            a = puct_select(node, c)
            ch, r, created = self.child(node, a)
            path.append((node, a, r))
            if ch.terminal:
                if created:
                    expand_and_evaluate(ch, self.theta)
                # the classify reward is booked on the edge; the absorbing state is worth 0
                leaf = 0.0
                break
            if created or not ch.expanded:
                leaf = expand_and_evaluate(ch, self.theta)
                break
            node = ch
        backup(path, leaf, self.rc.gamma)
        return len(path)

    def search_move(self, root: SearchNode, simulations=None):
        """Run the simulations from ``root``; return (argmax-N action, visit distribution)."""
        if not root.expanded:
            expand_and_evaluate(root, self.theta)
        for _ in range(self.cfg.simulations if simulations is None else simulations):
            self.simulate(root)
        N = np.where(root.legal, root.N, 0)
        a = int(np.argmax(N))
        return a, N / N.sum()

    def episode(self, row: int, visit_log=None):
        """Search-driven episode with subtree reuse.

        Returns (labels, trajectory). When ``visit_log`` is a list, one
        record per root decision is appended to it.
        """
        root = self.root(row)
        labels, trajectory = [], []
        ordinal = 0
        while True:
            a, pi = self.search_move(root)
            ch, r, _ = self.child(root, a)
            x = root.state.encode()
            if ch.terminal:
                z = r
            else:
                if not ch.expanded:
                    expand_and_evaluate(ch, self.theta)
                z = q_bootstrap(r, self.rc.gamma, ch.value)
            labels.append(SearchLabel(x, root.legal.copy(), pi, float(z)))
            trajectory.append(a)
            if visit_log is not None:
                visit_log.append(visit_record(self.ds, root, ordinal, a, pi))
            ordinal += 1
            if ch.terminal:
                return labels, trajectory
            root = ch


def search_move(root, theta, cfg, ds, model=None):
    return Searcher(ds, theta, cfg, model).search_move(root)


def episode_with_mcts(ds, row, theta, cfg, visit_log=None, model=None):
    return Searcher(ds, theta, cfg, model).episode(row, visit_log)


def visit_record(ds, root: SearchNode, ordinal: int, action: int, pi) -> dict:
    s = root.state
    row = s.sample_index
    return {
        "sample": int(row),
        "ordinal": ordinal,
        "acquired": [int(i) for i in s.acquired],
        "values": [float(ds.X[row, i]) for i in s.acquired],
        "action": int(action),
        "pi": [float(v) for v in pi],
        "N": [int(v) for v in np.where(root.legal, root.N, 0)],
        "label": int(ds.y[row]),
    }


def collect_visit_log(ds, theta, cfg, rows=None):
    """Search-driven trajectories for ``rows`` (all rows by default) as visit records."""
    searcher = Searcher(ds, theta, cfg)
    records = []
    for row in range(ds.n) if rows is None else rows:
        searcher.episode(int(row), records)
    return records


def write_visit_log(records, path, ds):
    header = {
        "schema": VISIT_LOG_SCHEMA,
        "feature_names": list(ds.feature_names),
        "class_names": list(ds.class_names),
        "p": ds.p,
        "K": ds.class_count,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_visit_log(path):
    """Returns (header, records)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty visit log")
    header = json.loads(lines[0])
    if header.get("schema") != VISIT_LOG_SCHEMA:
        raise ValueError(f"{path}: unsupported visit-log schema {header.get('schema')!r}")
    return header, [json.loads(ln) for ln in lines[1:]]


def train_on_labels(theta, labels, opt, cfg: MCTSConfig, rng):
    """Minibatch Adam passes over search labels. Returns (theta, opt, mean loss)."""
    samples = [net.MCTSSample(l.state_vec, l.legal, l.pi, l.z) for l in labels]
    losses = []
    for _ in range(cfg.train_epochs):
        order = rng.permutation(len(samples))
        for start in range(0, len(order), cfg.batch_size):
            batch = [samples[i] for i in order[start:start + cfg.batch_size]]
            grad = net.mcts_gradient(theta, batch, cfg.value_loss_weight)
            losses.append(net.mcts_loss(theta, batch, cfg.value_loss_weight) / len(batch))
            theta, opt = net.apply_update(theta, grad, opt, cfg.lr)
    return theta, opt, float(np.mean(losses)) if losses else 0.0


def improve(theta_init, ds_train, ds_val, cfg: MCTSConfig):
    """Iterate search-label collection and network distillation.

    Starts from ``theta_init`` (normally the actor-critic result) and keeps
    the checkpoint with the best validation selection objective (see
    :class:`metrics.EvalReport`); stops after
    ``cfg.iterations`` or ``cfg.patience`` iterations without improvement.
    Returns ``(best_theta, log)``.
    """
    rc = cfg.reward
    rng = np.random.default_rng(cfg.seed)
    theta = theta_init.copy()
    best = theta_init.copy()
    best_obj = evaluate(theta, ds_val, rc).selection_objective
    opt = net.AdamState.zeros(theta)
    records, stale = [], 0
    m = min(ds_train.n, cfg.samples_per_iteration)
    for it in range(1, cfg.iterations + 1):
        rows = np.sort(rng.choice(ds_train.n, size=m, replace=False))
        searcher = Searcher(ds_train, theta, cfg)
        labels, costs = [], []
        for row in rows:
            lab, traj = searcher.episode(int(row))
            labels.extend(lab)
            costs.append(sum(float(ds_train.costs[a]) for a in traj if a < ds_train.p))
        theta, opt, loss = train_on_labels(theta, labels, opt, cfg, rng)
        if not np.isfinite(loss) or loss > 1e3:
            raise DivergenceError(f"MCTS distillation diverged at iteration {it}",
                                  {"iteration": it, "loss": loss})
        rep = evaluate(theta, ds_val, rc)
        rec = {"iteration": it, "labels": len(labels), "loss": loss,
               "search_mean_cost": float(np.mean(costs)),
               "val_accuracy": rep.accuracy, "val_mean_cost": rep.mean_cost,
               "val_objective": rep.objective, "val_selection": rep.selection_objective}
        log.debug("mcts %s", rec)
        records.append(rec)
        if rep.selection_objective > best_obj:
            best, best_obj, stale = theta.copy(), rep.selection_objective, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best, records

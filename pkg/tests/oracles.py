"""Independent brute-force oracles used by the test-suite."""
from __future__ import annotations

import itertools
import math

import numpy as np


def enumerate_policies(features, n_classes=2):
    """Every deterministic adaptive policy over binary ``features``.

    A policy is ``("classify", k)`` or ``("acquire", f, {value: subpolicy})``.
    """
    for k in range(n_classes):
        yield ("classify", k)
    for f in features:
        rest = tuple(g for g in features if g != f)
        subs = list(enumerate_policies(rest, n_classes))
        for s0, s1 in itertools.product(subs, repeat=2):
            yield ("acquire", f, {0: s0, 1: s1})


def policy_outcome(policy, x, y, costs):
    cost = 0.0
    while policy[0] == "acquire":
        _, f, branches = policy
        cost += costs[f]
        policy = branches[int(x[f])]
    return float(policy[1] == y), cost


def brute_force_optimum(X, y, costs, lam):
    """Max over all deterministic policies of accuracy - lam * mean cost on (X, y)."""
    X = np.asarray(X).astype(int)
    patterns = {}
    for row, label in zip(map(tuple, X), y):
        patterns.setdefault(row, [0, 0])[int(label)] += 1
    n = len(y)
    best, best_policy = -math.inf, None
    for pol in enumerate_policies(tuple(range(X.shape[1]))):
        total = 0.0
        for row, counts in patterns.items():
            for label, cnt in enumerate(counts):
                if cnt:
                    acc, cost = policy_outcome(pol, row, label, costs)
                    total += cnt * (acc - lam * cost)
        if total / n > best:
            best, best_policy = total / n, pol
    return best, best_policy


def count_policies(n_features):
    return sum(1 for _ in enumerate_policies(tuple(range(n_features))))


def central_difference(loss, flat, eps=1e-5):
    """Central finite-difference gradient of ``loss(flat)``; ``flat`` is restored."""
    grad = np.empty_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = loss(flat)
        flat[i] = old - eps
        down = loss(flat)
        flat[i] = old
        grad[i] = (up - down) / (2 * eps)
    return grad


def max_relative_error(analytic, numeric, floor=1e-6):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_legal(rng, p, K):
    legal = rng.random(p + K) > 0.3
    legal[p + int(rng.integers(K))] = True
    return legal


def random_a2c_batch(rng, p, K, size=4):
    from costlyfeat import net

    batch = []
    for _ in range(size):
        legal = random_legal(rng, p, K)
        batch.append(net.A2CSample(rng.normal(size=2 * p), legal,
                                   int(rng.choice(np.flatnonzero(legal))),
                                   float(rng.normal()), float(rng.uniform(0, 0.1)),
                                   float(rng.normal())))
    return batch


def random_mcts_batch(rng, p, K, size=4):
    from costlyfeat import net

    batch = []
    for _ in range(size):
        legal = random_legal(rng, p, K)
        pi = np.zeros(p + K)
        pi[legal] = rng.dirichlet(np.ones(legal.sum()))
        batch.append(net.MCTSSample(rng.normal(size=2 * p), legal, pi, float(rng.normal())))
    return batch


def gradient_check(kind, seed, eps=1e-5):
    """Max relative error of the analytic gradient for one random (theta, batch) draw."""
    from costlyfeat import net

    rng = np.random.default_rng(seed)
    p, K, H = int(rng.integers(1, 4)), int(rng.integers(2, 4)), int(rng.integers(2, 6))
    theta = net.init(p, K, H, seed=seed)
    theta.flat[:] += rng.normal(scale=0.3, size=theta.flat.size)
    if kind == "a2c":
        batch = random_a2c_batch(rng, p, K)
        loss_fn, grad_fn = net.a2c_loss, net.a2c_gradient
    else:
        batch = random_mcts_batch(rng, p, K)
        loss_fn, grad_fn = net.mcts_loss, net.mcts_gradient
    w = float(rng.uniform(0.5, 2.0))
    analytic = grad_fn(theta, batch, w)
    work = theta.copy()
    numeric = central_difference(lambda f: loss_fn(work, batch, w), work.flat, eps)
    return max_relative_error(analytic, numeric)


def threshold_policy(p, K=2, feature=0, scale=100.0):
    """Hand-built network: acquire ``feature`` first, then classify 1 iff its value > 0.

    Width-4 trunk carrying relu(I_f), relu(x_f) and relu(-x_f) through identity layers.
    """
    from costlyfeat import net

    theta = net.init(p, K, 4, seed=0)
    theta.flat[:] = 0.0
    theta.W1[0, feature] = 1.0
    theta.W1[1, p + feature] = 1.0
    theta.W1[2, p + feature] = -1.0
    theta.W2[...] = np.eye(4)
    theta.W3[...] = np.eye(4)
    theta.bp[:p] = -scale
    theta.bp[feature] = 10.0
    theta.Wp[feature, 0] = -scale
    theta.Wp[p + 1, 1] = scale
    theta.Wp[p + 0, 2] = scale
    return theta


def constant_policy(p, K, action, H=4, scale=50.0):
    """Network whose policy puts almost all mass on ``action`` whenever it is legal."""
    from costlyfeat import net

    theta = net.init(p, K, H, seed=0)
    theta.Wp[...] = 0.0
    theta.bp[...] = 0.0
    theta.bp[action] = scale
    return theta


def puct_scores(Q, N, P, c):
    """Direct evaluation of Q + c * P * sqrt(sum N) / (N + 1)."""
    total = math.sqrt(sum(N))
    return [q + c * p * total / (n + 1) for q, n, p in zip(Q, N, P)]


def walk_tree(node):
    yield node
    for ch in node.children.values():
        yield from walk_tree(ch)


def search_statistics(seed, monkeypatch_update_edge):
    """Run one random search and audit it against a shadow record of backed-up values.

    ``monkeypatch_update_edge(wrapper)`` must install ``wrapper`` as the kernel
    used by backup. Returns (simulations, root visit total, max |Q - shadow mean|,
    child-visit consistency flag).
    """
    from costlyfeat import data, env, kernels, mcts, net

    rng = np.random.default_rng(seed)
    n, p, K = 4, int(rng.integers(2, 6)), int(rng.integers(2, 4))
    present = rng.random((n, p)) > 0.2
    ds = data.Dataset(rng.normal(size=(n, p)), present, rng.integers(0, K, n),
                      rng.uniform(0.1, 1.0, p), (), K)
    theta = net.init(p, K, int(rng.integers(2, 10)), seed=seed)
    rc = env.RewardConfig(lam=float(rng.choice([0.0, 0.01, 0.1, 1.0])),
                          gamma=float(rng.choice([1.0, 0.9])))
    sims = int(rng.integers(1, 120))
    cfg = mcts.MCTSConfig(simulations=sims, c_puct=float(rng.uniform(0.1, 5)), reward=rc)

    shadow = {}
    original = kernels.update_edge

    def recording(Q, N, a, G):
        shadow.setdefault((id(Q), int(a)), []).append(G)
        return original(Q, N, a, G)

    monkeypatch_update_edge(recording)
    searcher = mcts.Searcher(ds, theta, cfg)
    root = searcher.root(int(rng.integers(n)))
    searcher.search_move(root)

    worst, consistent = 0.0, True
    for node in walk_tree(root):
        if node.terminal or not node.expanded:
            continue
        for a in np.flatnonzero(node.N):
            gs = shadow[(id(node.Q), int(a))]
            consistent &= len(gs) == node.N[a]
            worst = max(worst, abs(node.Q[a] - sum(gs) / len(gs)))
            ch = node.children[int(a)]
            if not ch.terminal:
                # the first pass through an edge expands the child instead of descending
                consistent &= ch.visits == node.N[a] - 1
    return sims, root.visits, worst, bool(consistent)

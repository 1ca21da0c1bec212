"""Compare the compiled and pure-Python kernel backends.

Times the three hot paths (single-state forward, PUCT selection, a whole
search move) under each available backend and prints a table of
microseconds per call plus the speedup. Both backends must produce the same
results; the script checks that before timing.

    python benchmarks/bench_kernels.py --hidden 256 --sims 200
"""
import argparse
import contextlib
import json
import timeit

import numpy as np

from costlyfeat import env, kernels, mcts, net, synthetic


@contextlib.contextmanager
def use_backend(name):
    impl = kernels.load_backend(name)
    saved = {k: getattr(kernels, k) for k in ("forward_single", "puct_select", "update_edge")}
    for k in saved:
        setattr(kernels, k, getattr(impl, k))
    try:
        yield impl
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def cases(args):
    ds = synthetic.redundant_informative(200, seed=args.seed)
    p, K = ds.p, ds.class_count
    theta = net.init(p, K, args.hidden, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal(2 * p)
    legal = np.ones(p + K, dtype=bool)
    A = p + K
    Q = rng.uniform(-1, 1, A)
    N = rng.integers(0, 20, A).astype(np.int64)
    P = rng.dirichlet(np.ones(A))
    rc = env.RewardConfig(lam=0.01)
    cfg = mcts.MCTSConfig(simulations=args.sims, reward=rc)

    def forward():
        return kernels.forward_single(*theta.layers, x, legal)

    def puct():
        return kernels.puct_select(Q, N, P, legal, 1.5)

    def search():
        s = mcts.Searcher(ds, theta, cfg)
        root = s.root(0)
        return mcts.search_move(root, theta, cfg, ds)

    return {"forward_single": forward, "puct_select": puct, "search_move": search}


def check_agreement(args, backends):
    outs = {}
    for name in backends:
        with use_backend(name):
            fns = cases(args)
            probs, _, value = fns["forward_single"]()
            outs[name] = (probs, value, fns["puct_select"]())
    ref = outs[backends[0]]
    for name in backends[1:]:
        probs, value, a = outs[name]
        assert np.allclose(probs, ref[0], rtol=1e-10, atol=1e-12), name
        assert abs(value - ref[1]) < 1e-10 and a == ref[2], name


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, default=256)
    ap.add_argument("--sims", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print results as JSON")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    check_agreement(args, backends)
    results = {}
    for name in backends:
        with use_backend(name):
            for case, fn in cases(args).items():
                number = 1 if case == "search_move" else 2000
                t = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
                results.setdefault(case, {})[name] = t * 1e6
    if args.json:
        print(json.dumps(results, indent=2, sort_keys=True))
        return
    print(f"backends: {', '.join(backends)}   hidden={args.hidden} sims={args.sims}")
    print(f"{'kernel':<16}" + "".join(f"{b + ' (us)':>16}" for b in backends) + f"{'speedup':>10}")
    for case, row in results.items():
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{case:<16}" + "".join(f"{row[b]:>16.1f}" for b in backends) + f"{speed:>9.2f}x")


if __name__ == "__main__":
    main()

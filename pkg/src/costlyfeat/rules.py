"""Decision rules from search visit logs.

Per-sample root decisions are merged into a trie keyed by
``(value bin of the previously acquired feature, action)``; nodes seen
fewer than ``min_visits`` times are pruned. Continuous values are binned
with per-feature quantiles of the logged (training) values.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

RULES_SCHEMA = "costlyfeat.rules/1"


@dataclass
class Condition:
    feature: int
    bin: int
    lo: float | None
    hi: float | None


@dataclass
class RuleNode:
    kind: str                  # "acquire" or "classify"
    index: int                 # feature for acquire, class for classify
    visit_count: int
    condition: Condition | None = None
    children: list = field(default_factory=list)

    def walk(self):
        yield self
        for ch in self.children:
            yield from ch.walk()


@dataclass
class RuleTree:
    roots: list
    feature_names: list
    class_names: list
    bin_edges: dict
    min_visits: int
    bins: int

    @property
    def empty(self) -> bool:
        return not self.roots

    def nodes(self):
        for r in self.roots:
            yield from r.walk()

    @property
    def root(self) -> RuleNode | None:
        """The most visited top-level node (lowest action on ties)."""
        if not self.roots:
            return None
        return self.roots[0]


def _trajectories(records):
    by_sample = {}
    for rec in records:
        by_sample.setdefault(int(rec["sample"]), []).append(rec)
    out = {}
    for sample in sorted(by_sample):
        recs = sorted(by_sample[sample], key=lambda r: r["ordinal"])
        values = {}
        for r in recs:
            values.update(zip(r["acquired"], r["values"]))
        out[sample] = (recs, values)
    return out


def quantile_edges(values, bins):
    if len(values) == 0:
        return []
    qs = np.quantile(np.asarray(values, dtype=np.float64), np.arange(1, bins) / bins)
    return [float(v) for v in np.unique(qs)]


def aggregate(records, p, bins_per_feature=3, min_visits=50, count_mode="trajectories",
              feature_names=None, class_names=None) -> RuleTree:
    """Build a pruned :class:`RuleTree` from visit-log records.

    ``count_mode="trajectories"`` counts each logged sample once per node on
    its path; ``"simulations"`` weights it by the root visit count of the
    chosen edge, capped by the weight of its parent so counts never grow
    with depth.
    """
    if bins_per_feature < 2:
        raise ValueError("bins_per_feature must be >= 2")
    if count_mode not in ("trajectories", "simulations"):
        raise ValueError(f"unknown count_mode {count_mode!r}")
    trajs = _trajectories(records)
    pooled = {}
    for recs, values in trajs.values():
        for f, v in values.items():
            pooled.setdefault(int(f), []).append(float(v))
    edges = {f: quantile_edges(sorted(vs), bins_per_feature) for f, vs in sorted(pooled.items())}

    trie = {}
    for recs, values in trajs.values():
        level = trie
        prev_feature = None
        weight = None
        for r in recs:
            a = int(r["action"])
            w = 1 if count_mode == "trajectories" else int(r["N"][a])
            weight = w if weight is None else min(weight, w)
            if prev_feature is None:
                cond = None
            else:
                v = values.get(prev_feature)
                if v is None:
                    break
                b = int(np.searchsorted(edges[prev_feature], v, side="right"))
                cond = (prev_feature, b)
            key = (cond, a)
            entry = level.setdefault(key, [0, {}])
            entry[0] += weight
            level = entry[1]
            prev_feature = a if a < p else None
            if prev_feature is None:
                break

    def build(level):
        nodes = []
        for (cond, a), (count, sub) in level.items():
            if count < min_visits:
                continue
            c = None
            if cond is not None:
                f, b = cond
                e = edges[f]
                c = Condition(f, b, e[b - 1] if b > 0 else None, e[b] if b < len(e) else None)
            kind, idx = ("acquire", a) if a < p else ("classify", a - p)
            nodes.append(RuleNode(kind, idx, count, c, build(sub)))
        nodes.sort(key=_order_key)
        return nodes

    roots = build(trie)
    roots.sort(key=lambda n: (-n.visit_count, n.kind != "acquire", n.index))
    if not roots:
        log.warning("rule tree is empty after pruning at min_visits=%d", min_visits)
    return RuleTree(
        roots=roots,
        feature_names=list(feature_names or [f"f{j}" for j in range(p)]),
        class_names=list(class_names or []),
        bin_edges={int(f): e for f, e in edges.items()},
        min_visits=int(min_visits),
        bins=int(bins_per_feature),
    )


def _order_key(n: RuleNode):
    b = -1 if n.condition is None else n.condition.bin
    return (b, n.kind != "acquire", n.index)


def aggregate_file(path, bins_per_feature=3, min_visits=50, count_mode="trajectories"):
    from .mcts import read_visit_log

    header, records = read_visit_log(path)
    return aggregate(records, header["p"], bins_per_feature, min_visits, count_mode,
                     header.get("feature_names"), header.get("class_names"))


def _node_label(tree: RuleTree, n: RuleNode) -> str:
    if n.kind == "acquire":
        return f"acquire {tree.feature_names[n.index]} (N={n.visit_count})"
    name = tree.class_names[n.index] if n.index < len(tree.class_names) else str(n.index)
    return f"classify {name} (N={n.visit_count})"


def _edge_label(tree: RuleTree, c: Condition) -> str:
    lo = "-inf" if c.lo is None else f"{c.lo:.4g}"
    hi = "inf" if c.hi is None else f"{c.hi:.4g}"
    return f"{tree.feature_names[c.feature]} ∈ [{lo}, {hi})"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(tree: RuleTree) -> str:
    lines = ["digraph rules {", "  node [shape=box];"]
    counter = [0]

    def emit(n, parent_id):
        nid = f"n{counter[0]}"
        counter[0] += 1
        lines.append(f"  {nid} [label={_quote(_node_label(tree, n))}];")
        if parent_id is not None:
            lines.append(f"  {parent_id} -> {nid} [label={_quote(_edge_label(tree, n.condition))}];")
        for ch in n.children:
            emit(ch, nid)

    for r in tree.roots:
        emit(r, None)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _node_to_dict(n: RuleNode) -> dict:
    return {
        "kind": n.kind,
        "index": n.index,
        "visit_count": n.visit_count,
        "condition": None if n.condition is None else {
            "feature": n.condition.feature, "bin": n.condition.bin,
            "lo": n.condition.lo, "hi": n.condition.hi},
        "children": [_node_to_dict(c) for c in n.children],
    }


def _node_from_dict(d) -> RuleNode:
    c = d["condition"]
    return RuleNode(d["kind"], int(d["index"]), int(d["visit_count"]),
                    None if c is None else Condition(int(c["feature"]), int(c["bin"]), c["lo"], c["hi"]),
                    [_node_from_dict(x) for x in d["children"]])


def to_json(tree: RuleTree) -> str:
    doc = {
        "schema": RULES_SCHEMA,
        "feature_names": tree.feature_names,
        "class_names": tree.class_names,
        "bin_edges": {str(f): e for f, e in sorted(tree.bin_edges.items())},
        "min_visits": tree.min_visits,
        "bins": tree.bins,
        "roots": [_node_to_dict(r) for r in tree.roots],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def from_json(text: str) -> RuleTree:
    doc = json.loads(text)
    if doc.get("schema") != RULES_SCHEMA:
        raise ValueError(f"unsupported rules schema {doc.get('schema')!r}")
    return RuleTree(
        roots=[_node_from_dict(r) for r in doc["roots"]],
        feature_names=doc["feature_names"],
        class_names=doc["class_names"],
        bin_edges={int(f): e for f, e in doc["bin_edges"].items()},
        min_visits=doc["min_visits"],
        bins=doc["bins"],
    )


def export(tree: RuleTree, path, fmt="dot"):
    """Write ``tree`` as Graphviz dot (``fmt="dot"``) or JSON (``fmt="json"``)."""
    text = {"dot": to_dot, "json": to_json}[fmt](tree)
    Path(path).write_text(text, encoding="utf-8")
    return Path(path)

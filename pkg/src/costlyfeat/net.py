"""Partially shared MLP: three ReLU trunk layers feeding a policy head and a value head.

All parameters live in one flat float64 buffer; the per-layer arrays are
views into it, so optimizer steps are single vector operations. Gradients
are derived by hand and returned in the same flat layout.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ContractViolation, ParseError, ValidationError

LAYER_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "Wp", "bp", "Wv", "bv")
CHECKPOINT_MAGIC = b"CFCKPT01"
CHECKPOINT_VERSION = 1


def layer_shapes(p: int, K: int, H: int):
    A = p + K
    return [(H, 2 * p), (H,), (H, H), (H,), (H, H), (H,), (A, H), (A,), (1, H), (1,)]


@lru_cache(maxsize=64)
def _layout(p, K, H):
    out, off = [], 0
    for s in layer_shapes(p, K, H):
        size = math.prod(s)
        out.append((off, off + size, s))
        off += size
    return tuple(out), off


def param_count(p: int, K: int, H: int) -> int:
    return _layout(p, K, H)[1]


def _views(flat, p, K, H):
    return [flat[a:b].reshape(s) for a, b, s in _layout(p, K, H)[0]]


class NetworkParams:
    """Network weights for ``p`` features, ``K`` classes and trunk width ``H``."""

    __slots__ = ("p", "K", "H", "seed", "flat", "layers")

    def __init__(self, p, K, H, flat, seed=0):
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (param_count(p, K, H),):
            raise ValidationError("flat parameter vector has the wrong length")
        self.p, self.K, self.H, self.seed = int(p), int(K), int(H), int(seed)
        self.flat = flat
        self.layers = _views(flat, p, K, H)

    @property
    def n_actions(self) -> int:
        return self.p + self.K

    def __getattr__(self, name):
        if name not in LAYER_NAMES:
            raise AttributeError(name)
        try:
            return self.layers[LAYER_NAMES.index(name)]
        except ValueError:
            raise AttributeError(name) from None

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.p, self.K, self.H, self.flat.copy(), self.seed)

    def with_flat(self, flat) -> "NetworkParams":
        return NetworkParams(self.p, self.K, self.H, flat, self.seed)

    def grad_views(self, g):
        return _views(g, self.p, self.K, self.H)


class PolicyValue(NamedTuple):
    probs: np.ndarray
    logits: np.ndarray
    value: float


def init(p: int, K: int, H: int = 256, seed: int = 0) -> NetworkParams:
    """He-normal weights (variance 2/fan_in), zero biases."""
    if min(p, K, H) < 1:
        raise ValidationError("p, K and H must be >= 1")
    rng = np.random.default_rng(seed)
    theta = NetworkParams(p, K, H, np.zeros(param_count(p, K, H)), seed)
    for name, arr in zip(LAYER_NAMES, theta.layers):
        if name.startswith("W"):
            arr[...] = rng.normal(0.0, np.sqrt(2.0 / arr.shape[1]), size=arr.shape)
    return theta


def forward(theta: NetworkParams, state_vec, legal) -> PolicyValue:
    legal = np.asarray(legal, dtype=bool)
    if not legal.any():
        raise ContractViolation("forward needs at least one legal action")
    x = np.ascontiguousarray(state_vec, dtype=np.float64)
    if x.shape != (2 * theta.p,):
        raise ValidationError(f"state vector must have length {2 * theta.p}")
    probs, logits, value = kernels.forward_single(*theta.layers, x, legal)
    return PolicyValue(probs, logits, value)


@dataclass
class BatchCache:
    X: np.ndarray
    legal: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    z3: np.ndarray
    h3: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    logp: np.ndarray
    values: np.ndarray


def forward_batch(theta: NetworkParams, X, legal) -> BatchCache:
    """Vectorized forward over rows of ``X``; keeps activations for backprop."""
    W1, b1, W2, b2, W3, b3, Wp, bp, Wv, bv = theta.layers
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    legal = np.atleast_2d(np.asarray(legal, dtype=bool))
    if not legal.any(axis=1).all():
        raise ContractViolation("every row needs at least one legal action")
    z1 = X @ W1.T + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ W2.T + b2
    h2 = np.maximum(z2, 0.0)
    z3 = h2 @ W3.T + b3
    h3 = np.maximum(z3, 0.0)
    logits = h3 @ Wp.T + bp
    values = (h3 @ Wv.T + bv)[:, 0]
    masked = np.where(legal, logits, -np.inf)
    shifted = masked - masked.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e.sum(axis=1, keepdims=True)
    probs = e / s
    logp = np.where(legal, shifted - np.log(s), -np.inf)
    return BatchCache(X, legal, z1, h1, z2, h2, z3, h3, logits, probs, logp, values)


def backward(theta: NetworkParams, c: BatchCache, dlogits, dvalues) -> np.ndarray:
    """Flat gradient given dL/dlogits (B, A) and dL/dvalue (B,)."""
    W1, b1, W2, b2, W3, b3, Wp, bp, Wv, bv = theta.layers
    g = np.zeros_like(theta.flat)
    gW1, gb1, gW2, gb2, gW3, gb3, gWp, gbp, gWv, gbv = theta.grad_views(g)
    gWp[...] = dlogits.T @ c.h3
    gbp[...] = dlogits.sum(axis=0)
    gWv[...] = dvalues @ c.h3
    gbv[...] = dvalues.sum()
    dh = dlogits @ Wp + np.outer(dvalues, Wv[0])
    dz = dh * (c.z3 > 0)
    gW3[...] = dz.T @ c.h2
    gb3[...] = dz.sum(axis=0)
    dz = (dz @ W3) * (c.z2 > 0)
    gW2[...] = dz.T @ c.h1
    gb2[...] = dz.sum(axis=0)
    dz = (dz @ W2) * (c.z1 > 0)
    gW1[...] = dz.T @ c.X
    gb1[...] = dz.sum(axis=0)
    return g


def entropy(probs, legal) -> np.ndarray:
    """Row-wise policy entropy over legal actions."""
    probs = np.atleast_2d(probs)
    legal = np.atleast_2d(legal)
    safe = np.where(legal & (probs > 0), probs, 1.0)
    return -(probs * np.log(safe)).sum(axis=1)


class A2CSample(NamedTuple):
    state_vec: np.ndarray
    legal: np.ndarray
    action: int
    td_error: float
    entropy_weight: float
    value_target: float | None = None


class MCTSSample(NamedTuple):
    state_vec: np.ndarray
    legal: np.ndarray
    pi: np.ndarray
    z: float


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValidationError("non-finite input")


def _a2c_terms(theta, batch, value_loss_weight):
    X = np.array([b.state_vec for b in batch], dtype=np.float64)
    legal = np.array([b.legal for b in batch], dtype=bool)
    actions = np.array([b.action for b in batch], dtype=np.int64)
    td = np.array([b.td_error for b in batch], dtype=np.float64)
    beta = np.array([b.entropy_weight for b in batch], dtype=np.float64)
    _check_finite(X, td, beta)
    c = forward_batch(theta, X, legal)
    rows = np.arange(len(batch))
    if not legal[rows, actions].all():
        raise ContractViolation("a2c sample action is illegal in its state")
    targets = np.array([c.values[i] + b.td_error if b.value_target is None else b.value_target
                        for i, b in enumerate(batch)])
    _check_finite(targets)
    return c, rows, actions, td, beta, targets


def a2c_loss(theta, batch, value_loss_weight=1.0) -> float:
    """-sum[log pi(a|s) td + beta H(pi(s))] + w sum (target - V(s))^2.

    Samples without an explicit ``value_target`` regress toward
    ``V(s) + td_error`` evaluated at ``theta``.
    """
    c, rows, actions, td, beta, targets = _a2c_terms(theta, batch, value_loss_weight)
    H = entropy(c.probs, c.legal)
    pg = -(c.logp[rows, actions] * td + beta * H).sum()
    return float(pg + value_loss_weight * ((targets - c.values) ** 2).sum())


def a2c_gradient(theta, batch, value_loss_weight=1.0) -> np.ndarray:
    """Gradient of :func:`a2c_loss`; td errors and value targets are constants."""
    c, rows, actions, td, beta, targets = _a2c_terms(theta, batch, value_loss_weight)
    probs, legal = c.probs, c.legal
    H = entropy(probs, legal)
    logp = np.where(legal, c.logp, 0.0)
    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    dlogits = -td[:, None] * (onehot - probs) + beta[:, None] * probs * (logp + H[:, None])
    dlogits = np.where(legal, dlogits, 0.0)
    dvalues = -2.0 * value_loss_weight * (targets - c.values)
    return backward(theta, c, dlogits, dvalues)


def _mcts_terms(theta, batch):
    X = np.array([b.state_vec for b in batch], dtype=np.float64)
    legal = np.array([b.legal for b in batch], dtype=bool)
    pi = np.array([b.pi for b in batch], dtype=np.float64)
    z = np.array([b.z for b in batch], dtype=np.float64)
    _check_finite(X, pi, z)
    if np.any(np.abs(pi.sum(axis=1) - 1.0) > 1e-6):
        raise ValidationError("search policy targets must sum to 1")
    if np.any(pi[~legal] != 0):
        raise ValidationError("search policy targets put mass on illegal actions")
    return forward_batch(theta, X, legal), pi, z


def mcts_loss(theta, batch, value_loss_weight=1.0) -> float:
    """sum[w (z - v(s))^2 - sum_a pi(a) log p(a)]."""
    c, pi, z = _mcts_terms(theta, batch)
    ce = -(pi * np.where(c.legal, c.logp, 0.0)).sum()
    return float(value_loss_weight * ((z - c.values) ** 2).sum() + ce)


def mcts_gradient(theta, batch, value_loss_weight=1.0) -> np.ndarray:
    c, pi, z = _mcts_terms(theta, batch)
    dlogits = np.where(c.legal, c.probs - pi, 0.0)
    dvalues = -2.0 * value_loss_weight * (z - c.values)
    return backward(theta, c, dlogits, dvalues)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, theta: NetworkParams) -> "AdamState":
        return cls(np.zeros_like(theta.flat), np.zeros_like(theta.flat), 0)


def apply_update(theta: NetworkParams, grad, state: AdamState, lr=1e-3,
                 beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam descent step. Returns new (params, state); inputs are not mutated."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != theta.flat.shape:
        raise ValidationError("gradient shape does not match parameters")
    if not np.all(np.isfinite(grad)):
        raise ValidationError("non-finite gradient; parameters left untouched")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    flat = theta.flat - lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta.with_flat(flat), AdamState(m, v, t)


def save_checkpoint(theta: NetworkParams, path, meta=None):
    """Write ``theta`` in the CFCKPT01 layout (see README)."""
    header = {
        "format": "costlyfeat-checkpoint",
        "version": CHECKPOINT_VERSION,
        "p": theta.p, "K": theta.K, "H": theta.H, "seed": theta.seed,
        "dtype": "<f8",
        "layers": [{"name": n, "shape": list(a.shape)} for n, a in zip(LAYER_NAMES, theta.layers)],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(theta.flat.astype("<f8").tobytes())


def read_checkpoint_header(path) -> dict:
    with Path(path).open("rb") as fh:
        return _read_header(fh)


def _read_header(fh):
    magic = fh.read(len(CHECKPOINT_MAGIC))
    if magic != CHECKPOINT_MAGIC:
        raise ParseError("not a costlyfeat checkpoint")
    (size,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(size).decode("utf-8"))
    if header.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {header.get('version')}")
    return header


def load_checkpoint(path):
    """Returns (NetworkParams, header)."""
    with Path(path).open("rb") as fh:
        header = _read_header(fh)
        p, K, H = header["p"], header["K"], header["H"]
        n = param_count(p, K, H)
        data = fh.read()
    if len(data) != 8 * n:
        raise ParseError(f"checkpoint payload has {len(data)} bytes, expected {8 * n}")
    flat = np.frombuffer(data, dtype="<f8").astype(np.float64)
    return NetworkParams(p, K, H, flat, header["seed"]), header

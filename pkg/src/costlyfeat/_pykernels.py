"""Pure numpy implementations of the search/forward hot kernels.

Same signatures as the compiled ``_ckernels`` module; used when the extension
is not built or ``COSTLYFEAT_PURE_PYTHON`` is set.
"""
import math

import numpy as np


def masked_softmax(logits, legal):
    z = np.where(legal, logits, -np.inf)
    e = np.exp(z - z.max())
    return e / e.sum()


def forward_single(W1, b1, W2, b2, W3, b3, Wp, bp, Wv, bv, x, legal):
    """Forward one state. Returns (probs, logits, value)."""
    h = np.maximum(W1 @ x + b1, 0.0)
    h = np.maximum(W2 @ h + b2, 0.0)
    h = np.maximum(W3 @ h + b3, 0.0)
    logits = Wp @ h + bp
    value = float(Wv[0] @ h + bv[0])
    return masked_softmax(logits, legal), logits, value


def puct_select(Q, N, P, legal, c):
    total = int(N[legal].sum())
    if total == 0:
        scores = np.where(legal, P, -np.inf)
    else:
        sqrt_total = math.sqrt(total)
        scores = Q + c * P * sqrt_total / (N + 1.0)
        scores = np.where(legal, scores, -np.inf)
    return int(np.argmax(scores))


def update_edge(Q, N, a, G):
    n = N[a] + 1
    N[a] = n
    Q[a] = ((n - 1) * Q[a] + G) / n

"""Per-sample feature-acquisition MDP.

Action space is flat with size ``p + K``: index ``i < p`` acquires feature
``i``; index ``p + k`` stops and predicts class ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import Dataset
from .errors import ContractViolation, ValidationError

ACQUIRE = "acquire"
CLASSIFY = "classify"


class Action(NamedTuple):
    kind: str
    index: int

    def flat(self, p: int) -> int:
        return self.index if self.kind == ACQUIRE else p + self.index

    @classmethod
    def from_flat(cls, a: int, p: int) -> "Action":
        return cls(ACQUIRE, a) if a < p else cls(CLASSIFY, a - p)


def acquire(i: int) -> Action:
    return Action(ACQUIRE, i)


def classify(k: int) -> Action:
    return Action(CLASSIFY, k)


@dataclass(frozen=True)
class RewardConfig:
    """Reward shaping: ``lam`` scales feature costs, ``delta`` weighs majority samples.

    With ``minority_class=None`` every terminal reward is +-1.
    ``t_max=None`` means the horizon is p (every feature may be bought).
    """

    lam: float = 0.01
    delta: float = 1.0
    gamma: float = 1.0
    minority_class: int | None = None
    t_max: int | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")
        if not (0.0 <= self.delta <= 1.0):
            raise ValidationError("delta must lie in [0, 1]")
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError("gamma must lie in (0, 1]")
        if self.t_max is not None and self.t_max < 0:
            raise ValidationError("t_max must be >= 0")

    @property
    def majority_weight(self) -> float:
        return 1.0 if self.minority_class is None else self.delta

    def horizon(self, p: int) -> int:
        return p if self.t_max is None else min(self.t_max, p)


def resolve_reward_config(ds: Dataset, lam=0.01, delta="auto", gamma=1.0,
                          minority_class=None, t_max=None) -> RewardConfig:
    """Build a RewardConfig; ``delta="auto"`` uses the imbalance ratio of ``ds``."""
    if minority_class is None or ds.class_count != 2:
        return RewardConfig(lam=lam, delta=1.0, gamma=gamma, minority_class=None, t_max=t_max)
    if delta in ("auto", None):
        delta = imbalance_ratio(ds, minority_class)
    return RewardConfig(lam=lam, delta=float(delta), gamma=gamma,
                        minority_class=int(minority_class), t_max=t_max)


@dataclass(frozen=True, eq=False)
class EpisodeState:
    sample_index: int
    acquired: tuple[int, ...]
    indicator: np.ndarray
    values: np.ndarray
    accumulated_cost: float
    t: int

    def encode(self) -> np.ndarray:
        return np.concatenate((self.indicator, self.values))


def reset(ds: Dataset, row: int) -> EpisodeState:
    if not (0 <= row < ds.n):
        raise ValidationError(f"row {row} out of range [0, {ds.n})")
    z = np.zeros(ds.p)
    return EpisodeState(int(row), (), z, z.copy(), 0.0, 0)


def encode(s: EpisodeState) -> np.ndarray:
    """State vector ``[indicator | values]`` of length 2p."""
    return s.encode()


def legal_actions(s: EpisodeState, ds: Dataset, t_max: int | None = None) -> np.ndarray:
    K = ds.class_count
    mask = np.ones(ds.p + K, dtype=bool)
    horizon = ds.p if t_max is None else min(t_max, ds.p)
    if s.t >= horizon:
        mask[:ds.p] = False
    else:
        mask[:ds.p] = ds.present[s.sample_index] & (s.indicator == 0)
    return mask


def terminal_reward(k: int, label: int, rc: RewardConfig) -> float:
    w = 1.0 if rc.minority_class is None or label == rc.minority_class else rc.delta
    return w if k == label else -w


def step(s: EpisodeState, a, ds: Dataset, rc: RewardConfig):
    """Apply action ``a`` (flat int or :class:`Action`). Returns (next_state, reward, done)."""
    p = ds.p
    if isinstance(a, Action):
        a = a.flat(p)
    a = int(a)
    if not (0 <= a < p + ds.class_count):
        raise ContractViolation(f"action {a} outside [0, {p + ds.class_count})")
    if a >= p:
        return s, terminal_reward(a - p, int(ds.y[s.sample_index]), rc), True
    row = s.sample_index
    if s.t >= rc.horizon(p) or s.indicator[a] != 0 or not ds.present[row, a]:
        raise ContractViolation(f"feature {a} is not acquirable in this state")
    indicator = s.indicator.copy()
    values = s.values.copy()
    indicator[a] = 1.0
    values[a] = ds.X[row, a]
    c = float(ds.costs[a])
    nxt = EpisodeState(row, s.acquired + (a,), indicator, values,
                       s.accumulated_cost + c, s.t + 1)
    return nxt, -rc.lam * c, False


def imbalance_ratio(ds: Dataset, minority: int) -> float:
    if ds.class_count != 2:
        raise ValidationError("imbalance ratio is defined for binary datasets")
    counts = ds.class_counts()
    n_min = int(counts[minority])
    n_maj = int(counts[1 - minority])
    if n_min == 0 or n_maj == 0:
        raise ValidationError("both classes must be present")
    return float(min(1.0, max(0.0, n_min / n_maj)))

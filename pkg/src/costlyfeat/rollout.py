"""Running the network policy through single-sample episodes."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import env, net


class Transition(NamedTuple):
    state_vec: np.ndarray
    legal: np.ndarray
    action: int
    reward: float
    next_state_vec: np.ndarray
    next_legal: np.ndarray
    done: bool
    probs: np.ndarray


class EpisodeResult(NamedTuple):
    transitions: list
    final_state: env.EpisodeState
    prediction: int
    probs: np.ndarray


def sample_action(probs, rng) -> int:
    cdf = np.cumsum(probs)
    a = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if a >= len(probs) or probs[a] == 0.0:
        a = int(np.flatnonzero(probs)[-1])
    return a


def play(ds, row, theta, rc, rng=None, mode="greedy") -> EpisodeResult:
    """Run one episode on ``row``.

    ``mode="stochastic"`` samples from the masked policy using ``rng``;
    ``"greedy"`` takes the argmax (lowest index on ties). The horizon cap
    forces a Classify once ``rc.horizon(p)`` features are held.
    """
    if mode not in ("greedy", "stochastic"):
        raise ValueError(f"unknown mode {mode!r}")
    s = env.reset(ds, row)
    x = s.encode()
    legal = env.legal_actions(s, ds, rc.t_max)
    transitions = []
    while True:
        pv = net.forward(theta, x, legal)
        a = int(np.argmax(pv.probs)) if mode == "greedy" else sample_action(pv.probs, rng)
        nxt, r, done = env.step(s, a, ds, rc)
        if done:
            transitions.append(Transition(x, legal, a, r, x, legal, True, pv.probs))
            return EpisodeResult(transitions, s, a - ds.p, pv.probs)
        nx = nxt.encode()
        nlegal = env.legal_actions(nxt, ds, rc.t_max)
        transitions.append(Transition(x, legal, a, r, nx, nlegal, False, pv.probs))
        s, x, legal = nxt, nx, nlegal


def run_episode(ds, row, theta, rc, rng=None, mode="stochastic") -> list:
    return play(ds, row, theta, rc, rng, mode).transitions

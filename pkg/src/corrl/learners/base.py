"""Learner contract shared by every agent.

Per episode the harness calls ``announce`` (the randomized Markov policy
for the coming episode, in a form the oracle can evaluate exactly),
then ``begin_episode`` with the learner's own uniforms, ``act`` at every
stage and finally ``observe`` with the realized trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._kernels_py import ELIM_TOL


class ActiveSetError(AssertionError):
    """An active set became empty, which the construction rules out."""


@dataclass(frozen=True)
class QSupervisor:
    """Upper/lower Q tables, active sets and the UCB policy they induce.

    Arrays are indexed (h - 1, x, a); ``ucb_policy`` is (H, S).
    """

    q_up: np.ndarray
    q_low: np.ndarray
    active: np.ndarray
    ucb_policy: np.ndarray

    @property
    def v_up(self) -> np.ndarray:
        """V_up_h(x) = Q_up_h(x, pi_ucb_h(x)), with a zero terminal row."""
        H, S, _ = self.q_up.shape
        v = np.zeros((H + 1, S))
        v[:H] = np.take_along_axis(self.q_up, self.ucb_policy[..., None], axis=-1)[..., 0]
        return v

    @property
    def v_low(self) -> np.ndarray:
        """V_low_h(x) = max over the active set of Q_low_h(x, .)."""
        H, S, _ = self.q_low.shape
        v = np.zeros((H + 1, S))
        v[:H] = np.max(np.where(self.active, self.q_low, -np.inf), axis=-1)
        return v

    @property
    def plausible(self) -> np.ndarray:
        best_low = np.max(np.where(self.active, self.q_low, -np.inf), axis=-1)
        return self.active & (self.q_up >= best_low[..., None] - ELIM_TOL)


class Learner:
    """Base class: subclasses fill in the four contract methods."""

    coins_per_episode = 1
    num_learners = 1

    def announce(self):
        raise NotImplementedError

    def begin_episode(self, coins):
        pass

    def act(self, h: int, x: int) -> int:
        raise NotImplementedError

    def observe(self, states, actions, rewards):
        pass

    @property
    def charged_learner(self) -> int:
        """Learner index the last episode was charged to (1 for single-learner agents)."""
        return 1


class FixedPolicyLearner(Learner):
    """Plays a fixed deterministic Markov policy; a regret-free baseline."""

    def __init__(self, policy):
        self.policy = np.asarray(policy, dtype=np.int64)

    def announce(self):
        return self.policy

    def act(self, h, x):
        return int(self.policy[h - 1, x])


def greedy_lowest(q: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """argmax over the last axis with lowest-index tie-break, restricted to mask."""
    if mask is None:
        return np.argmax(q, axis=-1)
    return np.argmax(np.where(mask, q, -np.inf), axis=-1)

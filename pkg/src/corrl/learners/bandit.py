"""Bandit agents, run as one-state, one-stage episodic learners."""
from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..estimators import bandit_bonuses, ucb_bonus
from ..schedule import bandit_learner_from_uniform, bandit_learner_probs, ell_max_for
from .base import ActiveSetError, Learner


class UcbBandit(Learner):
    """UCB with bonus sqrt(log(A T / delta) / N), optionally widened by c_bar / N."""

    def __init__(self, A, T, delta, c_bar=0.0):
        self.A, self.T, self.delta = A, max(1, T), delta
        self.c_bar = float(c_bar)
        self.counts = np.zeros(A)
        self.sums = np.zeros(A)
        self.arm = 0
        # only the played arm's entry changes per round, so keep the index current
        self._index = np.full(A, np.inf)
        self._log_term = math.log(A * self.T / delta)
        self._announced = [np.array([[a]], dtype=np.int64) for a in range(A)]

    def index(self):
        n = self.counts
        mean = self.sums / np.maximum(n, 1)
        extra = np.where(n > 0, self.c_bar / np.maximum(n, 1), np.inf)
        return mean + ucb_bonus(n, self.A, self.T, self.delta) + extra

    def announce(self):
        self.arm = int(np.argmax(self._index))
        return self._announced[self.arm].copy()

    def act(self, h, x):
        return self.arm

    def observe(self, states, actions, rewards):
        a = actions[0]
        self.counts[a] += 1
        self.sums[a] += rewards[0]
        n = self.counts[a]
        self._index[a] = (self.sums[a] / n + math.sqrt(self._log_term * (1.0 / n))
                          + self.c_bar / n)


def ucb_bandit(A, T, delta):
    return UcbBandit(A, T, delta)


def ucb_bandit_known_c(c_bar, A, T, delta):
    return UcbBandit(A, T, delta, c_bar=c_bar)


class SupervisedBandC(Learner):
    """Bandit version of the multi-learner scheme.

    Each learner's upper estimate is min{1, global + b_gl, subsampled + b_sb}
    and its lower estimate max{0, global - b_gl, subsampled - b_sb}; active
    sets shrink from the most robust learner down.  The played learner is
    ell > 1 with probability 2^-ell, learner 1 otherwise.
    """

    def __init__(self, A, T, delta, ell_max=None):
        self.A, self.T, self.delta = A, max(1, T), delta
        L = ell_max or ell_max_for(self.T)
        self.num_learners = L
        self.ells = np.arange(1, L + 1, dtype=float)[:, None]
        self.mix = bandit_learner_probs(L)
        self.n_gl = np.zeros(A)
        self.s_gl = np.zeros(A)
        self.n_sb = np.zeros((L, A))
        self.s_sb = np.zeros((L, A))
        self._zeros_gl = np.zeros((1, A, 1))
        self._zeros_sb = np.zeros((L, 1, A, 1))
        self.q_up = np.zeros((L, 1, 1, A))
        self.q_low = np.zeros((L, 1, 1, A))
        self.active = np.ones((L, 1, 1, A), dtype=np.uint8)
        self.recommended = np.zeros((L, 1, 1), dtype=np.int64)
        self.learner = 1
        self.b_gl, self.b_sb = bandit_bonuses(self.n_gl[None], self.n_sb, self.ells,
                                              self.delta, A, self.T)
        self._log_term = 2 * math.log(32 * A * self.T**3 / delta)
        self._pow2 = 2.0 ** self.ells[:, 0]
        self._sub_c = [2 * math.log(16.0 * ell * ell / delta) for ell in range(1, L + 1)]

    def estimates(self):
        mu_gl = self.s_gl / np.maximum(self.n_gl, 1)
        mu_sb = self.s_sb / np.maximum(self.n_sb, 1)
        return mu_gl, mu_sb, self.b_gl, self.b_sb

    def announce(self):
        mu_gl, mu_sb, b_gl, b_sb = self.estimates()
        L, A = self.n_sb.shape
        # one state, one stage, zero continuation: the VI kernel reduces to
        # the clamped upper/lower estimates with horizon 1
        try:
            kernels.two_estimate_vi(mu_gl[None], self._zeros_gl, b_gl[:, None],
                                    mu_sb[:, None], self._zeros_sb, b_sb[:, None], 1,
                                    self.q_up, self.q_low, self.active, self.recommended)
        except RuntimeError as exc:
            raise ActiveSetError(str(exc)) from exc
        probs = np.zeros((1, 1, A))
        np.add.at(probs[0, 0], self.recommended[:, 0, 0], self.mix)
        return probs

    def begin_episode(self, coins):
        self.learner = bandit_learner_from_uniform(self.num_learners, coins[0])

    def act(self, h, x):
        return int(self.recommended[self.learner - 1, 0, 0])

    def observe(self, states, actions, rewards):
        a, r = actions[0], rewards[0]
        self.n_gl[a] += 1
        self.s_gl[a] += r
        i = self.learner - 1
        self.n_sb[i, a] += 1
        self.s_sb[i, a] += r
        # one global column and one subsampled entry changed; same formulas
        # as estimators.bandit_bonuses, in scalar form
        g, n = self.n_gl[a], self.n_sb[i, a]
        if g > 1:
            self.b_gl[:, a] = math.sqrt(self._log_term / g) + self._pow2 / g
        if n > 1:
            self.b_sb[i, a] = math.sqrt(self._log_term / n) + self._sub_c[i] / n

    @property
    def charged_learner(self):
        return self.learner

    def upper_lower(self):
        """(L, A) upper and lower estimates from the last announcement."""
        return self.q_up[:, 0, 0], self.q_low[:, 0, 0]


def supervised_band_c(A, T, delta, ell_max=None):
    return SupervisedBandC(A, T, delta, ell_max)

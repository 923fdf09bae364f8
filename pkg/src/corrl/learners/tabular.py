"""Tabular agents: optimistic value iteration, the multi-learner robust
scheme with nested active sets, and the near-uniform eliminators."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..estimators import (TabularStats, tabular_bonus_global, tabular_bonus_sub,
                          ucbvi_bonus)
from ..oracle import MasterPolicy
from ..schedule import ScheduleChain, ell_max_for
from .._kernels_py import ELIM_TOL
from .base import ActiveSetError, Learner, QSupervisor, greedy_lowest


class Ucbvi(Learner):
    """Single-model optimistic value iteration with greedy lowest-index play.

    ``clip`` caps Q_up at H; without it the recursion is the plain
    bonus-augmented Bellman update.
    """

    def __init__(self, S, A, H, K, delta, clip=False):
        self.S, self.A, self.H = S, A, H
        self.T = max(1, K * H)
        self.delta = delta
        self.clip = clip
        self.stats = TabularStats(S, A)
        self.policy = np.zeros((H, S), dtype=np.int64)
        self.q_up = np.zeros((H, S, A))

    def _bonus(self):
        return ucbvi_bonus(self.stats.counts, self.delta, self.S, self.A, self.H, self.T)

    def announce(self):
        r, p = self.stats.model()
        b = self._bonus()
        v = np.zeros(self.S)
        for h in range(self.H - 1, -1, -1):
            q = r + p @ v + b
            if self.clip:
                q = np.minimum(q, self.H)
            self.q_up[h] = q
            self.policy[h] = np.argmax(q, axis=-1)
            v = q[np.arange(self.S), self.policy[h]]
        return self.policy.copy()

    def act(self, h, x):
        return int(self.policy[h - 1, x])

    def observe(self, states, actions, rewards):
        self.stats.add_trajectory(states, actions, rewards)

    @property
    def v_up_initial(self):
        """V_up at stage 1 for every state."""
        return self.q_up[0][np.arange(self.S), self.policy[0]]


class SupervisedC(Learner):
    """Multi-learner robust optimistic VI on tabular data.

    Learner ell (1-based) combines the global model with its own
    subsampled model, optimises over the active set handed down by
    learner ell + 1, and hands its plausible set to learner ell - 1.
    """

    def __init__(self, S, A, H, K, delta, ell_max=None):
        self.S, self.A, self.H = S, A, H
        self.T = max(1, K * H)
        self.delta = delta
        L = ell_max or ell_max_for(self.T)
        self.num_learners = L
        self.chain = ScheduleChain(L, H)
        self.coins_per_episode = H
        self.ells = np.arange(1, L + 1, dtype=float)[:, None, None]
        self.glob = TabularStats(S, A)
        self.sub = [TabularStats(S, A) for _ in range(L)]
        self.r_sb = np.zeros((L, S, A))
        self.p_sb = np.full((L, S, A, S), 1.0 / S)
        self.b_sb = np.full((L, S, A), float(H))
        self.q_up = np.zeros((L, H, S, A))
        self.q_low = np.zeros((L, H, S, A))
        self.active = np.ones((L, H, S, A), dtype=np.uint8)
        self.policy = np.zeros((L, H, S), dtype=np.int64)
        self.schedule = np.ones(H, dtype=np.int64)

    def global_bonus(self):
        return tabular_bonus_global(self.glob.counts[None], self.ells, self.delta,
                                    self.S, self.A, self.H, self.T)

    def announce(self):
        r_gl, p_gl = self.glob.model()
        try:
            kernels.two_estimate_vi(r_gl, p_gl, self.global_bonus(), self.r_sb, self.p_sb,
                                    self.b_sb, self.H, self.q_up, self.q_low, self.active,
                                    self.policy)
        except RuntimeError as exc:
            raise ActiveSetError(str(exc)) from exc
        return MasterPolicy(self.policy.copy(), self.chain.kernel, self.chain)

    def begin_episode(self, coins):
        self.schedule = self.chain.sample_from_uniforms(coins)

    def act(self, h, x):
        return int(self.policy[self.schedule[h - 1] - 1, h - 1, x])

    def observe(self, states, actions, rewards):
        ell = int(self.schedule[-1])
        self.glob.add_trajectory(states, actions, rewards)
        st = self.sub[ell - 1]
        st.add_trajectory(states, actions, rewards)
        r, p = st.model()
        self.r_sb[ell - 1] = r
        self.p_sb[ell - 1] = p
        self.b_sb[ell - 1] = tabular_bonus_sub(st.counts, ell, self.delta, self.S, self.A,
                                               self.H, self.T)

    @property
    def charged_learner(self):
        return int(self.schedule[-1])

    def supervisor(self, ell: int) -> QSupervisor:
        i = ell - 1
        return QSupervisor(self.q_up[i].copy(), self.q_low[i].copy(),
                           self.active[i].astype(bool), self.policy[i].copy())


class SupervisedUnif(Learner):
    """Near-uniform action elimination.

    Actions judged implausible are removed for good.  At each stage, with
    probability ``epsilon``, the agent switches to the UCB policy for the
    rest of the episode; otherwise it plays uniformly on the plausible set.
    """

    def __init__(self, S, A, H, K, delta, epsilon=0.0):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.S, self.A, self.H = S, A, H
        self.T = max(1, K * H)
        self.delta = delta
        self.epsilon = epsilon
        self.coins_per_episode = 2 * H
        self.stats = TabularStats(S, A)
        self.active = np.ones((H, S, A), dtype=bool)
        self.q_up = np.zeros((H, S, A))
        self.q_low = np.zeros((H, S, A))
        self.ucb = np.zeros((H, S), dtype=np.int64)
        self.plausible = self.active.copy()
        self._coins = None
        self._switched = False
        self._current_active = self.active.copy()

    def announce(self):
        r, p = self.stats.model()
        b = ucbvi_bonus(self.stats.counts, self.delta, self.S, self.A, self.H, self.T)
        H, S = self.H, self.S
        vu = np.zeros(S)
        vl = np.zeros(S)
        rows = np.arange(S)
        self._current_active = self.active.copy()
        for h in range(H - 1, -1, -1):
            qu = np.minimum(H, r + p @ vu + b)
            ql = np.maximum(0.0, r + p @ vl - b)
            act = self.active[h]
            if not act.any(axis=-1).all():
                raise ActiveSetError("empty active set")
            pi = greedy_lowest(qu, act)
            best_low = np.max(np.where(act, ql, -np.inf), axis=-1)
            self.plausible[h] = act & (qu >= best_low[:, None] - ELIM_TOL)
            self.q_up[h], self.q_low[h], self.ucb[h] = qu, ql, pi
            vu = qu[rows, pi]
            vl = ql[rows, pi]
        self.active = self.plausible.copy()
        return self.announced()

    def uniform_probs(self):
        w = self.plausible.astype(float)
        return w / w.sum(axis=-1, keepdims=True)

    def announced(self):
        uni = self.uniform_probs()
        if self.epsilon == 0.0:
            return uni
        ucb = np.zeros_like(uni)
        np.put_along_axis(ucb, self.ucb[..., None], 1.0, axis=-1)
        e = self.epsilon
        return MasterPolicy(np.stack([uni, ucb]), np.array([[1.0 - e, e], [0.0, 1.0]]))

    def begin_episode(self, coins):
        self._coins = coins
        self._switched = False

    def act(self, h, x):
        z, u = self._coins[2 * (h - 1)], self._coins[2 * (h - 1) + 1]
        if not self._switched and z < self.epsilon:
            self._switched = True
        if self._switched:
            return int(self.ucb[h - 1, x])
        choices = np.flatnonzero(self.plausible[h - 1, x])
        return int(choices[min(int(u * len(choices)), len(choices) - 1)])

    def observe(self, states, actions, rewards):
        self.stats.add_trajectory(states, actions, rewards)

    def supervisor(self) -> QSupervisor:
        return QSupervisor(self.q_up.copy(), self.q_low.copy(), self._current_active.copy(),
                           self.ucb.copy())


def uniform_elimination(S, A, H, K, delta):
    """Uniform play over the plausible set; never defers to the UCB policy."""
    return SupervisedUnif(S, A, H, K, delta, epsilon=0.0)

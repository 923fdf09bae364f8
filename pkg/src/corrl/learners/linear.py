"""Multi-learner robust optimistic VI with ridge-regression models."""
from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..estimators import RidgeModel, compute_beta
from ..oracle import MasterPolicy
from ..schedule import ScheduleChain, ell_max_for
from .base import ActiveSetError, Learner, QSupervisor


class SupervisedCLinear(Learner):
    """Linear-MDP instance of the nested-active-set scheme.

    ``features`` is the (S, A, d) feature table.  Transition predictions
    mu_hat phi(x, a) . V are formed from the stored samples; over a finite
    state space they collapse to an (S, A, S) table of signed weights, which
    the shared VI kernel consumes directly.
    """

    def __init__(self, features, H, K, delta, lam=1.0, ell_max=None, beta=None,
                 bonus_scale=1.0):
        phi = np.asarray(features, dtype=float)
        self.S, self.A, self.d = phi.shape
        self.features = phi
        self._flat = phi.reshape(self.S * self.A, self.d)
        self.H = H
        self.T = max(1, K * H)
        self.delta = delta
        self.lam = lam
        self.beta = compute_beta(self.d, self.A, self.T, H, delta) if beta is None else beta
        self.bonus_scale = float(bonus_scale)
        L = ell_max or ell_max_for(self.T)
        self.num_learners = L
        self.chain = ScheduleChain(L, H)
        self.coins_per_episode = H
        self.glob = RidgeModel(self.d, lam, self.S)
        self.sub = [RidgeModel(self.d, lam, self.S) for _ in range(L)]
        S, A = self.S, self.A
        self.r_gl = np.zeros((S, A))
        self.p_gl = np.zeros((S, A, S))
        self.r_sb = np.zeros((L, S, A))
        self.p_sb = np.zeros((L, S, A, S))
        self.b_sb = np.zeros((L, S, A))
        self._gl_width = np.zeros((2, S, A))
        for ell in range(1, L + 1):
            self._refresh_sub(ell)
        self._refresh_global()
        self.q_up = np.zeros((L, H, S, A))
        self.q_low = np.zeros((L, H, S, A))
        self.active = np.ones((L, H, S, A), dtype=np.uint8)
        self.policy = np.zeros((L, H, S), dtype=np.int64)
        self.schedule = np.ones(H, dtype=np.int64)

    def _widths(self, model: RidgeModel):
        """(||phi||_{Lambda^-1}, ||Lambda^-1 phi||_2) for every (x, a)."""
        w = self._flat @ model.cov_inv
        quad = np.maximum(np.sum(w * self._flat, axis=-1), 0.0)
        shape = (self.S, self.A)
        return np.sqrt(quad).reshape(shape), np.linalg.norm(w, axis=-1).reshape(shape)

    def _predict(self, model: RidgeModel):
        r = (self._flat @ model.theta).reshape(self.S, self.A)
        p = model.pseudo_transitions(self._flat).reshape(self.S, self.A, self.S)
        return r, p

    def _bonus(self, widths, c_bar):
        ell_norm, euclid = widths
        lead = self.beta * (self.d + math.sqrt(self.A)) * self.H
        return self.bonus_scale * (lead * ell_norm + 4 * self.H**2 * c_bar * euclid)

    def _refresh_global(self):
        self.r_gl, self.p_gl = self._predict(self.glob)
        self._gl_width = self._widths(self.glob)

    def _refresh_sub(self, ell):
        m = self.sub[ell - 1]
        r, p = self._predict(m)
        self.r_sb[ell - 1], self.p_sb[ell - 1] = r, p
        c_bar = min(2.0**ell, 2 * math.log(16 * ell * ell / self.delta))
        self.b_sb[ell - 1] = self._bonus(self._widths(m), c_bar)

    def global_bonus(self):
        L = self.num_learners
        c = 2.0 ** np.arange(1, L + 1)
        ell_norm, euclid = self._gl_width
        lead = self.beta * (self.d + math.sqrt(self.A)) * self.H
        return self.bonus_scale * (lead * ell_norm[None] + 4 * self.H**2 * c[:, None, None] * euclid[None])

    def announce(self):
        try:
            kernels.two_estimate_vi(self.r_gl, self.p_gl, self.global_bonus(), self.r_sb,
                                    self.p_sb, self.b_sb, self.H, self.q_up, self.q_low,
                                    self.active, self.policy)
        except RuntimeError as exc:
            raise ActiveSetError(str(exc)) from exc
        return MasterPolicy(self.policy.copy(), self.chain.kernel, self.chain)

    def begin_episode(self, coins):
        self.schedule = self.chain.sample_from_uniforms(coins)

    def act(self, h, x):
        return int(self.policy[self.schedule[h - 1] - 1, h - 1, x])

    def observe(self, states, actions, rewards):
        ell = int(self.schedule[-1])
        sub = self.sub[ell - 1]
        for h in range(len(actions)):
            phi = self.features[states[h], actions[h]]
            self.glob.add(phi, rewards[h], states[h + 1])
            sub.add(phi, rewards[h], states[h + 1])
        self._refresh_global()
        self._refresh_sub(ell)

    @property
    def charged_learner(self):
        return int(self.schedule[-1])

    def supervisor(self, ell: int) -> QSupervisor:
        i = ell - 1
        return QSupervisor(self.q_up[i].copy(), self.q_low[i].copy(),
                           self.active[i].astype(bool), self.policy[i].copy())

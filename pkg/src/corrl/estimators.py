"""Counts, empirical models, ridge regression and confidence bonuses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

REFRESH_EVERY = 256


# ---------------------------------------------------------------- tabular

class TabularStats:
    """Visit counts, reward sums and transition counts for one data stream."""

    def __init__(self, S: int, A: int):
        self.S, self.A = S, A
        self.counts = np.zeros((S, A), dtype=np.int64)
        self.reward_sum = np.zeros((S, A))
        self.trans_counts = np.zeros((S, A, S), dtype=np.int64)
        self._model = None

    def add(self, x: int, a: int, reward: float, next_state: int):
        self.counts[x, a] += 1
        self.reward_sum[x, a] += reward
        self.trans_counts[x, a, next_state] += 1
        self._model = None

    def add_trajectory(self, states, actions, rewards):
        for h in range(len(actions)):
            self.add(states[h], actions[h], rewards[h], states[h + 1])

    def model(self):
        """(r_hat, p_hat); unvisited pairs get r_hat = 0 and a uniform p_hat."""
        if self._model is None:
            n = self.counts
            safe = np.maximum(n, 1)
            r = self.reward_sum / safe
            p = self.trans_counts / safe[:, :, None]
            p[n == 0] = 1.0 / self.S
            self._model = (r, p)
        return self._model

    @property
    def r_hat(self):
        return self.model()[0]

    @property
    def p_hat(self):
        return self.model()[1]


def _safe_inv(N):
    N = np.asarray(N, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(N > 0, 1.0 / np.maximum(N, 1e-300), np.inf)


def _clamped(raw, N, cap):
    N = np.asarray(N)
    out = np.where(N > 0, np.minimum(cap, raw), cap)
    return float(out) if out.ndim == 0 else out


def tabular_bonus_global(N, ell, delta, S, A, H, T):
    """min{H, 2H sqrt(2 ln(64 S A H T^2 / delta) / N) + 2^ell H^2 / N}; H when N = 0."""
    inv = _safe_inv(N)
    log_term = math.log(64 * S * A * H * T**2 / delta)
    with np.errstate(invalid="ignore"):
        raw = 2 * H * np.sqrt(2 * log_term * inv) + np.power(2.0, ell) * H * H * inv
    return _clamped(raw, N, H)


def tabular_bonus_sub(N, ell, delta, S, A, H, T):
    """min{H, 2H sqrt(2 ln(64 S A H T^3 / delta) / N) + 2 H^2 ln(16 ell^2 / delta) / N}."""
    inv = _safe_inv(N)
    log_term = math.log(64 * S * A * H * T**3 / delta)
    with np.errstate(invalid="ignore"):
        raw = (2 * H * np.sqrt(2 * log_term * inv)
               + 2 * H * H * np.log(16.0 * np.square(ell) / delta) * inv)
    return _clamped(raw, N, H)


def ucbvi_bonus(N, delta, S, A, H, T):
    """2H sqrt(2 ln(64 S A H T^2 / delta) / N); H when N = 0."""
    inv = _safe_inv(N)
    with np.errstate(invalid="ignore"):
        raw = 2 * H * np.sqrt(2 * math.log(64 * S * A * H * T**2 / delta) * inv)
    N = np.asarray(N)
    out = np.where(N > 0, raw, H)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- bandit

def bandit_bonuses(N_gl, N_sb, ell, delta, A, T):
    """Global and subsampled bandit bonuses; 1 whenever the relevant count is <= 1."""
    log_term = 2 * math.log(32 * A * T**3 / delta)
    N_gl = np.asarray(N_gl, dtype=float)
    N_sb = np.asarray(N_sb, dtype=float)
    g = np.maximum(N_gl, 1.0)
    s = np.maximum(N_sb, 1.0)
    b_gl = np.where(N_gl > 1, np.sqrt(log_term / g) + np.power(2.0, ell) / g, 1.0)
    b_sb = np.where(N_sb > 1, np.sqrt(log_term / s) + 2 * np.log(16.0 * np.square(ell) / delta) / s, 1.0)
    if b_gl.ndim == 0:
        return float(b_gl), float(b_sb)
    return b_gl, b_sb


def ucb_bonus(N, A, T, delta):
    """sqrt(log(A T / delta) / N); infinite for unplayed arms."""
    return np.sqrt(math.log(A * T / delta) * _safe_inv(N))


# ---------------------------------------------------------------- linear

def compute_beta(d, A, T, H, delta):
    return 14.0 * math.sqrt(30.0 * math.log(A * d * T * T * H / delta))


def _inverse(Lambda, inverse):
    return np.linalg.inv(Lambda) if inverse is None else inverse


def _linear_bonus(phi, Lambda, c_bar, beta, d, A, H, inverse):
    inv = _inverse(Lambda, inverse)
    phi = np.asarray(phi, dtype=float)
    w = phi @ inv                                   # Lambda^-1 phi (inv is symmetric)
    quad = np.maximum(np.sum(w * phi, axis=-1), 0.0)
    out = beta * (d + math.sqrt(A)) * H * np.sqrt(quad) + 4 * H * H * c_bar * np.linalg.norm(w, axis=-1)
    return float(out) if out.ndim == 0 else out


def linear_bonus_global(phi, Lambda, ell, beta, d, A, H, *, inverse=None):
    """beta (d + sqrt A) H ||phi||_{Lambda^-1} + 4 H^2 2^ell ||Lambda^-1 phi||_2."""
    return _linear_bonus(phi, Lambda, 2.0**ell, beta, d, A, H, inverse)


def linear_bonus_sub(phi, Lambda_sub, ell, beta, d, A, H, delta, *, inverse=None):
    """Subsampled twin with C_bar = min{2^ell, 2 ln(16 ell^2 / delta)}."""
    c_bar = min(2.0**ell, 2 * math.log(16 * ell * ell / delta))
    return _linear_bonus(phi, Lambda_sub, c_bar, beta, d, A, H, inverse)


class RidgeModel:
    """Ridge regression of rewards and next-state indicators on features.

    Samples are stored so that transition predictions can be formed
    non-parametrically.  ``cov_inv`` is kept current with rank-one updates
    and recomputed from scratch every ``REFRESH_EVERY`` updates.
    """

    def __init__(self, d: int, lam: float = 1.0, num_states: int | None = None):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        self.d, self.lam = d, float(lam)
        self.num_states = num_states
        self.cov = lam * np.eye(d)
        self.cov_inv = np.eye(d) / lam
        self.xy = np.zeros(d)
        self._phi = np.zeros((16, d))
        self._rew = np.zeros(16)
        self._next = np.zeros(16, dtype=np.int64)
        self.n = 0
        self._since_refresh = 0
        # running sum of phi_i e_{x'_i}^T, equal to the stored-sample sum
        self.next_moment = np.zeros((d, num_states)) if num_states else None

    @property
    def phis(self):
        return self._phi[:self.n]

    @property
    def rewards(self):
        return self._rew[:self.n]

    @property
    def next_states(self):
        return self._next[:self.n]

    def add(self, phi, reward: float, next_state: int = 0):
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.d,):
            raise ValueError(f"feature has shape {phi.shape}, expected ({self.d},)")
        if self.n == len(self._rew):
            grow = 2 * len(self._rew)
            self._phi = np.resize(self._phi, (grow, self.d))
            self._rew = np.resize(self._rew, grow)
            self._next = np.resize(self._next, grow)
        self._phi[self.n] = phi
        self._rew[self.n] = reward
        self._next[self.n] = next_state
        self.n += 1
        self.cov += np.outer(phi, phi)
        self.xy += reward * phi
        if self.next_moment is not None:
            self.next_moment[:, next_state] += phi
        self._since_refresh += 1
        if self._since_refresh >= REFRESH_EVERY:
            self.refresh()
        else:
            u = self.cov_inv @ phi
            self.cov_inv -= np.outer(u, u) / (1.0 + phi @ u)

    def refresh(self):
        self.cov_inv = np.linalg.inv(self.cov)
        self.cov_inv = 0.5 * (self.cov_inv + self.cov_inv.T)
        self._since_refresh = 0

    @property
    def theta(self) -> np.ndarray:
        return self.cov_inv @ self.xy

    def predict_reward(self, phi):
        return np.asarray(phi) @ self.theta

    def pseudo_transitions(self, features) -> np.ndarray:
        """mu_hat phi(x,a) for every row of ``features`` (..., d) -> (..., S).

        Entries may be negative; rows are generally not distributions.
        """
        return (np.asarray(features) @ self.cov_inv) @ self.next_moment


def ridge_fit(samples, lam: float = 1.0, num_states: int | None = None) -> RidgeModel:
    """Fit from (features (n, d), rewards (n,), next_states (n,))."""
    phis, rewards, nexts = samples
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    d = phis.shape[1]
    rewards = np.asarray(rewards, dtype=float).reshape(-1)
    nexts = np.zeros(len(rewards), dtype=np.int64) if nexts is None else np.asarray(nexts)
    if len(rewards) != phis.shape[0] or len(nexts) != len(rewards):
        raise ValueError("sample arrays have mismatched lengths")
    if num_states is None and len(nexts):
        num_states = int(nexts.max()) + 1
    model = RidgeModel(d, lam, num_states)
    for phi, r, y in zip(phis, rewards, nexts):
        model.add(phi, r, int(y))
    model.refresh()
    return model


def predict_value(ridge: RidgeModel, phi, V) -> float:
    """sum_i V(x'_i) phi_i^T Lambda^-1 phi over the stored samples."""
    if ridge.n == 0:
        return 0.0
    w = ridge.cov_inv @ np.asarray(phi, dtype=float)
    weights = ridge.phis @ w
    return float(np.sum(np.asarray(V)[ridge.next_states] * weights))


def ridge_prediction_gap(X, Y, Y_stoch, lam, x, f) -> float:
    """|(A_hat x - A_hat_stoch x) . f| for ridge maps A_hat = sum_i y_i x_i^T V^-1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = X.T @ X + lam * np.eye(X.shape[1])
    w = np.linalg.solve(V, np.asarray(x, dtype=float))
    diff = np.atleast_2d(np.asarray(Y, dtype=float) - np.asarray(Y_stoch, dtype=float))
    if diff.shape[0] != X.shape[0]:
        diff = diff.T
    return float(abs((diff.T @ (X @ w)) @ np.atleast_1d(f)))


def ridge_corruption_bound(C, H, alpha, X, lam, x) -> float:
    """2 C H alpha ||V^-1 x||_2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = X.T @ X + lam * np.eye(X.shape[1])
    return 2.0 * C * H * alpha * float(np.linalg.norm(np.linalg.solve(V, np.asarray(x, dtype=float))))


# ---------------------------------------------------------------- corruption bookkeeping

@dataclass
class CorruptionLog:
    """Per-episode corrupted-stage flags and the learner the episode was charged to."""

    stage_flags: list = field(default_factory=list)   # each an (H,) bool array
    charged: list = field(default_factory=list)       # learner index, 0 when not applicable

    def append(self, flags, charged_to: int):
        self.stage_flags.append(np.asarray(flags, dtype=bool))
        self.charged.append(int(charged_to))


def count_corrupted_global(log: CorruptionLog) -> int:
    return int(sum(int(f.sum()) for f in log.stage_flags))


def count_corrupted_sub(log: CorruptionLog, ell: int) -> int:
    return int(sum(int(f.sum()) for f, c in zip(log.stage_flags, log.charged) if c == ell))

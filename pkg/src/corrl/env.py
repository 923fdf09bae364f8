"""Episodic MDP environments.

States and actions are dense 0-based ids.  A ``TabularMdp`` is either
stationary (tables shared by all stages) or stage-dependent; the latter
only arises as the episode MDP chosen by an adversary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-9
REWARD_KINDS = ("bernoulli", "deterministic")


class InvalidMdpError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite episodic MDP.

    ``transition`` has shape (S, A, S) for a stationary MDP or (H, S, A, S)
    for a stage-dependent one; ``mean_reward`` is (S, A) or (H, S, A)
    accordingly.
    """

    num_states: int
    num_actions: int
    horizon: int
    transition: np.ndarray
    mean_reward: np.ndarray
    initial_dist: np.ndarray
    reward_kind: str = "bernoulli"
    _cdf: np.ndarray = field(init=False, repr=False)
    _cdf0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        R = np.array(self.mean_reward, dtype=float)
        p0 = np.array(self.initial_dist, dtype=float)
        for arr in (P, R, p0):
            arr.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "mean_reward", R)
        object.__setattr__(self, "initial_dist", p0)
        self.validate()
        cdf = np.cumsum(P, axis=-1)
        cdf[..., -1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)
        cdf0 = np.cumsum(p0)
        cdf0[-1] = 1.0
        object.__setattr__(self, "_cdf0", cdf0)

    @property
    def stage_dependent(self) -> bool:
        return self.transition.ndim == 4

    def validate(self):
        S, A, H = self.num_states, self.num_actions, self.horizon
        if min(S, A, H) < 1:
            raise InvalidMdpError("S, A and H must be positive")
        if self.reward_kind not in REWARD_KINDS:
            raise InvalidMdpError(f"unknown reward kind {self.reward_kind!r}")
        P, R = self.transition, self.mean_reward
        if P.shape == (S, A, S):
            want_r = (S, A)
        elif P.shape == (H, S, A, S):
            want_r = (H, S, A)
        else:
            raise InvalidMdpError(f"transition shape {P.shape} does not match S={S}, A={A}, H={H}")
        if R.shape != want_r:
            raise InvalidMdpError(f"mean_reward shape {R.shape}, expected {want_r}")
        if self.initial_dist.shape != (S,):
            raise InvalidMdpError("initial_dist must have length S")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise InvalidMdpError("transition rows must be nonnegative")
        if np.max(np.abs(P.sum(axis=-1) - 1.0)) > ROW_TOL:
            raise InvalidMdpError("transition rows must sum to 1")
        if not np.all(np.isfinite(R)) or np.any(R < 0) or np.any(R > 1):
            raise InvalidMdpError("mean rewards must lie in [0, 1]")
        if np.any(self.initial_dist < 0) or abs(self.initial_dist.sum() - 1.0) > ROW_TOL:
            raise InvalidMdpError("initial_dist must be a probability vector")

    def p_at(self, h: int) -> np.ndarray:
        """Transition table used at stage ``h`` (1-based)."""
        return self.transition[h - 1] if self.stage_dependent else self.transition

    def r_at(self, h: int) -> np.ndarray:
        return self.mean_reward[h - 1] if self.stage_dependent else self.mean_reward

    def staged(self):
        """(H, S, A, S) transitions and (H, S, A) rewards, broadcast if stationary."""
        H = self.horizon
        if self.stage_dependent:
            return self.transition, self.mean_reward
        return (np.broadcast_to(self.transition, (H,) + self.transition.shape),
                np.broadcast_to(self.mean_reward, (H,) + self.mean_reward.shape))

    def cdf_at(self, h: int) -> np.ndarray:
        return self._cdf[h - 1] if self.stage_dependent else self._cdf

    def with_stage_tables(self, transition, mean_reward) -> "TabularMdp":
        return TabularMdp(self.num_states, self.num_actions, self.horizon, transition,
                          mean_reward, self.initial_dist, self.reward_kind)

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "horizon": self.horizon,
            "transition": self.transition.tolist(),
            "mean_reward": self.mean_reward.tolist(),
            "initial_dist": self.initial_dist.tolist(),
            "reward_kind": self.reward_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TabularMdp":
        return cls(int(d["num_states"]), int(d["num_actions"]), int(d["horizon"]),
                   np.asarray(d["transition"], dtype=float),
                   np.asarray(d["mean_reward"], dtype=float),
                   np.asarray(d["initial_dist"], dtype=float),
                   d.get("reward_kind", "bernoulli"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TabularMdp":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, TabularMdp):
            return NotImplemented
        return (self.num_states == other.num_states and self.num_actions == other.num_actions
                and self.horizon == other.horizon and self.reward_kind == other.reward_kind
                and np.array_equal(self.transition, other.transition)
                and np.array_equal(self.mean_reward, other.mean_reward)
                and np.array_equal(self.initial_dist, other.initial_dist))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LinearMdp:
    """Linear MDP: p(x,a) = mu_star @ phi(x,a), r(x,a) = theta_star . phi(x,a).

    ``features`` is (S, A, d), ``mu_star`` is (S, d), ``theta_star`` is (d,).
    """

    features: np.ndarray
    mu_star: np.ndarray
    theta_star: np.ndarray
    horizon: int
    initial_dist: np.ndarray
    reward_kind: str = "bernoulli"
    tabular: TabularMdp = field(init=False, repr=False)

    def __post_init__(self):
        phi = np.array(self.features, dtype=float)
        mu = np.array(self.mu_star, dtype=float)
        theta = np.array(self.theta_star, dtype=float)
        p0 = np.array(self.initial_dist, dtype=float)
        for arr in (phi, mu, theta, p0):
            arr.setflags(write=False)
        object.__setattr__(self, "features", phi)
        object.__setattr__(self, "mu_star", mu)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "initial_dist", p0)
        S, A, d = phi.shape
        if mu.shape != (S, d) or theta.shape != (d,):
            raise InvalidMdpError("inconsistent linear MDP shapes")
        self._check_norms()
        P = np.einsum("yd,sad->say", mu, phi)
        R = phi @ theta
        # tiny negative round-off is cleaned, anything larger is an error
        if np.min(P) < -ROW_TOL or np.max(np.abs(P.sum(axis=-1) - 1)) > ROW_TOL:
            raise InvalidMdpError("induced transitions are not probability vectors")
        if np.min(R) < -ROW_TOL or np.max(R) > 1 + ROW_TOL:
            raise InvalidMdpError("induced rewards leave [0, 1]")
        P = np.clip(P, 0.0, None)
        R = np.clip(R, 0.0, 1.0)
        object.__setattr__(self, "tabular",
                           TabularMdp(S, A, self.horizon, P, R, p0, self.reward_kind))

    def _check_norms(self):
        d = self.dimension
        if np.max(np.linalg.norm(self.features, axis=-1)) > 1 + 1e-12:
            raise InvalidMdpError("feature norms must be at most 1")
        if np.linalg.norm(self.theta_star) > np.sqrt(d) + 1e-12:
            raise InvalidMdpError("||theta*|| must be at most sqrt(d)")
        S = self.mu_star.shape[0]
        if S <= 16:
            signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * S)).reshape(S, -1).T
            worst = np.max(np.linalg.norm(signs @ self.mu_star, axis=1))
        else:
            # |v^T mu_j| <= sum_x |mu_xj| is attained by a sign vector
            worst = np.linalg.norm(np.abs(self.mu_star).sum(axis=0))
        if worst > np.sqrt(d) + 1e-9:
            raise InvalidMdpError("||v^T mu*|| exceeds sqrt(d)")

    @property
    def dimension(self) -> int:
        return self.features.shape[-1]

    @property
    def num_states(self) -> int:
        return self.features.shape[0]

    @property
    def num_actions(self) -> int:
        return self.features.shape[1]

    def to_dict(self) -> dict:
        return {
            "features": self.features.tolist(),
            "mu_star": self.mu_star.tolist(),
            "theta_star": self.theta_star.tolist(),
            "horizon": self.horizon,
            "initial_dist": self.initial_dist.tolist(),
            "reward_kind": self.reward_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearMdp":
        return cls(np.asarray(d["features"]), np.asarray(d["mu_star"]),
                   np.asarray(d["theta_star"]), int(d["horizon"]),
                   np.asarray(d["initial_dist"]), d.get("reward_kind", "bernoulli"))

    @classmethod
    def from_tabular(cls, mdp: TabularMdp) -> "LinearMdp":
        """Canonical-basis embedding with d = S*A."""
        if mdp.stage_dependent:
            raise InvalidMdpError("only stationary MDPs have a linear embedding")
        S, A = mdp.num_states, mdp.num_actions
        phi = np.eye(S * A).reshape(S, A, S * A)
        mu = mdp.transition.reshape(S * A, S).T
        theta = mdp.mean_reward.reshape(S * A)
        return cls(phi, mu, theta, mdp.horizon, mdp.initial_dist, mdp.reward_kind)


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    reward: float
    next_state: int
    stage: int
    episode: int

    def __post_init__(self):
        if self.stage < 1:
            raise ValueError("stage is 1-based")
        if not 0.0 <= self.reward <= 1.0:
            raise ValueError("reward must lie in [0, 1]")


def _check_dims(S, A, H):
    for name, v in (("S", S), ("A", A), ("H", H)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")


def make_combination_lock(num_actions: int, horizon: int,
                          reward_kind: str = "deterministic") -> TabularMdp:
    """Combination lock with H+1 states.

    State 0 is the absorbing sink, state h is the h-th lock position.
    Action 0 advances the lock; at the last position it pays 1.
    """
    A, H = num_actions, horizon
    if int(A) != A or A < 2:
        raise ValueError("combination lock needs at least 2 actions")
    if int(H) != H or H < 1:
        raise ValueError("horizon must be a positive integer")
    S = H + 1
    P = np.zeros((S, A, S))
    P[:, :, 0] = 1.0
    for h in range(1, H):
        P[h, 0, 0] = 0.0
        P[h, 0, h + 1] = 1.0
    R = np.zeros((S, A))
    R[H, 0] = 1.0
    p0 = np.zeros(S)
    p0[1] = 1.0
    return TabularMdp(S, A, H, P, R, p0, reward_kind)


def make_random_tabular(S: int, A: int, H: int, seed: int,
                        reward_kind: str = "bernoulli") -> TabularMdp:
    _check_dims(S, A, H)
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(S), size=(S, A))
    P /= P.sum(axis=-1, keepdims=True)
    R = rng.uniform(0.0, 1.0, size=(S, A))
    p0 = np.zeros(S)
    p0[0] = 1.0
    return TabularMdp(S, A, H, P, R, p0, reward_kind)


def make_bandit(means, reward_kind: str = "bernoulli") -> TabularMdp:
    """Multi-armed bandit as a one-state, one-stage MDP."""
    means = np.asarray(means, dtype=float)
    A = means.size
    return TabularMdp(1, A, 1, np.ones((1, A, 1)), means.reshape(1, A), np.ones(1), reward_kind)


def make_random_linear(d: int, S: int, A: int, H: int, seed: int,
                       num_anchors: int | None = None,
                       reward_kind: str = "bernoulli") -> LinearMdp:
    """Random linear MDP valid by construction.

    Features are points of the probability simplex in R^d (so their norm is
    at most 1), each column of mu* is a mixture of a few anchor distributions
    over states, and theta* has entries in [0, 1].
    """
    _check_dims(S, A, H)
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    rng = np.random.default_rng(seed)
    k = num_anchors or max(2, min(d, S))
    anchors = rng.dirichlet(np.ones(S), size=k)            # (k, S)
    mix = rng.dirichlet(np.ones(k), size=d)                 # (d, k)
    mu = (mix @ anchors).T                                  # (S, d), columns on the simplex
    phi = rng.dirichlet(np.full(d, 0.5), size=(S, A))
    theta = rng.uniform(0.0, 1.0, size=d)
    p0 = np.zeros(S)
    p0[0] = 1.0
    return LinearMdp(phi, mu, theta, H, p0, reward_kind)


def step(mdp: TabularMdp, x: int, a: int, rng: np.random.Generator, h: int = 1):
    """Sample (reward, next_state) from the MDP at stage ``h``."""
    return step_uniform(mdp, x, a, rng.random(), rng.random(), h)


def step_uniform(mdp: TabularMdp, x: int, a: int, u_reward: float, u_state: float, h: int = 1):
    """Inverse-CDF step driven by two uniforms (used for coupled rollouts)."""
    if not (0 <= x < mdp.num_states and 0 <= a < mdp.num_actions):
        raise IndexError(f"state {x} / action {a} out of range")
    r = mdp.r_at(h)[x, a]
    if mdp.reward_kind == "bernoulli":
        reward = 1.0 if u_reward < r else 0.0
    else:
        reward = float(r)
    cdf = mdp.cdf_at(h)[x, a]
    nxt = int(cdf.searchsorted(u_state, side="right"))
    return reward, min(nxt, mdp.num_states - 1)


def sample_initial(mdp: TabularMdp, u: float) -> int:
    return min(int(mdp._cdf0.searchsorted(u, side="right")), mdp.num_states - 1)

"""Exact dynamic programming on known MDPs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .env import TabularMdp
from .schedule import ScheduleChain


class GapUndefinedError(ValueError):
    """Raised when an MDP has no strictly suboptimal action anywhere."""


@dataclass(frozen=True)
class OptimalSolution:
    """Q*, V* and gaps; stage index 0 holds h = 1, v_star[H] is the zero terminal."""

    q_star: np.ndarray          # (H, S, A)
    v_star: np.ndarray          # (H + 1, S)
    gaps: np.ndarray            # (H, S, A)
    optimal_actions: np.ndarray  # (H, S, A) bool
    value: float                # p0 . V*_1

    @property
    def greedy_policy(self) -> np.ndarray:
        """Lowest-index optimal action per (h, x)."""
        return np.argmax(self.optimal_actions, axis=-1)


@dataclass(frozen=True)
class MasterPolicy:
    """Mixture policy driven by a Markov chain over base learners.

    ``base_policies`` is (L, H, S) of actions or (L, H, S, A) of action
    probabilities. Before stage 1 the chain sits on learner 1 and it moves
    with ``kernel`` at the start of every stage, after which the current
    learner's policy acts.
    """

    base_policies: np.ndarray
    kernel: np.ndarray
    chain: ScheduleChain | None = None

    @classmethod
    def scheduled(cls, base_policies, chain: ScheduleChain) -> "MasterPolicy":
        base_policies = np.asarray(base_policies)
        if base_policies.shape[0] != chain.ell_max:
            raise ValueError("need one base policy per learner")
        return cls(base_policies, chain.kernel, chain)

    @property
    def num_learners(self) -> int:
        return self.base_policies.shape[0]

    def action_probs(self, num_actions: int) -> np.ndarray:
        return policy_probs(self.base_policies, num_actions)


def policy_probs(policy, num_actions: int) -> np.ndarray:
    """Action-probability table from integer actions (one-hot) or pass-through."""
    policy = np.asarray(policy)
    if np.issubdtype(policy.dtype, np.integer):
        if policy.size and (policy.min() < 0 or policy.max() >= num_actions):
            raise ValueError("policy contains an invalid action id")
        out = np.zeros(policy.shape + (num_actions,))
        np.put_along_axis(out, policy[..., None], 1.0, axis=-1)
        return out
    if policy.shape[-1] != num_actions:
        raise ValueError("policy probability table has the wrong action axis")
    return policy.astype(float, copy=False)


def optimal_values(mdp: TabularMdp) -> OptimalSolution:
    """Backward induction from V*_{H+1} = 0 (stage-dependent MDPs included)."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    q = np.zeros((H, S, A))
    v = np.zeros((H + 1, S))
    for h in range(H, 0, -1):
        q[h - 1] = mdp.r_at(h) + mdp.p_at(h) @ v[h]
        v[h - 1] = q[h - 1].max(axis=-1)
    gaps = v[:-1, :, None] - q
    return OptimalSolution(q, v, gaps, gaps == 0.0, float(mdp.initial_dist @ v[0]))


def evaluate_policy(mdp: TabularMdp, policy) -> float:
    """Expected H-step reward of a Markov policy by forward propagation.

    ``policy`` is (H, S) integer actions or (H, S, A) probabilities.
    """
    H, S = mdp.horizon, mdp.num_states
    policy = np.asarray(policy)
    if np.issubdtype(policy.dtype, np.integer):
        if policy.shape != (H, S):
            raise ValueError("policy must cover every (h, x)")
        if policy.size and (policy.min() < 0 or policy.max() >= mdp.num_actions):
            raise ValueError("policy contains an invalid action id")
        rows = np.arange(S)
        dist = mdp.initial_dist
        total = 0.0
        for h in range(1, H + 1):
            a = policy[h - 1]
            total += float(dist @ mdp.r_at(h)[rows, a])
            dist = dist @ mdp.p_at(h)[rows, a]
        return total
    pi = policy_probs(policy, mdp.num_actions)
    if pi.shape[:2] != (H, S):
        raise ValueError("policy must cover every (h, x)")
    dist = mdp.initial_dist.copy()
    total = 0.0
    for h in range(1, H + 1):
        sa = dist[:, None] * pi[h - 1]
        total += float(np.sum(sa * mdp.r_at(h)))
        dist = np.einsum("xa,xay->y", sa, mdp.p_at(h))
    return total


def evaluate_master_policy(mdp: TabularMdp, master: MasterPolicy) -> float:
    """Exact value via DP over (state, current learner) pairs."""
    P, R = mdp.staged()
    pol = np.ascontiguousarray(master.action_probs(mdp.num_actions), dtype=float)
    if pol.shape[1:3] != (mdp.horizon, mdp.num_states):
        raise ValueError("base policies must cover every (h, x)")
    return float(kernels.master_value(P, R, mdp.initial_dist, pol,
                                      np.asarray(master.kernel, dtype=float)))


def evaluate(mdp: TabularMdp, announced) -> float:
    """Value of any announced policy representation."""
    if isinstance(announced, MasterPolicy):
        return evaluate_master_policy(mdp, announced)
    return evaluate_policy(mdp, announced)


def gap_complexity(solution: OptimalSolution, H: int) -> float:
    """Sum over Z_sub of H/gap(x,a) plus H^2 |Z_opt| / gap_min."""
    gaps = solution.gaps
    positive = gaps[gaps > 0]
    if positive.size == 0:
        raise GapUndefinedError("no positive gap: every action is optimal everywhere")
    gap_min = positive.min()
    g = gaps.min(axis=0)                 # gap(x, a) = min_h gap_h(x, a)
    z_opt = g == 0
    return float(np.sum(H / g[~z_opt]) + H * H * np.count_nonzero(z_opt) / gap_min)

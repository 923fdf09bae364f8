"""Episode-level adversaries with a corruption budget.

An adversary fixes the episode MDP after seeing the announced policy and
the history, and before any of the episode's randomness is drawn.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .env import TabularMdp, make_random_tabular
from .oracle import evaluate, optimal_values


@dataclass
class Budget:
    limit: int
    spent: int = 0

    def __post_init__(self):
        if self.limit < 0:
            raise ValueError("corruption budget must be nonnegative")

    @property
    def exhausted(self) -> bool:
        return self.spent >= self.limit

    def charge(self):
        if self.exhausted:
            raise RuntimeError("corruption budget exceeded")
        self.spent += 1


@dataclass(frozen=True)
class AdversaryDecision:
    corrupt: bool
    episode_mdp: TabularMdp

    def digest(self) -> str:
        m = self.episode_mdp
        h = hashlib.sha256()
        h.update(b"1" if self.corrupt else b"0")
        for arr in (m.transition, m.mean_reward, m.initial_dist):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


class Adversary:
    """Base class: front-loaded, proposes a corrupted MDP while budget remains."""

    name = "none"

    def __init__(self, nominal: TabularMdp, C: int):
        self.nominal = nominal
        self.budget = Budget(int(C))

    def propose(self, k, history, announced) -> TabularMdp | None:
        return None

    def decide(self, k, history, announced) -> AdversaryDecision:
        if history is not None and len(history) >= k:
            raise ValueError("history may only contain episodes before k")
        if not self.budget.exhausted:
            mdp = self.propose(k, history, announced)
            if mdp is not None:
                self.budget.charge()
                return AdversaryDecision(True, mdp)
        return AdversaryDecision(False, self.nominal)


class NoAttack(Adversary):
    def __init__(self, nominal, C=0):
        super().__init__(nominal, 0)


class ZeroBestArm(Adversary):
    """Sets the mean reward of every optimal action to zero.

    On a bandit this zeroes the best arm; on an MDP it zeroes the reward of
    the optimal actions stage by stage.  With ``targeted`` the budget is
    only spent on episodes where the announced policy's value actually
    drops under the corruption (on a bandit: whenever the best arm can be
    played).
    """

    name = "zero_best_arm"

    def __init__(self, nominal, C, targeted=False):
        super().__init__(nominal, C)
        self.targeted = targeted
        self._drops = {}
        sol = optimal_values(nominal)
        P, R = nominal.staged()
        R = np.where(sol.optimal_actions, 0.0, R)
        if nominal.stage_dependent or nominal.horizon > 1:
            self.corrupted = nominal.with_stage_tables(np.array(P), R)
        else:
            self.corrupted = nominal.with_stage_tables(nominal.transition, R[0])

    def propose(self, k, history, announced):
        if self.targeted and not self._drops_value(announced):
            return None
        return self.corrupted

    def _drops_value(self, announced) -> bool:
        # both MDPs are fixed, so the answer only depends on the announcement
        key = None
        if isinstance(announced, np.ndarray):
            key = (announced.dtype.str, announced.shape, announced.tobytes())
            if key in self._drops:
                return self._drops[key]
        drops = evaluate(self.corrupted, announced) < evaluate(self.nominal, announced)
        if key is not None:
            self._drops[key] = drops
        return drops


class LockDecoy(Adversary):
    """Stage-1 decoy: ``decoy_action`` pays 1 and action 0 drops into state 0."""

    name = "lock_decoy"

    def __init__(self, nominal, C, decoy_action=1):
        super().__init__(nominal, C)
        if not 0 < decoy_action < nominal.num_actions:
            raise ValueError("decoy action must be a valid nonzero action")
        P, R = nominal.staged()
        P, R = np.array(P), np.array(R)
        R[0, :, decoy_action] = 1.0
        P[0, :, 0, :] = 0.0
        P[0, :, 0, 0] = 1.0
        self.corrupted = nominal.with_stage_tables(P, R)

    def propose(self, k, history, announced):
        return self.corrupted


class FrontRandom(Adversary):
    """Each corrupted episode runs on a fresh random MDP of the same shape."""

    name = "front_random"

    def __init__(self, nominal, C, seed=0):
        super().__init__(nominal, C)
        self.seed = seed

    def propose(self, k, history, announced):
        m = self.nominal
        seed = np.random.SeedSequence(int(self.seed), spawn_key=(int(k),))
        rnd = make_random_tabular(m.num_states, m.num_actions, m.horizon, seed, m.reward_kind)
        return TabularMdp(m.num_states, m.num_actions, m.horizon, rnd.transition,
                          rnd.mean_reward, m.initial_dist, m.reward_kind)


def attack_zero_best_arm(C, targeted=False):
    return lambda nominal: ZeroBestArm(nominal, C, targeted)


def attack_lock_decoy(C, decoy_action=1):
    return lambda nominal: LockDecoy(nominal, C, decoy_action)


def attack_front_random(C, seed=0):
    return lambda nominal: FrontRandom(nominal, C, seed)


ATTACKS = {
    "none": lambda C, **kw: (lambda nominal: NoAttack(nominal)),
    "zero_best_arm": attack_zero_best_arm,
    "lock_decoy": attack_lock_decoy,
    "front_random": attack_front_random,
}


def make_adversary(name, C, nominal, **params) -> Adversary:
    if name not in ATTACKS:
        raise ValueError(f"unknown attack {name!r}; choose from {sorted(ATTACKS)}")
    return ATTACKS[name](C, **params)(nominal)

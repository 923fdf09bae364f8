"""Learner-selection laws.

Learner indices are 1-based in the public API (``1..ell_max``) and
0-based in arrays (column ``f - 1`` holds learner ``f``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def ell_max_for(T: int) -> int:
    """Number of base learners for a declared horizon of T steps."""
    return max(1, math.ceil(math.log2(T))) if T > 1 else 1


def jump_probability(f: int, ell: int, H: int) -> float:
    """Probability of moving from learner f to learner ell > f in one stage."""
    return 2.0 ** (-(ell - f)) / (2.0 * ell * H)


@dataclass(frozen=True)
class ScheduleChain:
    ell_max: int
    horizon: int
    kernel: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L, H = self.ell_max, self.horizon
        if L < 1 or H < 1:
            raise ValueError("ell_max and horizon must be positive")
        K = np.zeros((L, L))
        for f in range(1, L + 1):
            for ell in range(f + 1, L + 1):
                K[f - 1, ell - 1] = jump_probability(f, ell, H)
            K[f - 1, f - 1] = 1.0 - K[f - 1].sum()
        K.setflags(write=False)
        object.__setattr__(self, "kernel", K)
        cdf = np.cumsum(K, axis=1)
        cdf[:, -1] = 1.0
        object.__setattr__(self, "_cdf", cdf)

    def jump_out_mass(self, f: int) -> float:
        return float(self.kernel[f - 1, f:].sum())

    def sample_from_uniforms(self, u) -> np.ndarray:
        """Schedule (l_1..l_H) from H uniforms."""
        out = np.empty(self.horizon, dtype=np.int64)
        f = 0
        cdf = self._cdf
        for h in range(self.horizon):
            f = int(np.searchsorted(cdf[f], u[h], side="right"))
            if f >= self.ell_max:
                f = self.ell_max - 1
            out[h] = f + 1
        return out


def sample_schedule(chain: ScheduleChain, rng: np.random.Generator) -> np.ndarray:
    """Draw (l_1, ..., l_H); l_0 = 1 is implicit and l_H is the charged learner."""
    return chain.sample_from_uniforms(rng.random(chain.horizon))


def exact_marginals(chain: ScheduleChain) -> np.ndarray:
    """Table of Pr[l_h = f], rows h = 0..H, columns f = 1..ell_max."""
    out = np.zeros((chain.horizon + 1, chain.ell_max))
    out[0, 0] = 1.0
    for h in range(1, chain.horizon + 1):
        out[h] = out[h - 1] @ chain.kernel
    return out


def exact_stay_probability(chain: ScheduleChain, h: int, f: int) -> float:
    """Pr[l_H = f | l_h = f]; the chain is nondecreasing so staying means never jumping."""
    if not 0 <= h <= chain.horizon:
        raise ValueError("h out of range")
    stay = 1.0 - chain.jump_out_mass(f)
    p = 1.0
    for _ in range(chain.horizon - h):
        p *= stay
    return p


def exact_final_mass(chain: ScheduleChain):
    """(q_l, q_{<=l}) for l = 1..ell_max, where q_l = Pr[l_H = l]."""
    q = exact_marginals(chain)[-1]
    return q, np.cumsum(q)


def exact_tail_stay(chain: ScheduleChain, h: int, ell: int) -> float:
    """Pr[l_h = ... = l_H = ell | l_H = ell] for 1 <= h <= H."""
    marg = exact_marginals(chain)
    joint = marg[h, ell - 1] * exact_stay_probability(chain, h, ell)
    return joint / marg[-1, ell - 1]


def bandit_learner_probs(ell_max: int) -> np.ndarray:
    """Learner l > 1 with probability 2^-l, the remainder on learner 1."""
    p = np.array([2.0 ** -ell for ell in range(1, ell_max + 1)])
    p[0] = 1.0 - p[1:].sum()
    return p


def bandit_learner_from_uniform(ell_max: int, u: float, _cache={}) -> int:
    cdf = _cache.get(ell_max)
    if cdf is None:
        cdf = np.cumsum(bandit_learner_probs(ell_max))
        cdf[-1] = 1.0
        _cache[ell_max] = cdf
    return min(int(np.searchsorted(cdf, u, side="right")), ell_max - 1) + 1


def sample_bandit_learner(ell_max: int, rng: np.random.Generator) -> int:
    return bandit_learner_from_uniform(ell_max, rng.random())

from .bandit import SupervisedBandC, UcbBandit, supervised_band_c, ucb_bandit, ucb_bandit_known_c
from .base import ActiveSetError, FixedPolicyLearner, Learner, QSupervisor
from .linear import SupervisedCLinear
from .tabular import SupervisedC, SupervisedUnif, Ucbvi, uniform_elimination


def ucbvi(S, A, H, T, delta, clip=False):
    """Optimistic VI for a declared horizon of T = K H steps."""
    return Ucbvi(S, A, H, max(1, T // H), delta, clip=clip)


def supervised_c(env_kind, params):
    """Robust multi-learner VI; ``env_kind`` is "tabular" or "linear".

    Tabular params: S, A, H, K, delta[, ell_max].
    Linear params: features, H, K, delta[, lam, ell_max, beta, bonus_scale].
    """
    if env_kind == "tabular":
        return SupervisedC(**params)
    if env_kind == "linear":
        return SupervisedCLinear(**params)
    raise ValueError(f"unknown env kind {env_kind!r}")


def supervised_unif(S, A, H, T, delta, epsilon):
    return SupervisedUnif(S, A, H, max(1, T // H), delta, epsilon)


__all__ = [
    "ActiveSetError", "FixedPolicyLearner", "Learner", "QSupervisor",
    "SupervisedBandC", "SupervisedC", "SupervisedCLinear", "SupervisedUnif",
    "UcbBandit", "Ucbvi", "supervised_band_c", "supervised_c", "supervised_unif",
    "ucb_bandit", "ucb_bandit_known_c", "ucbvi", "uniform_elimination",
]

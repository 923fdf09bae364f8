"""Run-time checks of the analysis quantities.

Every function reads snapshots and returns plain data; nothing here
touches learner state.  Report dictionaries are JSON-serializable so the
harness can drop them into the run log as they are.
"""
from __future__ import annotations

import math

import numpy as np

from .env import TabularMdp
from .learners.base import QSupervisor
from .oracle import MasterPolicy, OptimalSolution, policy_probs

MAX_LISTED = 20
EXACT_CELL_LIMIT = 10**6


def _triples(mask, limit=MAX_LISTED):
    idx = np.argwhere(mask)[:limit]
    return [[int(h) + 1, int(x), int(a)] for h, x, a in idx]


def check_admissible(sup: QSupervisor, solution: OptimalSolution, tol: float = 1e-9) -> dict:
    """Q_low <= Q* <= Q_up pointwise and every optimal action still active.

    Offending (h, x, a) triples use 1-based h; at most MAX_LISTED of each
    kind are listed, the counts are complete.
    """
    q = solution.q_star
    upper_bad = sup.q_up < q - tol
    lower_bad = sup.q_low > q + tol
    dropped = solution.optimal_actions & ~np.asarray(sup.active, dtype=bool)
    report = {
        "admissible": not (upper_bad.any() or lower_bad.any() or dropped.any()),
        "counts": {"upper": int(upper_bad.sum()), "lower": int(lower_bad.sum()),
                   "inactive_optimal": int(dropped.sum())},
        "upper_violations": _triples(upper_bad),
        "lower_violations": _triples(lower_bad),
        "inactive_optimal": _triples(dropped),
    }
    return report


def bellman_errors(sup: QSupervisor, mdp: TabularMdp):
    """(upper, lower) Bellman error tables, each (H, S, A).

    upper = Q_up_h - (r_h + P_h V_up_{h+1}) with V_up read at the UCB action;
    lower = Q_low_h - (r_h + P_h V_low_{h+1}) with V_low the best active Q_low.
    """
    P, R = mdp.staged()
    v_up, v_low = sup.v_up, sup.v_low
    H = mdp.horizon
    upper = np.empty_like(sup.q_up, dtype=float)
    lower = np.empty_like(sup.q_low, dtype=float)
    for h in range(H):
        upper[h] = sup.q_up[h] - (R[h] + P[h] @ v_up[h + 1])
        lower[h] = sup.q_low[h] - (R[h] + P[h] @ v_low[h + 1])
    return upper, lower


def check_valid(r_est, p_est, bonus, mdp: TabularMdp, solution: OptimalSolution,
                extra_values=(), tol: float = 1e-9) -> dict:
    """Model validity: |r~ - r* + (p~ - p*) . V_{h+1}| <= b at every (h, x, a).

    The test functions V are V*_{h+1} and, for signed estimates, anything in
    ``extra_values`` (each an (H + 1, S) table such as V_up or V_low).  The
    estimate and bonus may be stage-free (S, A[, S]) or staged (H, S, A[, S]).
    """
    P, R = mdp.staged()
    H = mdp.horizon
    r_est = np.broadcast_to(r_est, (H,) + R.shape[1:])
    p_est = np.broadcast_to(p_est, (H,) + P.shape[1:])
    bonus = np.broadcast_to(bonus, (H,) + R.shape[1:])
    tables = [("v_star", solution.v_star)] + [(f"extra_{i}", np.asarray(v))
                                             for i, v in enumerate(extra_values)]
    out = {"valid": True, "max_excess": -math.inf, "violations": {}}
    for name, V in tables:
        err = np.abs(r_est - R + np.einsum("hxay,hy->hxa", p_est - P, V[1:H + 1]))
        bad = err > bonus + tol
        out["violations"][name] = _triples(bad)
        out["max_excess"] = max(out["max_excess"], float(np.max(err - bonus)))
        if bad.any():
            out["valid"] = False
    return out


# ---------------------------------------------------------------- visitation ratio

def _conditioned_kernels(kernel, H, targets):
    """Per-stage kernels of the schedule chain conditioned on its final learner
    lying in ``targets`` (0-based indices); None when that event is null."""
    L = kernel.shape[0]
    goal = np.zeros(L)
    goal[list(targets)] = 1.0
    beta = np.zeros((H + 1, L))
    beta[H] = goal
    for h in range(H - 1, -1, -1):
        beta[h] = kernel @ beta[h + 1]
    if beta[0, 0] <= 0:
        return None
    ks = np.zeros((H, L, L))
    for h in range(1, H + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            k = kernel * beta[h][None, :] / beta[h - 1][:, None]
        ks[h - 1] = np.where(beta[h - 1][:, None] > 0, k, 0.0)
    return ks


def _stage_kernels(master: MasterPolicy, H, final_learner, final_at_most):
    kernel = np.asarray(master.kernel, dtype=float)
    L = kernel.shape[0]
    if final_learner is None:
        return np.broadcast_to(kernel, (H, L, L))
    targets = range(final_learner) if final_at_most else [final_learner - 1]
    ks = _conditioned_kernels(kernel, H, targets)
    if ks is None:
        raise ValueError("the schedule never ends on the requested learner(s)")
    return ks


def _resolve_ucb(master, ucb_policy, final_learner, A):
    if ucb_policy is None:
        if final_learner is None:
            raise ValueError("ucb_policy is required without final_learner")
        ucb_policy = np.asarray(master.base_policies)[final_learner - 1]
    return policy_probs(ucb_policy, A)


def _occupancies(mdp, pol, ucb, ks):
    """Actual occupancy (H, S, A) and concatenated occupancies (H, H, S, A),
    the latter indexed [switch stage h - 1, stage tau - 1]."""
    P, _ = mdp.staged()
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    L = pol.shape[0]
    joint = np.zeros((S, L))
    joint[:, 0] = mdp.initial_dist
    actual = np.zeros((H, S, A))
    switched = np.zeros((H, H, S, A))
    for h in range(H):
        joint = joint @ ks[h]                       # learner for stage h + 1
        sa = np.einsum("xl,lxa->xla", joint, pol[:, h])
        actual[h] = sa.sum(axis=1)
        # switch to the UCB policy from this stage on
        d = joint.sum(axis=1)
        for tau in range(h, H):
            occ = d[:, None] * ucb[tau]
            switched[h, tau] = occ
            d = np.einsum("xa,xay->y", occ, P[tau])
        joint = np.einsum("xla,xay->yl", sa, P[h])
    return actual, switched


def exact_visitation_ratio(mdp: TabularMdp, master: MasterPolicy, ucb_policy=None,
                           final_learner: int | None = None, final_at_most: bool = False,
                           tol: float = 1e-15) -> float:
    """Exact UCB visitation ratio via the (state, learner) chain.

    With ``final_learner`` the schedule is conditioned on ending at that
    learner (or at most it, with ``final_at_most``) and the UCB policy
    defaults to that learner's base policy.  Cells the switched policy
    never reaches are ignored; a reachable cell the policy itself misses
    gives an infinite ratio.
    """
    H, A = mdp.horizon, mdp.num_actions
    pol = master.action_probs(A)
    ucb = _resolve_ucb(master, ucb_policy, final_learner, A)
    ks = _stage_kernels(master, H, final_learner, final_at_most)
    actual, switched = _occupancies(mdp, pol, ucb, ks)
    best = 1.0
    for h in range(H):
        for tau in range(h, H):
            num, den = switched[h, tau], actual[tau]
            live = num > tol
            if not live.any():
                continue
            if np.any(den[live] <= tol):
                return math.inf
            best = max(best, float(np.max(num[live] / den[live])))
    return best


def _wilson(count, n, z):
    """Wilson score interval for a binomial proportion."""
    p = count / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return np.maximum(centre - half, 0.0), np.minimum(centre + half, 1.0)


def _sample_rollouts(mdp, pol, ucb, ks, switch, n, rng):
    """Counts (H, S, A) of visits by n rollouts switching to UCB at ``switch``
    (0-based stage index; H means never switch)."""
    P, _ = mdp.staged()
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    counts = np.zeros((H, S, A), dtype=np.int64)
    x = np.searchsorted(np.cumsum(mdp.initial_dist), rng.random(n), side="right")
    x = np.minimum(x, S - 1)
    ell = np.zeros(n, dtype=np.int64)
    for h in range(H):
        cdf = np.cumsum(ks[h][ell], axis=1)
        ell = np.minimum((cdf < rng.random(n)[:, None]).sum(axis=1), ks.shape[1] - 1)
        probs = ucb[h][x] if h >= switch else pol[ell, h, x]
        a = np.minimum((np.cumsum(probs, axis=1) < rng.random(n)[:, None]).sum(axis=1), A - 1)
        np.add.at(counts[h], (x, a), 1)
        cdf = np.cumsum(P[h][x, a], axis=1)
        x = np.minimum((cdf < rng.random(n)[:, None]).sum(axis=1), S - 1)
    return counts


def monte_carlo_visitation_ratio(mdp: TabularMdp, master: MasterPolicy, num_samples: int,
                                 rng: np.random.Generator, ucb_policy=None,
                                 final_learner: int | None = None,
                                 final_at_most: bool = False, z: float = 1.96) -> dict:
    """Sampled ratio: point estimate and a one-sided lower-confidence value.

    The lower value divides a Wilson lower bound of the switched visit
    frequency by a Wilson upper bound of the actual one, cell by cell.
    """
    H, A = mdp.horizon, mdp.num_actions
    pol = master.action_probs(A)
    ucb = _resolve_ucb(master, ucb_policy, final_learner, A)
    ks = _stage_kernels(master, H, final_learner, final_at_most)
    n = int(num_samples)
    actual = _sample_rollouts(mdp, pol, ucb, ks, H, n, rng)
    _, den_hi = _wilson(actual, n, z)
    point, lower = 1.0, 1.0
    for h in range(H):
        sw = _sample_rollouts(mdp, pol, ucb, ks, h, n, rng)
        for tau in range(h, H):
            num = sw[tau]
            live = num > 0
            if not live.any():
                continue
            seen = live & (actual[tau] > 0)
            if np.any(live & (actual[tau] == 0)):
                point = math.inf
            elif seen.any():
                point = max(point, float(np.max(num[seen] / actual[tau][seen])))
            num_lo, _ = _wilson(num, n, z)
            lower = max(lower, float(np.max(num_lo[live] / den_hi[tau][live])))
    return {"method": "monte_carlo", "num_samples": n, "point": point, "lower": lower}


def estimate_visitation_ratio(mdp: TabularMdp, master: MasterPolicy, num_samples: int,
                              rng: np.random.Generator, ucb_policy=None,
                              final_learner: int | None = None,
                              final_at_most: bool = False) -> float:
    """UCB visitation ratio: exact when the chain is small enough, else the
    Monte Carlo lower-confidence value."""
    cells = mdp.num_states * mdp.num_actions * mdp.horizon * master.num_learners
    if cells <= EXACT_CELL_LIMIT:
        return exact_visitation_ratio(mdp, master, ucb_policy, final_learner, final_at_most)
    rep = monte_carlo_visitation_ratio(mdp, master, num_samples, rng, ucb_policy,
                                       final_learner, final_at_most)
    return rep["lower"]

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrl.diagnostics import (bellman_errors, check_admissible, check_valid,
                               estimate_visitation_ratio, exact_visitation_ratio,
                               monte_carlo_visitation_ratio)
from corrl.env import TabularMdp, make_combination_lock, make_random_tabular
from corrl.estimators import TabularStats
from corrl.learners import QSupervisor, SupervisedC
from corrl.oracle import MasterPolicy, optimal_values
from corrl.schedule import ScheduleChain


def star_supervisor(mdp):
    sol = optimal_values(mdp)
    q = sol.q_star
    full = np.ones(q.shape, dtype=bool)
    return QSupervisor(q.copy(), q.copy(), full, sol.greedy_policy), sol


def trivial_supervisor(mdp):
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    return QSupervisor(np.full((H, S, A), float(H)), np.zeros((H, S, A)),
                       np.ones((H, S, A), dtype=bool), np.zeros((H, S), dtype=np.int64))


# ---------------------------------------------------------------- admissibility

def test_widest_supervisor_is_admissible():
    mdp = make_random_tabular(4, 3, 3, 0)
    rep = check_admissible(trivial_supervisor(mdp), optimal_values(mdp))
    assert rep["admissible"]
    assert rep["counts"] == {"upper": 0, "lower": 0, "inactive_optimal": 0}


def test_upper_violation_is_reported():
    mdp = make_combination_lock(2, 3)
    sup = trivial_supervisor(mdp)
    q_up = sup.q_up.copy()
    q_up[2, 3, 0] = 0.5          # Q*_3(lock end, 0) = 1
    rep = check_admissible(QSupervisor(q_up, sup.q_low, sup.active, sup.ucb_policy),
                           optimal_values(mdp))
    assert not rep["admissible"]
    assert rep["upper_violations"] == [[3, 3, 0]]
    assert rep["counts"]["upper"] == 1


def test_dropped_optimal_action_is_reported():
    mdp = make_combination_lock(2, 2)
    sup = trivial_supervisor(mdp)
    active = sup.active.copy()
    active[0, 1, 0] = False
    rep = check_admissible(QSupervisor(sup.q_up, sup.q_low, active, sup.ucb_policy),
                           optimal_values(mdp))
    assert not rep["admissible"]
    assert rep["inactive_optimal"] == [[1, 1, 0]]
    json.dumps(rep)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 4))
def test_star_supervisor_always_admissible(seed, S, A, H):
    mdp = make_random_tabular(S, A, H, seed)
    sup, sol = star_supervisor(mdp)
    assert check_admissible(sup, sol)["admissible"]


def test_listing_is_capped():
    mdp = make_random_tabular(10, 3, 3, 0)
    sup = trivial_supervisor(mdp)
    bad = QSupervisor(np.full_like(sup.q_up, -1.0), sup.q_low, sup.active, sup.ucb_policy)
    rep = check_admissible(bad, optimal_values(mdp))
    assert rep["counts"]["upper"] == 90
    assert len(rep["upper_violations"]) == 20


# ---------------------------------------------------------------- Bellman errors

@settings(max_examples=25)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 4))
def test_q_star_has_zero_bellman_error(seed, S, A, H):
    mdp = make_random_tabular(S, A, H, seed)
    sup, _ = star_supervisor(mdp)
    up, low = bellman_errors(sup, mdp)
    assert np.abs(up).max() <= 1e-9
    assert np.abs(low).max() <= 1e-9


def test_shift_at_one_stage():
    P = np.array([[[0.3, 0.7], [1.0, 0.0]], [[0.5, 0.5], [0.2, 0.8]]])
    R = np.array([[0.1, 0.9], [0.4, 0.6]])
    mdp = TabularMdp(2, 2, 2, P, R, np.array([1.0, 0.0]))
    sup, _ = star_supervisor(mdp)
    c = 0.25
    q_up = sup.q_up.copy()
    q_up[1] += c
    shifted = QSupervisor(q_up, sup.q_low, sup.active, sup.ucb_policy)
    up, _ = bellman_errors(shifted, mdp)
    # stage 2 moves by +c; stage 1 sees V_up_2 raised by c through unit row mass
    assert np.allclose(up[1], c)
    assert np.allclose(up[0], -c)


def test_zero_mdp_zero_errors():
    mdp = TabularMdp(2, 2, 3, np.full((2, 2, 2), 0.5), np.zeros((2, 2)), np.array([0.5, 0.5]))
    z = np.zeros((3, 2, 2))
    sup = QSupervisor(z, z, np.ones((3, 2, 2), dtype=bool), np.zeros((3, 2), dtype=np.int64))
    up, low = bellman_errors(sup, mdp)
    assert not up.any() and not low.any()


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 4))
def test_bellman_errors_bounded(seed, S, A, H):
    # any tables with values in [0, H] and rewards in [0, 1]
    rng = np.random.default_rng(seed)
    mdp = make_random_tabular(S, A, H, seed)
    q_up = rng.uniform(0, H, size=(H, S, A))
    q_low = rng.uniform(0, H, size=(H, S, A))
    active = rng.random((H, S, A)) < 0.7
    active[..., 0] = True
    pol = np.argmax(np.where(active, q_up, -np.inf), axis=-1)
    up, low = bellman_errors(QSupervisor(q_up, q_low, active, pol), mdp)
    assert max(np.abs(up).max(), np.abs(low).max()) <= 2 * H + 1


def test_bellman_errors_do_not_touch_learner():
    ag = SupervisedC(3, 2, 2, 10, 0.1)
    ag.announce()
    before = ag.q_up.copy()
    sup = ag.supervisor(1)
    bellman_errors(sup, make_random_tabular(3, 2, 2, 0))
    check_admissible(sup, optimal_values(make_random_tabular(3, 2, 2, 0)))
    assert np.array_equal(ag.q_up, before)


# ---------------------------------------------------------------- validity

def test_exact_model_is_valid_with_zero_bonus():
    mdp = make_random_tabular(3, 2, 3, 0)
    rep = check_valid(mdp.mean_reward, mdp.transition, 0.0, mdp, optimal_values(mdp))
    assert rep["valid"]
    assert rep["max_excess"] <= 1e-12


def test_estimated_model_validity():
    mdp = make_random_tabular(3, 2, 2, 1)
    sol = optimal_values(mdp)
    rng = np.random.default_rng(0)
    stats = TabularStats(3, 2)
    from corrl.env import step
    for _ in range(3000):
        x, a = rng.integers(3), rng.integers(2)
        r, y = step(mdp, x, a, rng)
        stats.add(x, a, r, y)
    r_hat, p_hat = stats.model()
    assert not check_valid(r_hat, p_hat, 0.0, mdp, sol)["valid"]
    wide = check_valid(r_hat, p_hat, 0.5, mdp, sol, extra_values=[np.full((3, 3), 2.0)])
    assert wide["valid"]
    assert set(wide["violations"]) == {"v_star", "extra_0"}
    tight = check_valid(r_hat, p_hat, 1e-6, mdp, sol)
    assert tight["violations"]["v_star"]
    assert all(len(t) == 3 and t[0] >= 1 for t in tight["violations"]["v_star"])


# ---------------------------------------------------------------- visitation ratio

def random_master(seed, S, A, H, L):
    rng = np.random.default_rng(seed)
    mdp = make_random_tabular(S, A, H, seed)
    p0 = rng.dirichlet(np.ones(S))
    mdp = TabularMdp(S, A, H, mdp.transition, mdp.mean_reward, p0)
    base = rng.integers(0, A, size=(L, H, S))
    return mdp, MasterPolicy.scheduled(base, ScheduleChain(L, H))


def test_identical_base_policies_ratio_one():
    mdp = make_random_tabular(3, 2, 4, 0)
    pol = np.random.default_rng(0).integers(0, 2, size=(4, 3))
    master = MasterPolicy.scheduled(np.stack([pol] * 3), ScheduleChain(3, 4))
    assert exact_visitation_ratio(mdp, master, ucb_policy=pol) == pytest.approx(1.0)
    for ell in (1, 2, 3):
        assert exact_visitation_ratio(mdp, master, final_learner=ell) == pytest.approx(1.0)


def test_single_stage_ratio_is_one_step_law_ratio():
    S, A, L = 2, 3, 2
    p0 = np.array([0.4, 0.6])
    mdp = TabularMdp(S, A, 1, np.full((S, A, S), 0.5), np.zeros((S, A)), p0)
    base = np.array([[[0.5, 0.5, 0.0], [0.2, 0.3, 0.5]],
                     [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]])[:, None]
    chain = ScheduleChain(L, 1)
    master = MasterPolicy.scheduled(base, chain)
    ucb = np.array([[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]])
    w = chain.kernel[0]
    actual = np.einsum("l,lxa->xa", w, base[:, 0])
    expect = np.max(ucb[0] / actual)
    assert exact_visitation_ratio(mdp, master, ucb_policy=ucb) == pytest.approx(expect)


def test_unreached_action_gives_infinite_ratio():
    mdp = make_combination_lock(2, 2)
    master = MasterPolicy.scheduled(np.zeros((1, 2, 3), dtype=np.int64), ScheduleChain(1, 2))
    ucb = np.ones((2, 3), dtype=np.int64)
    assert exact_visitation_ratio(mdp, master, ucb_policy=ucb) == math.inf


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(2, 3), st.integers(1, 5),
       st.integers(1, 5))
def test_conditioned_ratio_below_bound(seed, S, A, H, L):
    mdp, master = random_master(seed, S, A, H, L)
    for ell in range(1, L + 1):
        rho = exact_visitation_ratio(mdp, master, final_learner=ell)
        assert 1.0 <= rho <= 4 * math.e * H * ell


def test_monte_carlo_lower_value_tracks_exact():
    mdp, master = random_master(7, 3, 2, 3, 3)
    exact = exact_visitation_ratio(mdp, master, final_learner=2)
    rep = monte_carlo_visitation_ratio(mdp, master, 40_000, np.random.default_rng(1),
                                       final_learner=2)
    assert rep["lower"] <= exact * 1.02
    assert rep["point"] == pytest.approx(exact, rel=0.1)
    json.dumps(rep)


def test_estimate_uses_exact_path_when_small():
    mdp, master = random_master(3, 3, 2, 3, 2)
    rng = np.random.default_rng(0)
    assert estimate_visitation_ratio(mdp, master, 100, rng, final_learner=1) == \
        exact_visitation_ratio(mdp, master, final_learner=1)


def test_ratio_needs_a_ucb_policy():
    mdp, master = random_master(3, 3, 2, 3, 2)
    with pytest.raises(ValueError):
        exact_visitation_ratio(mdp, master)

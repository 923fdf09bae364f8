import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf, log as mlog, sqrt as msqrt

from corrl.estimators import (REFRESH_EVERY, CorruptionLog, RidgeModel, TabularStats,
                              bandit_bonuses, compute_beta, count_corrupted_global,
                              count_corrupted_sub, linear_bonus_global, linear_bonus_sub,
                              predict_value, ridge_corruption_bound, ridge_fit,
                              ridge_prediction_gap, tabular_bonus_global, tabular_bonus_sub,
                              ucb_bonus, ucbvi_bonus)

mp.dps = 40

# frozen high-precision values (recomputed below with mpmath as a cross-check)
GLOBAL_BONUS_EXAMPLE = 0.7616842859449250
SUB_BONUS_EXAMPLE = 0.8864178297283514
BETA_EXAMPLE = 282.70677034535692
LINEAR_BONUS_EXAMPLE = 1962.4425789756270


def test_tabular_global_bonus_value():
    S, A, H, T, d, ell, N = 2, 2, 2, 100, mpf("0.1"), 1, 1000
    ref = 2 * H * msqrt(2 * mlog(64 * S * A * H * T**2 / d) / N) + 2**ell * H * H / mpf(N)
    assert float(ref) == pytest.approx(GLOBAL_BONUS_EXAMPLE, rel=1e-15)
    assert tabular_bonus_global(1000, 1, 0.1, 2, 2, 2, 100) == pytest.approx(GLOBAL_BONUS_EXAMPLE, rel=1e-13)


def test_tabular_sub_bonus_value():
    S, A, H, T, d, ell, N = 2, 2, 2, 100, mpf("0.1"), 1, 1000
    ref = 2 * H * msqrt(2 * mlog(64 * S * A * H * T**3 / d) / N) + 2 * H * H * mlog(16 * ell**2 / d) / N
    assert float(ref) == pytest.approx(SUB_BONUS_EXAMPLE, rel=1e-15)
    assert tabular_bonus_sub(1000, 1, 0.1, 2, 2, 2, 100) == pytest.approx(SUB_BONUS_EXAMPLE, rel=1e-13)


def test_tabular_bonus_clamps_and_zero_count():
    assert tabular_bonus_global(0, 1, 0.1, 2, 2, 3, 100) == 3
    assert tabular_bonus_sub(0, 1, 0.1, 2, 2, 3, 100) == 3
    assert tabular_bonus_global(1, 2, 0.1, 2, 2, 3, 100) == 3      # 2^ell H^2 >= H
    assert ucbvi_bonus(0, 0.1, 2, 2, 3, 100) == 3


@given(st.integers(1, 10**6), st.integers(1, 20))
def test_bonuses_nonincreasing_in_n(n, ell):
    for fn in (tabular_bonus_global, tabular_bonus_sub):
        a, b = fn(n, ell, 0.05, 5, 3, 4, 8000), fn(n + 1, ell, 0.05, 5, 3, 4, 8000)
        assert 0 <= b <= a <= 4


def test_bonus_vanishes():
    assert tabular_bonus_global(10**15, 1, 0.05, 5, 3, 4, 8000) < 1e-5


def test_bonus_vectorized_over_learners():
    N = np.array([[0, 1, 50, 4000]])
    ells = np.arange(1, 4, dtype=float)[:, None]
    table = tabular_bonus_global(N, ells, 0.05, 5, 3, 4, 8000)
    for i, ell in enumerate([1, 2, 3]):
        for j, n in enumerate(N[0]):
            assert table[i, j] == pytest.approx(tabular_bonus_global(int(n), ell, 0.05, 5, 3, 4, 8000))


def test_beta_and_linear_bonus():
    ref = 14 * msqrt(30 * mlog(mpf(2) * 2 * 100**2 * 2 / mpf("0.1")))
    assert float(ref) == pytest.approx(BETA_EXAMPLE, rel=1e-15)
    beta = compute_beta(2, 2, 100, 2, 0.1)
    assert beta == pytest.approx(BETA_EXAMPLE, rel=1e-13)
    phi = np.array([1.0, 0.0])
    b = linear_bonus_global(phi, np.eye(2), 1, beta, 2, 2, 2)
    assert b == pytest.approx(LINEAR_BONUS_EXAMPLE, rel=1e-12)
    assert b == pytest.approx(beta * (2 + math.sqrt(2)) * 2 + 4 * 4 * 2)


def test_beta_monotone_in_delta():
    assert compute_beta(3, 2, 500, 3, 0.2) < compute_beta(3, 2, 500, 3, 0.1)


def _ellipsoid_part(phi, Lam, beta, d, A, H, ell):
    """Strip the Euclidean term off the global bonus."""
    euclid = np.linalg.norm(np.linalg.solve(Lam, phi))
    return linear_bonus_global(phi, Lam, ell, beta, d, A, H) - 4 * H * H * 2.0**ell * euclid


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.integers(0, 10**6))
def test_ellipsoid_term_shrinks_with_rank_one_updates(v, seed):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=3)
    phi /= max(1.0, np.linalg.norm(phi))
    Lam = np.eye(3) + np.diag(rng.uniform(0, 2, 3))
    bigger = Lam + np.outer(v, v)
    assert _ellipsoid_part(phi, bigger, 10.0, 3, 2, 2, 2) <= _ellipsoid_part(phi, Lam, 10.0, 3, 2, 2, 2) + 1e-9


def test_euclidean_term_can_grow_under_rank_one_update():
    # ||Lambda^-1 phi||_2 is not monotone in the PSD order, so the full bonus
    # is not either; this instance shows it
    Lam = np.diag([1.0, 16.0])
    phi = np.array([0.0, 1.0])
    bigger = Lam + np.outer([1.5, -2.5], [1.5, -2.5])
    assert np.linalg.norm(np.linalg.solve(bigger, phi)) > np.linalg.norm(np.linalg.solve(Lam, phi))
    assert (linear_bonus_global(phi, bigger, 3, 0.0, 2, 2, 1)
            > linear_bonus_global(phi, Lam, 3, 0.0, 2, 2, 1))


def test_linear_sub_uses_smaller_cbar():
    phi = np.array([0.6, 0.8])
    glob = linear_bonus_global(phi, np.eye(2), 10, 0.0, 2, 2, 1)
    sub = linear_bonus_sub(phi, np.eye(2), 10, 0.0, 2, 2, 1, 0.05)
    assert sub == pytest.approx(4 * 2 * math.log(1600 / 0.05))
    assert glob == pytest.approx(4 * 2.0**10)


def test_bandit_bonuses():
    assert bandit_bonuses(1, 0, 1, 0.05, 2, 100) == (1.0, 1.0)
    g, s = bandit_bonuses(10, 5, 2, 0.05, 2, 100)
    lt = 2 * math.log(32 * 2 * 100**3 / 0.05)
    assert g == pytest.approx(math.sqrt(lt / 10) + 4 / 10)
    assert s == pytest.approx(math.sqrt(lt / 5) + 2 * math.log(16 * 4 / 0.05) / 5)
    assert ucb_bonus(0, 2, 100, 0.05) == np.inf


def test_tabular_stats_consistency(rng):
    st_ = TabularStats(3, 2)
    for _ in range(200):
        st_.add(rng.integers(3), rng.integers(2), float(rng.random() < 0.4), rng.integers(3))
    r, p = st_.model()
    N = st_.counts
    assert np.array_equal(N, st_.trans_counts.sum(-1))
    seen = N > 0
    assert np.allclose(p[seen].sum(-1), 1.0)
    assert np.allclose(r * N, st_.reward_sum)
    assert r.min() >= 0 and r.max() <= 1


def test_tabular_stats_zero_count_placeholder():
    r, p = TabularStats(4, 2).model()
    assert np.all(r == 0) and np.allclose(p, 0.25)


def _dense_ridge(X, y, lam):
    return np.linalg.solve(X.T @ X + lam * np.eye(X.shape[1]), X.T @ y)


def test_ridge_one_sample():
    m = ridge_fit((np.array([[1.0, 0.0]]), np.array([1.0]), np.array([0])), 1.0)
    assert np.allclose(m.theta, [0.5, 0.0])


def test_ridge_empty():
    m = RidgeModel(3, 1.0, 2)
    assert np.all(m.theta == 0) and np.array_equal(m.cov, np.eye(3))
    assert predict_value(m, np.ones(3), np.ones(2)) == 0.0


def test_predict_value_one_transition():
    m = ridge_fit((np.array([[1.0, 0.0]]), np.array([0.0]), np.array([3])), 1.0, num_states=4)
    V = 5.0 * (np.arange(4) == 3)
    assert predict_value(m, np.array([1.0, 0.0]), V) == pytest.approx(2.5)


@pytest.mark.parametrize("seed", range(20))
def test_ridge_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    d, n, S = rng.integers(1, 9), rng.integers(0, 51), 5
    X = rng.normal(size=(n, d))
    y = rng.random(n)
    nx = rng.integers(0, S, n)
    m = ridge_fit((X.reshape(n, d), y, nx), 1.0, S)
    assert np.allclose(m.theta, _dense_ridge(X.reshape(n, d), y, 1.0), atol=1e-9)
    # explicit mu_hat = sum_i e_{x'_i} phi_i^T Lambda^-1
    E = np.eye(S)[nx] if n else np.zeros((0, S))
    mu = E.T @ X @ np.linalg.inv(X.T @ X + np.eye(d))
    q = rng.normal(size=d)
    V = rng.random(S)
    assert predict_value(m, q, V) == pytest.approx(float(V @ mu @ q), abs=1e-9)
    assert np.allclose(m.pseudo_transitions(q), mu @ q, atol=1e-9)


def test_incremental_inverse_stays_accurate(rng):
    m = RidgeModel(4, 1.0)
    for i in range(3 * REFRESH_EVERY + 17):
        m.add(rng.normal(size=4) / 2, rng.random())
        if i % 97 == 0:
            assert np.allclose(m.cov @ m.cov_inv, np.eye(4), atol=1e-8)
    assert np.linalg.eigvalsh(m.cov).min() >= 1.0 - 1e-9


def test_ridge_worked_corruption_instance():
    X = np.array([[1.0], [1.0]])
    clean, bad = np.array([1.0, 1.0]), np.array([1.0, 0.0])
    gap = ridge_prediction_gap(X, bad, clean, 1.0, np.array([1.0]), np.array([1.0]))
    bound = ridge_corruption_bound(1, 1, 1, X, 1.0, np.array([1.0]))
    assert gap == pytest.approx(1 / 3) and bound == pytest.approx(2 / 3)


@given(st.integers(0, 10**6))
def test_ridge_corruption_bound_holds(seed):
    rng = np.random.default_rng(seed)
    d, n, k = rng.integers(1, 6), rng.integers(1, 30), rng.integers(2, 5)
    X = rng.normal(size=(n, d))
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
    clean = rng.dirichlet(np.ones(k), size=n)
    C = int(rng.integers(0, n + 1))
    bad = clean.copy()
    bad[rng.choice(n, C, replace=False)] = rng.dirichlet(np.ones(k), size=C)
    x = rng.normal(size=d)
    f = rng.uniform(-1, 1, size=k)
    H = 1
    gap = ridge_prediction_gap(X, bad, clean, 1.0, x, f)
    assert gap <= ridge_corruption_bound(C, H, 1.0, X, 1.0, x) + 1e-12


def test_corruption_counts():
    log = CorruptionLog()
    log.append([True, False, True], 2)
    log.append([False, False, False], 1)
    log.append([True, True, False], 2)
    assert count_corrupted_global(log) == 4
    assert count_corrupted_sub(log, 2) == 4 and count_corrupted_sub(log, 1) == 0

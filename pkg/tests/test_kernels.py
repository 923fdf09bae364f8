"""Both kernel backends against a plain loop reference."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from corrl import _kernels_py, kernels
from corrl.schedule import ScheduleChain

BACKENDS = sorted(kernels.BACKENDS)


def reference_vi(r_gl, p_gl, b_gl, r_sb, p_sb, b_sb, H):
    L, S, A = b_gl.shape
    q_up = np.zeros((L, H, S, A))
    q_low = np.zeros((L, H, S, A))
    active = np.zeros((L, H, S, A), dtype=bool)
    policy = np.zeros((L, H, S), dtype=int)
    act_next = np.ones((H, S, A), dtype=bool)
    for l in reversed(range(L)):
        active[l] = act_next
        v_up, v_lo = np.zeros(S), np.zeros(S)
        new_up, new_lo = np.zeros(S), np.zeros(S)
        for h in reversed(range(H)):
            for x in range(S):
                for a in range(A):
                    g = r_gl[x, a] + sum(p_gl[x, a, y] * v_up[y] for y in range(S))
                    s = r_sb[l, x, a] + sum(p_sb[l, x, a, y] * v_up[y] for y in range(S))
                    q_up[l, h, x, a] = min(H, g + b_gl[l, x, a], s + b_sb[l, x, a])
                    g = r_gl[x, a] + sum(p_gl[x, a, y] * v_lo[y] for y in range(S))
                    s = r_sb[l, x, a] + sum(p_sb[l, x, a, y] * v_lo[y] for y in range(S))
                    q_low[l, h, x, a] = min(H, max(0.0, g - b_gl[l, x, a], s - b_sb[l, x, a]))
                acts = [a for a in range(A) if active[l, h, x, a]]
                if not acts:
                    raise LookupError("empty active set")
                best = acts[0]
                for a in acts:
                    if q_up[l, h, x, a] > q_up[l, h, x, best]:
                        best = a
                policy[l, h, x] = best
                new_up[x] = q_up[l, h, x, best]
                new_lo[x] = max(q_low[l, h, x, a] for a in acts)
            v_up, v_lo = new_up.copy(), new_lo.copy()
        act_next = active[l] & (q_up[l] >= np.max(np.where(active[l], q_low[l], -np.inf),
                                                   axis=-1, keepdims=True) - 1e-9)
    return q_up, q_low, active, policy


def random_inputs(seed, S, A, H, L):
    rng = np.random.default_rng(seed)
    p_gl = rng.dirichlet(np.ones(S), size=(S, A))
    p_sb = rng.dirichlet(np.ones(S), size=(L, S, A))
    # coarse values make ties common, which exercises the tie-break
    r_gl = rng.integers(0, 3, size=(S, A)) / 2
    r_sb = rng.integers(0, 3, size=(L, S, A)) / 2
    b_gl = rng.integers(0, 4, size=(L, S, A)) / 4 * H
    b_sb = rng.integers(0, 4, size=(L, S, A)) / 4 * H
    return r_gl, p_gl, b_gl, r_sb, p_sb, b_sb, H


def run(mod, args):
    L, S, A = args[2].shape
    H = args[-1]
    out = (np.zeros((L, H, S, A)), np.zeros((L, H, S, A)), np.zeros((L, H, S, A), dtype=np.uint8),
           np.zeros((L, H, S), dtype=np.int64))
    mod.two_estimate_vi(*args, *out)
    return out


@pytest.mark.parametrize("backend", BACKENDS)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 4), st.integers(1, 4))
def test_vi_matches_reference(backend, seed, S, A, H, L):
    args = random_inputs(seed, S, A, H, L)
    try:
        ref = reference_vi(*args)
    except LookupError:
        # inconsistent random estimates can empty a set; the kernel must say so
        with pytest.raises(RuntimeError):
            run(kernels.BACKENDS[backend], args)
        return
    q_up, q_low, active, policy = run(kernels.BACKENDS[backend], args)
    assert np.allclose(q_up, ref[0], atol=1e-12) and np.allclose(q_low, ref[1], atol=1e-12)
    assert np.array_equal(active.astype(bool), ref[2])
    # summation order differs, so exact ties may split either way
    picked = np.take_along_axis(ref[0], policy[..., None], -1)[..., 0]
    expect = np.take_along_axis(ref[0], ref[3][..., None], -1)[..., 0]
    assert np.allclose(picked, expect, atol=1e-12)
    assert np.take_along_axis(ref[2], policy[..., None], -1).all()


@pytest.mark.parametrize("backend", BACKENDS)
def test_vi_rejects_empty_active_set(backend):
    # a lower estimate above every upper estimate leaves nothing for learner 1
    S, A, H, L = 1, 2, 1, 2
    r_gl = np.zeros((S, A))
    p_gl = np.ones((S, A, S))
    b_gl = np.zeros((L, S, A))
    r_sb = np.array([[[0.0, 0.0]], [[0.0, 1.0]]])
    b_sb = np.array([[[1.0, 1.0]], [[0.0, 0.0]]])
    # learner 2: q_up = min(1, 0, r_sb) = 0 for both, q_low = max(0, 0, r_sb) = (0, 1)
    with pytest.raises(RuntimeError):
        run(kernels.BACKENDS[backend], (r_gl, p_gl, b_gl, r_sb, np.ones((L, S, A, S)), b_sb, H))


@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 4), st.integers(1, 4))
def test_master_value_backends_agree(seed, S, A, H, L):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(S), size=(H, S, A))
    R = rng.random((H, S, A))
    p0 = rng.dirichlet(np.ones(S))
    pol = rng.dirichlet(np.ones(A), size=(L, H, S))
    K = ScheduleChain(L, H).kernel
    vals = [mod.master_value(P, R, p0, pol, K) for mod in kernels.BACKENDS.values()]
    assert max(vals) - min(vals) <= 1e-12


def test_backend_switch_roundtrip():
    start = kernels.backend
    kernels.use_backend("python")
    assert kernels._impl is _kernels_py
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
    kernels.use_backend(start)
    assert kernels.backend == start


def test_compiled_backend_is_built():
    # the editable install builds the extension; the fallback is only for
    # environments without a compiler
    assert "compiled" in kernels.BACKENDS

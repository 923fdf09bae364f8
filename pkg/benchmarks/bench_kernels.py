"""Compiled vs numpy kernels: wall time per call and agreement.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from corrl import _kernels_py
from corrl.kernels import BACKENDS
from corrl.schedule import ScheduleChain


def vi_inputs(S, A, H, L, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(S), size=(S, A))
    p_sb = rng.dirichlet(np.ones(S), size=(L, S, A))
    args = (rng.random((S, A)), p, rng.random((L, S, A)) * H,
            rng.random((L, S, A)), p_sb, rng.random((L, S, A)) * H, H)
    outs = lambda: (np.zeros((L, H, S, A)), np.zeros((L, H, S, A)),
                    np.zeros((L, H, S, A), dtype=np.uint8), np.zeros((L, H, S), dtype=np.int64))
    return args, outs


def master_inputs(S, A, H, L, seed=0):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(S), size=(H, S, A))
    R = rng.random((H, S, A))
    p0 = rng.dirichlet(np.ones(S))
    # the learners announce deterministic base policies, so one-hot rows
    pol = np.zeros((L, H, S, A))
    np.put_along_axis(pol, rng.integers(0, A, size=(L, H, S, 1)), 1.0, axis=-1)
    return P, R, p0, pol, ScheduleChain(L, H).kernel


def timeit(fn, repeat):
    fn()
    t = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t) / repeat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if "compiled" not in BACKENDS:
        print("compiled backend not built; only the numpy fallback is available")
    sizes = [(5, 3, 4, 13), (20, 4, 10, 16), (50, 5, 20, 18)]
    print(f"{'kernel':<16}{'S,A,H,L':<16}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for S, A, H, L in sizes:
        vi_args, outs = vi_inputs(S, A, H, L)
        res = {}
        for name, mod in BACKENDS.items():
            o = outs()
            res[name] = (timeit(lambda: mod.two_estimate_vi(*vi_args, *o), args.repeat), o)
        _row("two_estimate_vi", (S, A, H, L), res)
        if len(res) == 2:
            # float tables agree to rounding (summation order differs); choices exactly
            q_py, low_py, act_py, pol_py = res["python"][1]
            q_c, low_c, act_c, pol_c = res["compiled"][1]
            assert np.allclose(q_py, q_c, atol=1e-12) and np.allclose(low_py, low_c, atol=1e-12)
            assert np.array_equal(act_py, act_c) and np.array_equal(pol_py, pol_c)
        m_args = master_inputs(S, A, H, L)
        res = {name: (timeit(lambda: mod.master_value(*m_args), args.repeat), mod.master_value(*m_args))
               for name, mod in BACKENDS.items()}
        _row("master_value", (S, A, H, L), res)
        if len(res) == 2:
            assert abs(res["python"][1] - res["compiled"][1]) < 1e-10, "backends disagree"
    assert _kernels_py is BACKENDS["python"]


def _row(kernel, dims, res):
    py = res["python"][0] * 1e3
    comp = res["compiled"][0] * 1e3 if "compiled" in res else float("nan")
    print(f"{kernel:<16}{','.join(map(str, dims)):<16}{py:>12.3f}{comp:>14.3f}{py / comp:>9.1f}x")


if __name__ == "__main__":
    main()

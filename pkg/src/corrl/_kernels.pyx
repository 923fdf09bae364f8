# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: the nested two-estimate value iteration and the
exact value of a scheduled mixture policy."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def two_estimate_vi(const double[:, :] r_gl, const double[:, :, :] p_gl, const double[:, :, :] b_gl,
                    const double[:, :, :] r_sb, const double[:, :, :, :] p_sb, const double[:, :, :] b_sb,
                    int H,
                    double[:, :, :, :] q_up, double[:, :, :, :] q_low,
                    cnp.uint8_t[:, :, :, :] active, cnp.int64_t[:, :, :] policy):
    """Run the base-learner recursion for l = L..1 in place.

    active[l] is the action set learner l optimises over; the top learner
    gets every action and each learner hands its plausible set down.
    """
    cdef Py_ssize_t L = b_gl.shape[0]
    cdef Py_ssize_t S = r_gl.shape[0]
    cdef Py_ssize_t A = r_gl.shape[1]
    cdef Py_ssize_t l, h, x, a, y, best
    cdef double hh = H
    # slack on the elimination test so rounding never empties an active set
    cdef double tol = 1e-9
    cdef double eg_up, eg_lo, es_up, es_lo, up, lo, bmax, lmax
    cdef double[:, :] vup = np.zeros((H + 1, S))
    cdef double[:, :] vlo = np.zeros((H + 1, S))

    for h in range(H):
        for x in range(S):
            for a in range(A):
                active[L - 1, h, x, a] = 1

    for l in range(L - 1, -1, -1):
        for x in range(S):
            vup[H, x] = 0.0
            vlo[H, x] = 0.0
        for h in range(H - 1, -1, -1):
            for x in range(S):
                for a in range(A):
                    eg_up = r_gl[x, a]
                    eg_lo = r_gl[x, a]
                    es_up = r_sb[l, x, a]
                    es_lo = r_sb[l, x, a]
                    for y in range(S):
                        eg_up += p_gl[x, a, y] * vup[h + 1, y]
                        eg_lo += p_gl[x, a, y] * vlo[h + 1, y]
                        es_up += p_sb[l, x, a, y] * vup[h + 1, y]
                        es_lo += p_sb[l, x, a, y] * vlo[h + 1, y]
                    up = hh
                    if eg_up + b_gl[l, x, a] < up:
                        up = eg_up + b_gl[l, x, a]
                    if es_up + b_sb[l, x, a] < up:
                        up = es_up + b_sb[l, x, a]
                    lo = 0.0
                    if eg_lo - b_gl[l, x, a] > lo:
                        lo = eg_lo - b_gl[l, x, a]
                    if es_lo - b_sb[l, x, a] > lo:
                        lo = es_lo - b_sb[l, x, a]
                    if lo > hh:
                        lo = hh
                    q_up[l, h, x, a] = up
                    q_low[l, h, x, a] = lo
                best = -1
                bmax = 0.0
                lmax = 0.0
                for a in range(A):
                    if active[l, h, x, a]:
                        if best < 0:
                            best = a
                            bmax = q_up[l, h, x, a]
                            lmax = q_low[l, h, x, a]
                        else:
                            if q_up[l, h, x, a] > bmax:
                                best = a
                                bmax = q_up[l, h, x, a]
                            if q_low[l, h, x, a] > lmax:
                                lmax = q_low[l, h, x, a]
                if best < 0:
                    raise RuntimeError("empty active set")
                policy[l, h, x] = best
                vup[h, x] = bmax
                vlo[h, x] = lmax
                if l > 0:
                    for a in range(A):
                        active[l - 1, h, x, a] = active[l, h, x, a] and q_up[l, h, x, a] >= lmax - tol


def master_value(const double[:, :, :, :] P, const double[:, :, :] R, const double[:] p0,
                 const double[:, :, :, :] pol, const double[:, :] kernel):
    """Exact value of the scheduled policy.

    P is (H,S,A,S), R is (H,S,A), pol is (L,H,S,A) action probabilities per
    learner and kernel is the (L,L) per-stage learner transition matrix.
    The learner index starts at 0 before stage 1.
    """
    cdef Py_ssize_t H = P.shape[0]
    cdef Py_ssize_t S = P.shape[1]
    cdef Py_ssize_t A = P.shape[2]
    cdef Py_ssize_t L = pol.shape[0]
    cdef Py_ssize_t h, x, a, y, l, f
    cdef double acc, q, pa, k
    # W[l, y]: value from stage h + 1 on when the chain sits on learner l
    cdef double[:, :] W = np.zeros((L, S))
    cdef double[:, :] Wn = np.zeros((L, S))
    cdef double[:, :] U = np.zeros((L, S))
    for h in range(H - 1, -1, -1):
        for l in range(L):
            for x in range(S):
                acc = 0.0
                for a in range(A):
                    pa = pol[l, h, x, a]
                    if pa == 0.0:
                        continue
                    q = R[h, x, a]
                    for y in range(S):
                        q += P[h, x, a, y] * W[l, y]
                    acc += pa * q
                U[l, x] = acc
        for f in range(L):
            for x in range(S):
                Wn[f, x] = 0.0
            for l in range(L):
                k = kernel[f, l]
                if k != 0.0:
                    for x in range(S):
                        Wn[f, x] += k * U[l, x]
        W, Wn = Wn, W
    acc = 0.0
    for x in range(S):
        acc += p0[x] * W[0, x]
    return acc

"""Pure numpy versions of the compiled kernels (same signatures)."""
import numpy as np

# slack on the elimination test so rounding never empties an active set
ELIM_TOL = 1e-9


def two_estimate_vi(r_gl, p_gl, b_gl, r_sb, p_sb, b_sb, H, q_up, q_low, active, policy):
    L, S, A = b_gl.shape
    active[L - 1] = 1
    rows = np.arange(S)
    for l in range(L - 1, -1, -1):
        vup = np.zeros(S)
        vlo = np.zeros(S)
        for h in range(H - 1, -1, -1):
            up = np.minimum(H, np.minimum(r_gl + p_gl @ vup + b_gl[l],
                                          r_sb[l] + p_sb[l] @ vup + b_sb[l]))
            lo = np.minimum(H, np.maximum(0.0, np.maximum(r_gl + p_gl @ vlo - b_gl[l],
                                            r_sb[l] + p_sb[l] @ vlo - b_sb[l])))
            q_up[l, h] = up
            q_low[l, h] = lo
            act = active[l, h].astype(bool)
            if not act.any(axis=1).all():
                raise RuntimeError("empty active set")
            best = np.argmax(np.where(act, up, -np.inf), axis=1)
            lmax = np.max(np.where(act, lo, -np.inf), axis=1)
            policy[l, h] = best
            vup = up[rows, best]
            vlo = lmax
            if l > 0:
                active[l - 1, h] = act & (up >= lmax[:, None] - ELIM_TOL)


def master_value(P, R, p0, pol, kernel):
    H, S, A, _ = P.shape
    L = pol.shape[0]
    W = np.zeros((S, L))
    for h in range(H - 1, -1, -1):
        # Q[l, x, a] = R + P @ W[:, l]
        Q = R[h][None] + np.einsum("xay,yl->lxa", P[h], W)
        U = np.einsum("lxa,lxa->lx", pol[:, h], Q)
        W = (kernel @ U).T
    return float(p0 @ W[:, 0])

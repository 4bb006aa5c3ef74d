"""Compiled time-t flow for the product kick Hamiltonian on R^4.

Same scheme as the generic numpy integrator (Newton-solved implicit
midpoint composed into a fourth-order symmetric method, with the exact
tangent of each step), specialised to H = eps * tent(p1) plateau(p2)
plateau(q1) tent(q2), with smoothing widths w = (tent inner, tent outer,
plateau p2, plateau q1), so every point is integrated in compiled scalar code.
"""
import numpy as np

from ._jit import numba_jit

YOSHIDA = np.array([
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
    -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0)),
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
])


@numba_jit
def _horner(c, u):
    acc = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * u + c[k]
    return acc


@numba_jit
def _step_parts(cs, cd1, cd2, u):
    if u <= 0.0:
        return 0.0, 0.0, 0.0
    if u >= 1.0:
        return 1.0, 0.0, 0.0
    return _horner(cs, u), _horner(cd1, u), _horner(cd2, u)


@numba_jit
def _step_cum(cint, u):
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return _horner(cint, 1.0) + (u - 1.0)
    return _horner(cint, u)


@numba_jit
def _tent(t, ei, eo, cs, cd1, cd2, cint):
    a = abs(t)
    if a >= 1.0:
        return 0.0, 0.0, 0.0
    sg = 1.0 if t > 0 else (-1.0 if t < 0 else 0.0)
    s_up, d_up, _ = _step_parts(cs, cd1, cd2, a / ei)
    s_dn, d_dn, _ = _step_parts(cs, cd1, cd2, (a - 1.0 + eo) / eo)
    k = s_up * (1.0 - s_dn)
    dk = d_up / ei * (1.0 - s_dn) - s_up * d_dn / eo
    total = ei * _step_cum(cint, 1.0 / ei) - eo * _step_cum(cint, 1.0)
    cum = ei * _step_cum(cint, a / ei) - eo * _step_cum(cint, (a - 1.0 + eo) / eo)
    return total - cum, -sg * k, -dk


@numba_jit
def _plateau(t, e, cs, cd1, cd2):
    a = abs(t)
    sg = 1.0 if t > 0 else (-1.0 if t < 0 else 0.0)
    s, d1, d2 = _step_parts(cs, cd1, cd2, (a - 1.0 + e) / e)
    return 1.0 - s, -sg * d1 / e, -d2 / (e * e)


@numba_jit
def _grad_hess(x, eps, w, cs, cd1, cd2, cint, v, d1, d2, g, S):
    v[0], d1[0], d2[0] = _tent(x[0], w[0], w[1], cs, cd1, cd2, cint)
    v[1], d1[1], d2[1] = _plateau(x[1], w[2], cs, cd1, cd2)
    v[2], d1[2], d2[2] = _plateau(x[2], w[3], cs, cd1, cd2)
    v[3], d1[3], d2[3] = _tent(x[3], w[0], w[1], cs, cd1, cd2, cint)
    for k in range(4):
        pk = 1.0
        for j in range(4):
            if j != k:
                pk *= v[j]
        g[k] = eps * d1[k] * pk
        S[k, k] = eps * d2[k] * pk
        for l in range(k + 1, 4):
            p = 1.0
            for j in range(4):
                if j != k and j != l:
                    p *= v[j]
            S[k, l] = eps * d1[k] * d1[l] * p
            S[l, k] = S[k, l]


@numba_jit
def _solve4(M, B, W, ncol):
    """Solve M X = B in place in B (first ncol columns); W is 4x4 scratch."""
    for r in range(4):
        for k in range(4):
            W[r, k] = M[r, k]
    for c in range(4):
        p = c
        for r in range(c + 1, 4):
            if abs(W[r, c]) > abs(W[p, c]):
                p = r
        if p != c:
            for k in range(4):
                W[c, k], W[p, k] = W[p, k], W[c, k]
            for k in range(ncol):
                B[c, k], B[p, k] = B[p, k], B[c, k]
        for r in range(c + 1, 4):
            f = W[r, c] / W[c, c]
            for k in range(c, 4):
                W[r, k] -= f * W[c, k]
            for k in range(ncol):
                B[r, k] -= f * B[c, k]
    for r in range(3, -1, -1):
        for k in range(ncol):
            acc = B[r, k]
            for j in range(r + 1, 4):
                acc -= W[r, j] * B[j, k]
            B[r, k] = acc / W[r, r]


@numba_jit
def kick_flow_kernel(X, t, n_steps, eps, w, cs, cd1, cd2, cint, coeffs):
    n = X.shape[0]
    Y = np.empty_like(X)
    Dout = np.empty((n, 4, 4))
    failed = 0
    v = np.empty(4)
    d1 = np.empty(4)
    d2 = np.empty(4)
    g = np.empty(4)
    S = np.empty((4, 4))
    x = np.empty(4)
    m = np.empty(4)
    F = np.empty((4, 1))
    A = np.empty((4, 4))
    IA = np.empty((4, 4))
    W = np.empty((4, 4))
    D = np.empty((4, 4))
    R = np.empty((4, 4))
    h0 = t / n_steps
    for i in range(n):
        for k in range(4):
            x[k] = X[i, k]
            for j in range(4):
                D[k, j] = 1.0 if k == j else 0.0
        for _ in range(n_steps):
            for c in range(coeffs.shape[0]):
                h = coeffs[c] * h0
                scale = 1.0
                for k in range(4):
                    scale = max(scale, 1.0 + abs(x[k]))
                _grad_hess(x, eps, w, cs, cd1, cd2, cint, v, d1, d2, g, S)
                m[0] = x[0] - 0.5 * h * g[2]
                m[1] = x[1] - 0.5 * h * g[3]
                m[2] = x[2] + 0.5 * h * g[0]
                m[3] = x[3] + 0.5 * h * g[1]
                ok = False
                err = 0.0
                for _it in range(12):
                    _grad_hess(m, eps, w, cs, cd1, cd2, cint, v, d1, d2, g, S)
                    F[0, 0] = m[0] - x[0] + 0.5 * h * g[2]
                    F[1, 0] = m[1] - x[1] + 0.5 * h * g[3]
                    F[2, 0] = m[2] - x[2] - 0.5 * h * g[0]
                    F[3, 0] = m[3] - x[3] - 0.5 * h * g[1]
                    err = 0.0
                    for k in range(4):
                        err = max(err, abs(F[k, 0]))
                    # A = (h/2) J S with J = [[0, -I], [I, 0]]
                    for k in range(4):
                        A[0, k] = -0.5 * h * S[2, k]
                        A[1, k] = -0.5 * h * S[3, k]
                        A[2, k] = 0.5 * h * S[0, k]
                        A[3, k] = 0.5 * h * S[1, k]
                        for r in range(4):
                            IA[r, k] = (1.0 if r == k else 0.0) - A[r, k]
                    if err <= 4e-16 * scale:
                        ok = True
                        break
                    _solve4(IA, F, W, 1)
                    for k in range(4):
                        m[k] -= F[k, 0]
                if not ok and err > 1e-13 * scale:
                    failed += 1
                for r in range(4):
                    for col in range(4):
                        acc = D[r, col]
                        for k in range(4):
                            acc += A[r, k] * D[k, col]
                        R[r, col] = acc
                _solve4(IA, R, W, 4)
                for r in range(4):
                    for col in range(4):
                        D[r, col] = R[r, col]
                for k in range(4):
                    x[k] = 2.0 * m[k] - x[k]
        for k in range(4):
            Y[i, k] = x[k]
            for j in range(4):
                Dout[i, k, j] = D[k, j]
    return Y, Dout, failed

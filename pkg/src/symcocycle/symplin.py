"""Symplectic linear algebra on R^{2N} with coordinates (p_1..p_N, q_1..q_N).

The standard form is omega(v, w) = <J0 v, w> with J0 = [[0, -I], [I, 0]], so
the form and the Euclidean structure are compatible with constant 1.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    ConeViolationError,
    DegeneratePairingError,
    InvalidDimensionError,
    PreconditionError,
    SingularMatrixError,
    UndefinedAngleError,
)

ALGEBRA_TOL = 1e-10


def standard_form_matrix(N):
    N = int(N)
    if N < 1:
        raise InvalidDimensionError(f"N must be >= 1, got {N}")
    J = np.zeros((2 * N, 2 * N))
    J[:N, N:] = -np.eye(N)
    J[N:, :N] = np.eye(N)
    return J


def half_dim(d):
    d = int(d)
    if d < 2 or d % 2:
        raise InvalidDimensionError(f"ambient dimension must be even and >= 2, got {d}")
    return d // 2


def omega(v, w):
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    N = half_dim(v.shape[0])
    return float(np.dot(v[:N], w[N:]) - np.dot(v[N:], w[:N]))


def omega_matrix(V, W):
    """Matrix of pairings omega(V[:, i], W[:, j])."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    N = half_dim(V.shape[0])
    return V[:N].T @ W[N:] - V[N:].T @ W[:N]


def apply_J0(V):
    V = np.asarray(V, dtype=float)
    N = half_dim(V.shape[0])
    return np.concatenate([-V[N:], V[:N]], axis=0)


def symplectic_defect(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidDimensionError("matrix must be square")
    J = standard_form_matrix(half_dim(A.shape[0]))
    return float(np.max(np.abs(A.T @ J @ A - J)))


def is_symplectic(A, tol=ALGEBRA_TOL):
    return symplectic_defect(A) <= tol


def symplectic_inverse(A):
    """A^{-1} = -J0 A^T J0, exact for symplectic A."""
    A = np.asarray(A, dtype=float)
    J = standard_form_matrix(half_dim(A.shape[0]))
    return -J @ A.T @ J


def random_symplectic(N, rng, scale=0.5):
    """expm(J0 S) with S symmetric of entry size ~scale."""
    from scipy.linalg import expm

    S = rng.normal(size=(2 * N, 2 * N)) * scale
    S = 0.5 * (S + S.T)
    return expm(standard_form_matrix(N) @ S)


@dataclass(frozen=True)
class OperatorStats:
    norm: float
    conorm: float
    wedge_p_norm: float


def operator_stats(A, p):
    A = np.asarray(A, dtype=float)
    N = half_dim(A.shape[0])
    if not 1 <= p <= N:
        raise InvalidDimensionError(f"p must lie in [1, {N}], got {p}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= s[0] * 1e-15 or s[-1] == 0.0:
        raise SingularMatrixError("matrix is numerically singular")
    return OperatorStats(float(s[0]), float(s[-1]), float(np.prod(s[:p])))


# ---------------------------------------------------------------- subspaces


def orthonormalize(B, rank_tol=1e-12):
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if B.shape[1] == 0:
        return B.copy()
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    k = int(np.sum(s > rank_tol * max(s[0], 1e-300)))
    if k < B.shape[1]:
        return U[:, :k]
    Q, R = np.linalg.qr(B)
    # keep the orientation of the input columns
    sgn = np.sign(np.diag(R))
    sgn[sgn == 0] = 1.0
    return Q * sgn


class Subspace:
    """Linear subspace stored as an orthonormal column basis."""

    __slots__ = ("basis",)

    def __init__(self, basis, orthonormal=False):
        B = np.asarray(basis, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        half_dim(B.shape[0])
        self.basis = B.copy() if orthonormal else orthonormalize(B)

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def ambient(self):
        return self.basis.shape[0]

    def projector(self):
        return self.basis @ self.basis.T

    def __repr__(self):
        return f"Subspace(ambient={self.ambient}, dim={self.dim})"


def as_subspace(E):
    return E if isinstance(E, Subspace) else Subspace(E)


def coordinate_subspace(N, labels):
    """span of coordinate axes given as names like 'p1', 'q2'."""
    d = 2 * N
    cols = []
    for lab in labels:
        kind, idx = lab[0], int(lab[1:]) - 1
        e = np.zeros(d)
        e[idx if kind == "p" else N + idx] = 1.0
        cols.append(e)
    return Subspace(np.array(cols).T, orthonormal=True)


def orth_complement(E):
    E = as_subspace(E)
    U, _, _ = np.linalg.svd(E.basis, full_matrices=True)
    return Subspace(U[:, E.dim:], orthonormal=True)


def direct_sum(*spaces):
    return Subspace(np.hstack([as_subspace(S).basis for S in spaces]))


def subspace_angle(E, F):
    E, F = as_subspace(E), as_subspace(F)
    if E.ambient != F.ambient:
        raise InvalidDimensionError("subspaces live in different ambient spaces")
    if E.dim == 0 or F.dim == 0:
        raise InvalidDimensionError("angle needs non-trivial subspaces")
    cos_max = np.linalg.svd(E.basis.T @ F.basis, compute_uv=False)[0]
    if cos_max * cos_max <= 0.5:
        return float(np.arccos(min(cos_max, 1.0)))
    resid = F.basis - E.basis @ (E.basis.T @ F.basis)
    sin_min = np.linalg.svd(resid, compute_uv=False)[-1]
    return float(np.arcsin(min(sin_min, 1.0)))


def span_distance(E, F):
    """sin of the largest principal angle; 0 iff the spans agree."""
    E, F = as_subspace(E), as_subspace(F)
    if E.dim != F.dim:
        raise InvalidDimensionError("span distance needs equal dimensions")
    if E.dim == 0:
        return 0.0
    resid = E.basis - F.basis @ (F.basis.T @ E.basis)
    return float(np.linalg.norm(resid, 2))


def symplectic_complement(E):
    E = as_subspace(E)
    if not 1 <= E.dim <= E.ambient - 1:
        raise InvalidDimensionError("complement needs 1 <= dim E <= 2N - 1")
    return orth_complement(Subspace(apply_J0(E.basis)))


def push_forward(A, E):
    return Subspace(np.asarray(A) @ as_subspace(E).basis)


def restricted_norms(P, E):
    """(norm, conorm) of P restricted to E."""
    s = np.linalg.svd(np.asarray(P) @ as_subspace(E).basis, compute_uv=False)
    return float(s[0]), float(s[-1])


# ------------------------------------------------------ orthosymplectic bases


@dataclass
class SymplecticBasis:
    basis: np.ndarray  # columns e_1..e_N, f_1..f_N
    chart: np.ndarray  # maps e_i -> dp_i, f_i -> dq_i
    norm_bound: float
    realized_norm: float


def _canonical_candidates(d):
    return np.eye(d)


def orthosymplectic_residual(E_vecs, F_vecs):
    E_vecs = np.atleast_2d(E_vecs)
    F_vecs = np.atleast_2d(F_vecs)
    nu = E_vecs.shape[1]
    r1 = np.abs(omega_matrix(E_vecs, E_vecs)).max() if nu else 0.0
    r2 = np.abs(omega_matrix(F_vecs, F_vecs)).max() if nu else 0.0
    r3 = np.abs(omega_matrix(E_vecs, F_vecs) - np.eye(nu)).max() if nu else 0.0
    return float(max(r1, r2, r3))


def extension_norm_bound(N, nu, K1):
    """Bound on the norms of every basis vector and of the chart.

    Each new pair is v - P(v) with ||P|| <= 2 nu K^2, so vector norms grow to
    at most 1 + 2 nu K^2; the chart and its inverse are then bounded by
    sqrt(2N) times the largest vector norm.
    """
    K = max(float(K1), 1.0)
    for j in range(nu, N):
        K = max(K, 1.0 + 2.0 * j * K * K)
    return float(np.sqrt(2 * N) * K)


def chart_from_basis(basis):
    """Inverse of [e | f] via the form: p_i = omega(v, f_i), q_i = -omega(v, e_i)."""
    basis = np.asarray(basis, dtype=float)
    d = basis.shape[0]
    N = half_dim(d)
    J = standard_form_matrix(N)
    E_vecs, F_vecs = basis[:, :N], basis[:, N:]
    # omega(v, f) = <J v, f> = f^T J v
    return np.vstack([F_vecs.T @ J, -(E_vecs.T @ J)])


def orthosymplectic_extend(partial, K1=None, tol=ALGEBRA_TOL):
    """Complete an orthosymplectic family (e_1..e_nu, f_1..f_nu) to a basis.

    `partial` is a 2N x 2nu array with the e's first.  New vectors come from
    the projection of canonical axes onto the orthogonal complement of the
    current span (preferring the earliest axis among the largest projections),
    corrected by P(v) = sum omega(v, f_i) e_i - omega(v, e_i) f_i and paired
    through J0.
    """
    P_in = np.asarray(partial, dtype=float)
    if P_in.ndim == 1:
        raise InvalidDimensionError("partial basis must be a 2-D array")
    d, two_nu = P_in.shape
    N = half_dim(d)
    if two_nu % 2:
        raise InvalidDimensionError("partial family must have an even number of vectors")
    nu = two_nu // 2
    if nu > N:
        raise InvalidDimensionError(f"nu = {nu} exceeds N = {N}")
    E_vecs = [P_in[:, i].copy() for i in range(nu)]
    F_vecs = [P_in[:, nu + i].copy() for i in range(nu)]
    norms = np.linalg.norm(P_in, axis=0) if nu else np.zeros(0)
    K_in = float(norms.max()) if nu else 1.0
    if K1 is None:
        K1 = K_in
    if nu and K_in > K1 * (1 + 1e-12):
        raise PreconditionError(f"input norm {K_in} exceeds K1 = {K1}")
    scale = max(1.0, K1 * K1)
    if nu:
        res = orthosymplectic_residual(np.array(E_vecs).T, np.array(F_vecs).T)
        if res > tol * scale:
            raise PreconditionError(f"input family is not orthosymplectic (residual {res:.3e})")
    J = standard_form_matrix(N)
    cands = _canonical_candidates(d)
    for _ in range(nu, N):
        if E_vecs:
            Y = orthonormalize(np.array(E_vecs + F_vecs).T)
            proj = cands - Y @ (Y.T @ cands)
        else:
            proj = cands.copy()
        lens = np.linalg.norm(proj, axis=0)
        best = lens.max()
        k = int(np.flatnonzero(lens >= best * (1 - 1e-9))[0])
        e_hat = proj[:, k] / lens[k]

        def P(v):
            out = np.zeros(d)
            for e_i, f_i in zip(E_vecs, F_vecs):
                out += omega(v, f_i) * e_i - omega(v, e_i) * f_i
            return out

        e_new = e_hat - P(e_hat)
        Je = J @ e_new
        f_hat = Je / np.dot(Je, Je)
        f_new = f_hat - P(f_hat)
        E_vecs.append(e_new)
        F_vecs.append(f_new)
    basis = np.array(E_vecs + F_vecs).T
    chart = chart_from_basis(basis)
    bound = extension_norm_bound(N, nu, K1)
    realized = max(np.linalg.norm(chart, 2), np.linalg.norm(basis, 2))
    return SymplecticBasis(basis, chart, bound, float(realized))


# -------------------------------------------------------------- dual vectors


@dataclass
class DualPair:
    v_star: np.ndarray
    pairing: float  # |omega(v, v_star)|
    omega_value: float  # signed omega(v, v_star)
    lower_bound: float  # 1 / B_1(beta) with beta the angle between E^omega and F
    beta: float


def dual_pairing_constant(beta):
    """B_1(beta) = 1/sin(beta): the projection onto F along E^omega has norm
    at most 1/sin(beta), J0 is an isometry, and omega(v, p J0 v) = |v|^2."""
    return 1.0 / np.sin(beta)


def dual_vector(v, E, F, angle_tol=1e-8):
    """v* = normalize(p(J0 v)) with p the projection onto F along E^omega.

    When dim F > dim E the projection is not unique; the element of F of
    least norm satisfying the same pairing conditions is used.
    """
    v = np.asarray(v, dtype=float)
    E, F = as_subspace(E), as_subspace(F)
    if F.dim < E.dim:
        raise InvalidDimensionError("dual_vector needs dim F >= dim E")
    if np.linalg.norm(v - E.basis @ (E.basis.T @ v)) > 1e-8 * max(1.0, np.linalg.norm(v)):
        raise PreconditionError("v does not lie in E")
    # w in F with omega(e, J0 v - w) = 0 for every e in E
    Om = omega_matrix(E.basis, F.basis)
    s_min = np.linalg.svd(Om, compute_uv=False)[-1]
    if F.dim == E.dim:
        beta = subspace_angle(symplectic_complement(E), F) if E.dim < E.ambient else np.pi / 2
    else:
        beta = float(np.arcsin(min(s_min, 1.0)))
    if beta < angle_tol or s_min < angle_tol:
        raise DegeneratePairingError(f"E^omega meets F (angle {beta:.3e})")
    lower = float(1.0 / dual_pairing_constant(beta)) if F.dim == E.dim else float(s_min)
    rhs = omega_matrix(E.basis, apply_J0(v)[:, None])[:, 0]
    coef = np.linalg.lstsq(Om, rhs, rcond=None)[0]
    w = F.basis @ coef
    nw = np.linalg.norm(w)
    if nw == 0.0:
        raise DegeneratePairingError("projection of J0 v onto F vanishes")
    v_star = w / nw
    om = omega(v, v_star)
    return DualPair(v_star, abs(om), om, lower, beta)


# ---------------------------------------------- 4-dimensional rotation/shear


def rotation_Rt(t):
    c, s = np.cos(t), np.sin(t)
    R = np.zeros((4, 4))
    R[0, 0] = R[1, 1] = R[2, 2] = R[3, 3] = c
    R[0, 1] = R[2, 3] = -s
    R[1, 0] = R[3, 2] = s
    return R


def wrap_pi(t):
    """Representative in [0, pi)."""
    r = np.mod(t, np.pi)
    return np.where(r >= np.pi, 0.0, r) if np.ndim(r) else (0.0 if r >= np.pi else float(r))


def direction_angle(v, rel_tol=1e-14):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 4:
        raise InvalidDimensionError("direction_angle is defined on R^4")
    r = np.hypot(v[0], v[1])
    if r <= rel_tol * max(np.linalg.norm(v), 1e-300):
        raise UndefinedAngleError("p-projection vanishes")
    return wrap_pi(np.arctan2(v[1], v[0]))


def direction_angles(V):
    """Vectorised Theta for an (n, 4) array; rows must have non-zero p-part."""
    V = np.asarray(V, dtype=float)
    return np.mod(np.arctan2(V[:, 1], V[:, 0]), np.pi)


def circle_distance(s, t):
    d = np.mod(np.asarray(s, dtype=float) - np.asarray(t, dtype=float), np.pi)
    out = np.minimum(d, np.pi - d)
    return float(out) if np.ndim(out) == 0 else out


def in_cone(v, beta=1.0):
    v = np.asarray(v, dtype=float)
    return bool(np.hypot(v[2], v[3]) < beta * np.hypot(v[0], v[1]))


def shear_parts(v):
    """(theta, a, b) with R_{-theta} v = (1, 0, a, b) after p-normalisation."""
    v = np.asarray(v, dtype=float)
    if v.shape != (4,):
        raise InvalidDimensionError("shear_map_Lv is defined on R^4")
    if not in_cone(v):
        raise ConeViolationError("v is outside the cone ||q|| < ||p||")
    v = v / np.hypot(v[0], v[1])
    theta = direction_angle(v)
    w = rotation_Rt(-theta) @ v
    if w[0] < 0:
        w = -w
    return theta, w[2], w[3]


def shear_matrix(a, b):
    M = np.eye(4)
    M[2, 0] = a
    M[2, 1] = b
    M[3, 0] = b
    return M


def shear_map_Lv(v):
    theta, a, b = shear_parts(v)
    return rotation_Rt(theta) @ shear_matrix(a, b)


def shear_map_Lv_inverse(v):
    theta, a, b = shear_parts(v)
    return shear_matrix(-a, -b) @ rotation_Rt(-theta)


@lru_cache(maxsize=8)
def shear_norm_bound(n_radial=200, n_angular=720):
    """Measured sup of ||L_v|| over the closed cone; equals sup ||M(a, b)||
    over the unit disk because the rotation factor is orthogonal."""
    r, phi = np.meshgrid(np.linspace(0.0, 1.0, n_radial),
                         np.linspace(0.0, 2 * np.pi, n_angular, endpoint=False))
    a, b = (r * np.cos(phi)).ravel(), (r * np.sin(phi)).ravel()
    M = np.broadcast_to(np.eye(4), (a.size, 4, 4)).copy()
    M[:, 2, 0] = a
    M[:, 2, 1] = b
    M[:, 3, 0] = b
    return float(np.linalg.svd(M, compute_uv=False)[:, 0].max())

"""Hamiltonian perturbations: bump profiles, the rotation and kick
Hamiltonians, time-t flows with their tangent maps, coordinate changes and
the cylinder construction that lifts low-dimensional Hamiltonians.
"""
from dataclasses import dataclass, field

import numpy as np

from ._jit import jit_enabled
from .errors import IntegrationError, MemoryGuardError, ParameterError, PreconditionError
from .symplin import (
    direction_angles,
    is_symplectic,
    standard_form_matrix,
    symplectic_inverse,
)

# quintic smoothstep and its derivatives on [0, 1]
S5_D1_MAX = 1.875
S5_D2_MAX = 10.0 / np.sqrt(3.0)  # |60u - 180u^2 + 120u^3| peaks at u = (3 -+ sqrt 3)/6


def _s5(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _s5_d1(u):
    inside = (u > 0) & (u < 1)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


def _s5_d2(u):
    inside = (u > 0) & (u < 1)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u), 0.0)


def _s5_int(u):
    """int_0^u s5, continued linearly past u = 1."""
    u = np.asarray(u, dtype=float)
    c = np.clip(u, 0.0, 1.0)
    base = c ** 4 * (2.5 + c * (-3.0 + c))
    return base + np.maximum(u - 1.0, 0.0)


# ------------------------------------------------------------------ profiles


@dataclass
class BumpProfile:
    kind: str
    sigma: float
    d1_sup: float
    d2_sup: float
    plateau: float

    def value(self, t):
        t = np.asarray(t, dtype=float)
        s, w = self.sigma, 1.0 - self.sigma
        u = (t - s) / w
        if self.kind == "zeta":
            return 1.0 - _s5(u)
        # rho(t) = t up to sigma, then rho' = 1 - s5 until it reaches zero
        return np.where(t <= s, t, s + w * (np.clip(u, 0, None) - _s5_int(u)))

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        w = 1.0 - self.sigma
        u = (t - self.sigma) / w
        if self.kind == "zeta":
            return -_s5_d1(u) / w
        return 1.0 - _s5(u)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        w = 1.0 - self.sigma
        u = (t - self.sigma) / w
        if self.kind == "zeta":
            return -_s5_d2(u) / (w * w)
        return -_s5_d1(u) / w

    def __call__(self, t):
        return self.value(t)


def make_bump(kind, sigma, n_check=20001):
    """C^2 bump profiles built from the quintic smoothstep.

    rho is the identity on [0, sigma] with 0 <= rho' <= 1 and |rho''| bounded
    by 10/(1-sigma); it becomes constant for t >= 1 at the value (1+sigma)/2.
    """
    if not 0.0 < sigma < 1.0:
        raise ParameterError("sigma must lie in (0, 1)")
    if kind not in ("zeta", "rho"):
        raise ParameterError(f"unknown bump kind {kind!r}")
    w = 1.0 - sigma
    if kind == "zeta":
        prof = BumpProfile(kind, float(sigma), S5_D1_MAX / w, S5_D2_MAX / w ** 2, 0.0)
    else:
        prof = BumpProfile(kind, float(sigma), 1.0, S5_D1_MAX / w, sigma + 0.5 * w)
    t = np.linspace(-0.5, 1.5, n_check)
    v, d1, d2 = prof.value(t), prof.d1(t), prof.d2(t)
    lo, hi = t <= sigma, t >= 1.0
    if kind == "zeta":
        ok = (np.all(v[lo] == 1.0) and np.all(v[hi] == 0.0)
              and np.abs(d1).max() <= 10 / w and np.abs(d2).max() <= 10 / w ** 2)
    else:
        ok = (np.allclose(v[lo & (t >= 0)], t[lo & (t >= 0)], atol=0, rtol=1e-15)
              and np.allclose(v[hi], prof.plateau, rtol=1e-14, atol=1e-14)
              and d1.min() >= 0 and d1.max() <= 1 and np.abs(d2).max() <= 10 / w)
    if not ok:
        raise ParameterError(f"{kind} profile failed its derivative bounds at sigma={sigma}")
    return prof


# -------------------------------------------------------------- Hamiltonians


@dataclass
class Hamiltonian:
    """Batched evaluators on (n, dim) arrays plus certified bounds.

    The support is {x : |chart @ x| <= radius} in the Euclidean (ball) or
    max (cube) norm; outside it H equals `outside_value`.
    """
    dim: int
    value: callable
    grad: callable
    hess: callable
    hessian_bound: float
    grad_bound: float
    value_bound: float  # sup |H - outside_value|
    support_kind: str = "ball"
    support_radius: float = 1.0
    support_chart: np.ndarray = None
    outside_value: float = 0.0
    name: str = ""
    params: dict = field(default_factory=dict)
    fast: tuple = None  # arguments for the compiled kick kernel, if any

    def __post_init__(self):
        if self.support_chart is None:
            self.support_chart = np.eye(self.dim)

    def __call__(self, X):
        return self.value(np.atleast_2d(X))

    def support_norm(self, X):
        Y = np.atleast_2d(X) @ self.support_chart.T
        if self.support_kind == "cube":
            return np.abs(Y).max(axis=1)
        return np.linalg.norm(Y, axis=1)

    def sample_support(self, n, rng):
        d = self.dim
        if self.support_kind == "cube":
            Y = rng.uniform(-1.0, 1.0, size=(n, d))
        else:
            Z = rng.normal(size=(n, d))
            Z /= np.linalg.norm(Z, axis=1, keepdims=True)
            Y = Z * rng.uniform(size=(n, 1)) ** (1.0 / d)
        Y *= self.support_radius
        return np.linalg.solve(self.support_chart, Y.T).T


def zero_hamiltonian(dim):
    return Hamiltonian(
        dim,
        lambda X: np.zeros(np.atleast_2d(X).shape[0]),
        lambda X: np.zeros_like(np.atleast_2d(X), dtype=float),
        lambda X: np.zeros((np.atleast_2d(X).shape[0], dim, dim)),
        0.0, 0.0, 0.0, name="zero",
    )


def make_rot_hamiltonian(alpha, sigma=0.9):
    """H(p, q) = (alpha/2) rho(p^2 + q^2) on the plane; inside the disk of
    radius sqrt(sigma) its time-t map is the rotation by t*alpha."""
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    rho = make_bump("rho", sigma)

    def value(X):
        X = np.atleast_2d(X)
        return 0.5 * alpha * rho.value(np.sum(X * X, axis=1))

    def grad(X):
        X = np.atleast_2d(X)
        return alpha * rho.d1(np.sum(X * X, axis=1))[:, None] * X

    def hess(X):
        X = np.atleast_2d(X)
        r2 = np.sum(X * X, axis=1)
        out = alpha * rho.d1(r2)[:, None, None] * np.eye(2)
        return out + 2.0 * alpha * rho.d2(r2)[:, None, None] * X[:, :, None] * X[:, None, :]

    return Hamiltonian(
        2, value, grad, hess,
        hessian_bound=alpha * (1.0 + 2.0 * rho.d2_sup),
        grad_bound=float(alpha),
        value_bound=0.5 * alpha * rho.plateau,
        support_kind="ball", support_radius=1.0,
        outside_value=0.5 * alpha * rho.plateau,
        name="rotation", params={"alpha": float(alpha), "sigma": float(sigma)},
    )


class Smoothstep:
    """Polynomial step of order k: s' is proportional to u^k (1-u)^k, so s is
    C^k across 0 and 1.  Provides s, s', s'' and the running integral."""

    def __init__(self, k):
        from numpy.polynomial import Polynomial

        base = Polynomial([0, 1]) ** k * Polynomial([1, -1]) ** k
        s = base.integ()
        c = 1.0 / s(1.0)
        self.k = k
        self.s = s * c
        self.d1 = base * c
        self.d2 = self.d1.deriv()
        self.integral = self.s.integ()
        self.integral_one = float(self.integral(1.0))
        u = np.linspace(0, 1, 4001)
        self.d1_max = float(np.abs(self.d1(u)).max())
        self.d2_max = float(np.abs(self.d2(u)).max())

    def value(self, u):
        u = np.clip(u, 0.0, 1.0)
        return self.s(u)

    def der(self, u):
        inside = (u > 0) & (u < 1)
        return np.where(inside, self.d1(np.clip(u, 0.0, 1.0)), 0.0)

    def der2(self, u):
        inside = (u > 0) & (u < 1)
        return np.where(inside, self.d2(np.clip(u, 0.0, 1.0)), 0.0)

    def cumulative(self, u):
        u = np.asarray(u, dtype=float)
        return self.integral(np.clip(u, 0.0, 1.0)) + np.maximum(u - 1.0, 0.0)


KICK_SMOOTHNESS = 4


def _tent(ei, eo, st):
    """Even profile on [-1, 1] whose derivative is -sign(t) on most of the
    interval, smoothed over width ei at 0 and eo at +-1; zero outside."""

    def k(r):
        return st.value(r / ei) * (1.0 - st.value((r - 1.0 + eo) / eo))

    def dk(r):
        return (st.der(r / ei) / ei * (1.0 - st.value((r - 1.0 + eo) / eo))
                - st.value(r / ei) * st.der((r - 1.0 + eo) / eo) / eo)

    def cum(r):
        return ei * st.cumulative(r / ei) - eo * st.cumulative((r - 1.0 + eo) / eo)

    total = float(cum(1.0))

    def f(t):
        r = np.minimum(np.abs(t), 1.0)
        return total - cum(r)

    def d1(t):
        return np.where(np.abs(t) < 1, -np.sign(t) * k(np.abs(t)), 0.0)

    def d2(t):
        return np.where(np.abs(t) < 1, -dk(np.abs(t)), 0.0)

    return f, d1, d2


def _plateau(e, st):
    """Even profile equal to 1 on |t| <= 1-e, falling to 0 at |t| = 1."""

    def f(t):
        return 1.0 - st.value((np.abs(t) - 1.0 + e) / e)

    def d1(t):
        return -np.sign(t) * st.der((np.abs(t) - 1.0 + e) / e) / e

    def d2(t):
        return -st.der2((np.abs(t) - 1.0 + e) / e) / (e * e)

    return f, d1, d2


def product_hamiltonian(factors, scale):
    """H(x) = scale * prod_k f_k(x_k) with analytic gradient and Hessian."""
    d = len(factors)

    def parts(X):
        X = np.atleast_2d(X)
        V = np.stack([f[0](X[:, k]) for k, f in enumerate(factors)], axis=1)
        D1 = np.stack([f[1](X[:, k]) for k, f in enumerate(factors)], axis=1)
        D2 = np.stack([f[2](X[:, k]) for k, f in enumerate(factors)], axis=1)
        return V, D1, D2

    def others(V, skip):
        keep = [j for j in range(d) if j not in skip]
        return np.prod(V[:, keep], axis=1) if keep else np.ones(V.shape[0])

    def value(X):
        V, _, _ = parts(X)
        return scale * np.prod(V, axis=1)

    def grad(X):
        V, D1, _ = parts(X)
        return scale * np.stack([D1[:, k] * others(V, (k,)) for k in range(d)], axis=1)

    def hess(X):
        V, D1, D2 = parts(X)
        out = np.empty((V.shape[0], d, d))
        for k in range(d):
            out[:, k, k] = D2[:, k] * others(V, (k,))
            for j in range(k + 1, d):
                out[:, k, j] = out[:, j, k] = D1[:, k] * D1[:, j] * others(V, (k, j))
        return scale * out

    return value, grad, hess


# smoothing widths: tent at 0, tent at +-1, plateau in p2, plateau in q1.
# A narrow inner tent width couples with the plateau edges at second order
# and gives the angle law a long thin tail.
KICK_WIDTHS = (0.25, 0.12, 0.3, 0.3)
KICK_DEFAULT_DELTA = 8.0
KICK_SUPPORT_MARGIN = 0.85


def _product_bounds(factors, n=20001):
    """Bounds for H = prod_k f_k(x_k) on the cube from per-axis suprema.

    Returns (sup |f_k|, sup |f_k'|, sup |f_k''|) per axis together with the
    gradient bound and the Frobenius bound on the Hessian (which dominates
    the operator norm).
    """
    t = np.linspace(-1.0, 1.0, n)
    sup = np.array([[np.abs(f[j](t)).max() for j in range(3)] for f in factors])
    v, a, b = sup[:, 0], sup[:, 1], sup[:, 2]
    d = len(factors)

    def rest(*skip):
        return np.prod([v[j] for j in range(d) if j not in skip])

    grad = np.sqrt(sum((a[k] * rest(k)) ** 2 for k in range(d)))
    fro2 = sum((b[k] * rest(k)) ** 2 for k in range(d))
    fro2 += 2 * sum((a[k] * a[l] * rest(k, l)) ** 2 for k in range(d) for l in range(k + 1, d))
    return sup, float(grad), float(np.sqrt(fro2))


def make_kick_hamiltonian(delta=KICK_DEFAULT_DELTA, alpha=1.5, seed=0, n_check=2000):
    """Kick on the cube [-1, 1]^4 (p1, p2, q1, q2).

    H = eps * tent(p1) plateau(p2) plateau(q1) tent(q2): the mixed derivative
    d^2H/dp1 dq2 is close to +-eps on most of the cube, so the direction of
    Dh . dp1 moves by roughly +-eps with a two-sided, high-variance law.  eps
    is the largest value with bounded sup|D^2 H| < delta, reduced if needed
    so that the sampled angle law sits inside 0.85 * alpha/20.  The seed
    jitters the smoothing widths.
    """
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    rng = np.random.default_rng(seed)
    w = np.array(KICK_WIDTHS)
    if seed:
        w = w * (1.0 + 0.1 * (rng.uniform(size=4) - 0.5))
    st = Smoothstep(KICK_SMOOTHNESS)
    tent = _tent(w[0], w[1], st)
    factors = [tent, _plateau(w[2], st), _plateau(w[3], st), tent]
    sup, grad_unit, hess_unit = _product_bounds(factors)
    val_unit = float(np.prod(sup[:, 0]))
    coefs = tuple(np.ascontiguousarray(P.coef, dtype=float)
                  for P in (st.s, st.d1, st.d2, st.integral))

    def build(eps):
        v, g, h = product_hamiltonian(factors, eps)
        return Hamiltonian(
            4, v, g, h, hess_unit * eps, grad_unit * eps, val_unit * eps,
            support_kind="cube", support_radius=1.0, outside_value=0.0, name="kick",
            params={"eps": float(eps), "delta": float(delta), "alpha": float(alpha),
                    "widths": [float(x) for x in w]},
            fast=(float(eps), w) + coefs,
        )

    target = KICK_SUPPORT_MARGIN * alpha / 20.0
    pts = rng.uniform(-1, 1, size=(n_check, 4))
    eps = 0.999 * delta / hess_unit
    for _ in range(8):
        H = build(eps)
        radius = float(np.abs(kick_angles(H, pts, tol=1e-5)).max())
        if radius <= target:
            H.params["sampled_radius"] = radius
            return H
        # the angle is nearly linear in eps at these sizes
        eps *= 0.995 * target / radius
    raise ParameterError("kick cannot meet the support constraint")


# --------------------------------------------------------------------- flows


@dataclass
class FlowResult:
    endpoint: np.ndarray
    tangent: np.ndarray
    steps: int
    symp_defect: float


_YOSHIDA = (1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
            -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0)),
            1.0 / (2.0 - 2.0 ** (1.0 / 3.0)))


def _J_apply(G, N):
    return np.concatenate([-G[:, N:], G[:, :N]], axis=1)


def _midpoint(H, X, D, h, J, N):
    """One implicit midpoint step for the state and its tangent, with the
    midpoint found by Newton iteration."""
    eye = np.eye(2 * N)
    m = X + 0.5 * h * _J_apply(H.grad(X), N)
    scale = 1.0 + (np.max(np.abs(X)) if X.size else 0.0)
    for _ in range(12):
        S = H.hess(m)
        A = 0.5 * h * np.matmul(J, S)
        F = m - X - 0.5 * h * _J_apply(H.grad(m), N)
        err = np.max(np.abs(F)) if F.size else 0.0
        if err <= 4e-16 * scale:
            break
        m = m - np.linalg.solve(eye - A, F[:, :, None])[:, :, 0]
    else:
        if err > 1e-13 * scale:
            raise IntegrationError("implicit midpoint iteration did not converge")
    D_new = np.linalg.solve(eye - A, np.matmul(eye + A, D))
    return 2.0 * m - X, D_new


def _rk4(H, X, D, h, J, N):
    def f(x, d):
        return _J_apply(H.grad(x), N), np.matmul(np.matmul(J, H.hess(x)), d)

    k1 = f(X, D)
    k2 = f(X + 0.5 * h * k1[0], D + 0.5 * h * k1[1])
    k3 = f(X + 0.5 * h * k2[0], D + 0.5 * h * k2[1])
    k4 = f(X + h * k3[0], D + h * k3[1])
    return (X + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            D + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def _integrate(H, t, X, n, method):
    if method == "midpoint" and H.fast is not None and jit_enabled():
        from ._kickjit import YOSHIDA, kick_flow_kernel

        Y, D, failed = kick_flow_kernel(np.ascontiguousarray(X), float(t), int(n), *H.fast, YOSHIDA)
        if failed:
            raise IntegrationError("implicit midpoint iteration did not converge")
        return Y, D
    N = H.dim // 2
    J = standard_form_matrix(N)
    D = np.broadcast_to(np.eye(H.dim), (X.shape[0], H.dim, H.dim)).copy()
    h = t / n
    for _ in range(n):
        if method == "rk4":
            X, D = _rk4(H, X, D, h, J, N)
        else:
            for g in _YOSHIDA:
                X, D = _midpoint(H, X, D, g * h, J, N)
    return X, D


def _converge(H, t, X0, tol, method, n, n_max):
    """Double n until two successive resolutions agree to tol."""
    while True:
        try:
            Xa, Da = _integrate(H, t, X0, n, method)
            break
        except IntegrationError:
            n *= 2
            if n > n_max:
                raise
    while True:
        n *= 2
        if n > n_max:
            raise IntegrationError(f"step count exceeded {n_max} before reaching tol={tol}")
        Xb, Db = _integrate(H, t, X0, n, method)
        diff = max(np.max(np.abs(Xb - Xa)), np.max(np.abs(Db - Da)))
        Xa, Da = Xb, Db
        if diff <= tol:
            return Xa, Da, n


def flow_batch(H, t, X, tol=1e-10, method="midpoint", n0=4, n_max=1 << 14, check_bounds=True,
               pilot=512):
    """Time-t map and tangent for every row of X.

    The default scheme is implicit midpoint composed into a symmetric
    fourth-order method (still symplectic); the step count doubles until two
    successive resolutions agree to tol.  Large batches first find the step
    count on an evenly spread pilot subset and then confirm it on every row.
    """
    X0 = np.array(np.atleast_2d(X), dtype=float)
    if X0.shape[1] != H.dim:
        raise ParameterError("point dimension does not match the Hamiltonian")
    if t == 0 or H.hessian_bound == 0 and H.grad_bound == 0:
        D = np.broadcast_to(np.eye(H.dim), (X0.shape[0], H.dim, H.dim)).copy()
        return X0.copy(), D, 0
    n = n0
    if pilot and X0.shape[0] > 2 * pilot:
        idx = np.linspace(0, X0.shape[0] - 1, pilot).astype(int)
        _, _, n = _converge(H, t, X0[idx], tol, method, n0, n_max)
        n //= 2
    Xa, Da, n = _converge(H, t, X0, tol, method, n, n_max)
    if check_bounds:
        slack = 10.0 * tol
        disp = np.linalg.norm(Xa - X0, axis=1).max()
        if disp > abs(t) * H.grad_bound + slack:
            raise IntegrationError(f"displacement {disp:.3e} exceeds |t| sup|DH|")
        dev = np.linalg.norm(Da - np.eye(H.dim), 2, axis=(1, 2)).max()
        if dev > np.expm1(abs(t) * H.hessian_bound) + slack:
            raise IntegrationError(f"tangent deviation {dev:.3e} exceeds exp(|t| sup|D^2H|) - 1")
    return Xa, Da, n


def tangent_symplectic_defect(D):
    D = np.atleast_3d(D) if np.ndim(D) == 2 else D
    if D.ndim == 2:
        D = D[None]
    J = standard_form_matrix(D.shape[1] // 2)
    R = np.matmul(np.transpose(D, (0, 2, 1)), np.matmul(J, D)) - J
    return float(np.abs(R).max())


def flow(H, t, x, tol=1e-10, method="midpoint"):
    X, D, n = flow_batch(H, t, np.asarray(x, dtype=float)[None], tol, method)
    return FlowResult(X[0], D[0], n, tangent_symplectic_defect(D))


# ---------------------------------------------------------- coordinate change


def transform_hamiltonian(H, mode, a=None, M=None):
    """rescale: H1(x) = a^-2 H(a x); conjugate: H2(x) = H(M x)."""
    if mode == "rescale":
        if a is None or a <= 0:
            raise ParameterError("rescale needs a > 0")
        a = float(a)
        return Hamiltonian(
            H.dim,
            lambda X: H.value(a * np.atleast_2d(X)) / a ** 2,
            lambda X: H.grad(a * np.atleast_2d(X)) / a,
            lambda X: H.hess(a * np.atleast_2d(X)),
            H.hessian_bound, H.grad_bound / a, H.value_bound / a ** 2,
            H.support_kind, H.support_radius, H.support_chart * a, H.outside_value / a ** 2,
            name=f"{H.name}|rescale", params=dict(H.params),
        )
    if mode == "conjugate":
        M = np.asarray(M, dtype=float)
        if M.shape != (H.dim, H.dim) or not is_symplectic(M, tol=1e-9):
            raise PreconditionError("conjugating matrix must be symplectic of matching size")
        nM = float(np.linalg.norm(M, 2))
        return Hamiltonian(
            H.dim,
            lambda X: H.value(np.atleast_2d(X) @ M.T),
            lambda X: H.grad(np.atleast_2d(X) @ M.T) @ M,
            lambda X: np.matmul(M.T, np.matmul(H.hess(np.atleast_2d(X) @ M.T), M)),
            H.hessian_bound * nM ** 2, H.grad_bound * nM, H.value_bound,
            H.support_kind, H.support_radius, H.support_chart @ M, H.outside_value,
            name=f"{H.name}|conjugate", params=dict(H.params),
        )
    raise ParameterError(f"unknown mode {mode!r}")


# -------------------------------------------------------- dimension reduction


@dataclass
class DimReduction:
    a: float
    sigma: float
    nu: int
    N: int
    H_hats: list
    Cinv: list  # C_0^-1 ... C_{i-1}^-1 for every i
    delta: float
    sampled_hessian: float
    G_hat: dict
    volume_ratio: float


def _split_blocks(A, nu, N, tol=1e-10):
    ix = np.r_[0:nu, N:N + nu]
    iy = np.r_[nu:N, N + nu:2 * N]
    off = max(np.abs(A[np.ix_(ix, iy)]).max(initial=0), np.abs(A[np.ix_(iy, ix)]).max(initial=0))
    if off > tol * max(1.0, np.abs(A).max()):
        raise PreconditionError(f"map does not preserve the 2nu-plane (off-block {off:.2e})")
    return A[np.ix_(ix, ix)], A[np.ix_(iy, iy)], ix, iy


def _lift(Hx, zeta, L, a, ix, iy, dim):
    c0 = Hx.outside_value
    n_x, n_y = len(ix), len(iy)

    def split(Z):
        Z = np.atleast_2d(Z)
        return Z[:, ix], Z[:, iy]

    def radial(Y):
        LY = Y @ L.T
        r = np.linalg.norm(LY, axis=1)
        return LY, r

    def value(Z):
        X, Y = split(Z)
        _, r = radial(Y)
        return (Hx.value(X) - c0) * zeta.value(r / a)

    def grad(Z):
        X, Y = split(Z)
        LY, r = radial(Y)
        psi = zeta.value(r / a)
        dz = zeta.d1(r / a) / a
        safe = np.where(r > 0, r, 1.0)
        gpsi = (dz / safe)[:, None] * (LY @ L)
        out = np.zeros((Z.shape[0], dim))
        out[:, ix] = Hx.grad(X) * psi[:, None]
        out[:, iy] = (Hx.value(X) - c0)[:, None] * gpsi
        return out

    def hess(Z):
        Z = np.atleast_2d(Z)
        X, Y = split(Z)
        LY, r = radial(Y)
        s = r / a
        psi = zeta.value(s)
        safe = np.where(r > 0, r, 1.0)
        u = LY / safe[:, None]
        d1 = zeta.d1(s) / a
        d2 = zeta.d2(s) / a ** 2
        gpsi = (d1 / safe)[:, None] * (LY @ L)
        inner = d2[:, None, None] * u[:, :, None] * u[:, None, :]
        inner += (d1 / safe)[:, None, None] * (np.eye(n_y) - u[:, :, None] * u[:, None, :])
        Hpsi = np.matmul(L.T, np.matmul(inner, L))
        h0 = Hx.value(X) - c0
        gx = Hx.grad(X)
        out = np.zeros((Z.shape[0], dim, dim))
        out[:, ix[:, None], ix[None, :]] = Hx.hess(X) * psi[:, None, None]
        cross = gx[:, :, None] * gpsi[:, None, :]
        out[:, ix[:, None], iy[None, :]] = cross
        out[:, iy[:, None], ix[None, :]] = np.transpose(cross, (0, 2, 1))
        out[:, iy[:, None], iy[None, :]] = h0[:, None, None] * Hpsi
        return out

    return value, grad, hess


def dimension_reduction(Hs, As, kappa, delta=None, n_verify=2000, seed=0, a_max=1e12):
    """Lift Hamiltonians on R^{2nu} to R^{2N} by multiplying with a bump in
    the complementary coordinates, on a cylinder of height a."""
    As = [np.asarray(A, dtype=float) for A in As]
    if len(Hs) != len(As) or not Hs:
        raise ParameterError("need one Hamiltonian per map")
    d = As[0].shape[0]
    N = d // 2
    nu = Hs[0].dim // 2
    if not 1 <= nu < N:
        raise ParameterError("need 1 <= nu < N")
    if not 0 < kappa < 1:
        raise ParameterError("kappa must lie in (0, 1)")
    if delta is None:
        delta = max(H.hessian_bound for H in Hs) * (1 + 1e-9)
    if any(H.hessian_bound >= delta for H in Hs):
        raise PreconditionError("every Hamiltonian needs sup|D^2 H| < delta")
    blocks = [_split_blocks(A, nu, N) for A in As]
    ix, iy = blocks[0][2], blocks[0][3]
    k = 2 * (N - nu)
    sigma = float((1.0 - 0.9 * kappa) ** (1.0 / k))
    zeta = make_bump("zeta", sigma)
    c = max(zeta.d1_sup, zeta.d2_sup, zeta.d1_sup / sigma)
    Cinv = [np.eye(k)]
    for _, C, _, _ in blocks[:-1]:
        Cinv.append(Cinv[-1] @ symplectic_inverse(C))
    # smallest a with V c |L|^2 / a^2 + 2 G c |L| / a < 2 delta - sup|D^2 H_i| for all i
    a = 1.0
    for H, L in zip(Hs, Cinv):
        nL = np.linalg.norm(L, 2)
        room = 0.99 * (2 * delta - H.hessian_bound)
        qa, qb = H.value_bound * c * nL ** 2, 2 * H.grad_bound * c * nL
        inv_a = (-qb + np.sqrt(qb * qb + 4 * qa * room)) / (2 * qa) if qa > 0 else (room / qb if qb > 0 else np.inf)
        a = max(a, 1.0 / inv_a if inv_a > 0 else np.inf)
    rng = np.random.default_rng(seed)
    while True:
        if not np.isfinite(a) or a > a_max:
            raise MemoryGuardError(f"cylinder height a={a:.3e} exceeds the overflow guard")
        H_hats = []
        worst = 0.0
        for H, L, (B, C, _, _) in zip(Hs, Cinv, blocks):
            v, g, h = _lift(H, zeta, L, a, ix, iy, d)
            nL = np.linalg.norm(L, 2)
            bound = H.hessian_bound + H.value_bound * c * nL ** 2 / a ** 2 + 2 * H.grad_bound * c * nL / a
            Hh = Hamiltonian(d, v, g, h, bound, H.grad_bound + H.value_bound * c * nL / a,
                             H.value_bound, name=f"{H.name}|lift")
            # verification sample: the support of the lift is (support of H) x (a C_i)
            xs = H.sample_support(n_verify, rng)
            ys = _ball(n_verify, k, rng) * a
            ys = np.linalg.solve(L, ys.T).T
            Z = np.zeros((n_verify, d))
            Z[:, ix], Z[:, iy] = xs, ys
            worst = max(worst, float(np.linalg.norm(h(Z), 2, axis=(1, 2)).max()))
            H_hats.append(Hh)
        if worst < 2 * delta:
            break
        a *= 2.0
    G_hat = {"x_radius": 1.0, "y_radius": sigma * a, "U_y_radius": a}
    return DimReduction(float(a), sigma, nu, N, H_hats, Cinv, float(delta), worst, G_hat, sigma ** k)


def _ball(n, k, rng):
    Z = rng.normal(size=(n, k))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    return Z * rng.uniform(size=(n, 1)) ** (1.0 / k)


def sample_G_hat(dr, n, rng):
    d = 2 * dr.N
    nu = dr.nu
    ix = np.r_[0:nu, dr.N:dr.N + nu]
    iy = np.r_[nu:dr.N, dr.N + nu:d]
    Z = np.zeros((n, d))
    Z[:, ix] = _ball(n, 2 * nu, rng)
    Z[:, iy] = _ball(n, 2 * (dr.N - nu), rng) * dr.G_hat["y_radius"]
    return Z


def skew_product_residual(dr, Hs, As, n=1000, seed=0, t=1.0, tol=1e-11):
    """max | A_{m-1} phi_hat ... A_0 phi_hat(z) - (B-side, C-side) | over
    points z sampled in G_hat."""
    rng = np.random.default_rng(seed)
    Z = sample_G_hat(dr, n, rng)
    N, nu = dr.N, dr.nu
    ix = np.r_[0:nu, N:N + nu]
    iy = np.r_[nu:N, N + nu:2 * N]
    lhs = Z.copy()
    x = Z[:, ix].copy()
    y = Z[:, iy].copy()
    for Hh, H, A in zip(dr.H_hats, Hs, As):
        lhs, _, _ = flow_batch(Hh, t, lhs, tol, check_bounds=False)
        lhs = lhs @ np.asarray(A).T
        x, _, _ = flow_batch(H, t, x, tol, check_bounds=False)
        B, C, _, _ = _split_blocks(np.asarray(A, dtype=float), nu, N)
        x = x @ B.T
        y = y @ C.T
    rhs = np.zeros_like(lhs)
    rhs[:, ix], rhs[:, iy] = x, y
    return float(np.abs(lhs - rhs).max())


# ---------------------------------------------------------------- kick angles


def signed_angle(t):
    """Representative of t mod pi in [-pi/2, pi/2)."""
    return np.mod(np.asarray(t, dtype=float) + 0.5 * np.pi, np.pi) - 0.5 * np.pi


def kick_angles(H, X, tol=1e-7):
    """Theta(Dh(x) . dp1) for the time-1 map h of a 4-dimensional H."""
    if H.dim != 4:
        raise ParameterError("kick angles need a Hamiltonian on R^4")
    _, D, _ = flow_batch(H, 1.0, X, tol, check_bounds=False)
    return signed_angle(direction_angles(D[:, :, 0]))


@dataclass
class NuSample:
    samples: np.ndarray
    mean: float
    variance: float
    support_radius: float


def _summary(X):
    return NuSample(X, float(X.mean()), float(X.var()), float(np.abs(X).max()) if X.size else 0.0)


def sample_nu(H, n, seed):
    """Angles Theta(Dh(x) . dp1) for x uniform in the support of H."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = H.sample_support(int(n), rng)
    return _summary(kick_angles(H, X))


def nu_quadrature(H, per_axis=16):
    """Midpoint-rule nodes on the cube with their angles and tangents."""
    g = (np.arange(per_axis) + 0.5) / per_axis * 2.0 - 1.0
    G = np.stack(np.meshgrid(*([g] * 4), indexing="ij"), axis=-1).reshape(-1, 4) * H.support_radius
    G = np.linalg.solve(H.support_chart, G.T).T
    _, D, _ = flow_batch(H, 1.0, G, 1e-7, check_bounds=False)
    X = signed_angle(direction_angles(D[:, :, 0]))
    return G, D, X


# ----------------------------------------------------------------- cone facts


def cone_threshold(tau):
    """Largest eps' with M(C_1) inside C_{tau^2} whenever ||M - Id|| < eps'.

    The extreme case is a unit vector with |p| = |q| = 1/sqrt(2) pushed by
    eps' towards q and away from p.
    """
    if tau <= 1:
        raise ParameterError("tau must exceed 1")
    t2 = tau * tau
    return float((t2 - 1.0) / (np.sqrt(2.0) * (t2 + 1.0)))


def delta_from_cone(tau, K_L=None):
    from .symplin import shear_norm_bound

    if K_L is None:
        K_L = shear_norm_bound()
    return float(np.log1p(cone_threshold(tau)) / (2.0 * K_L ** 2))

import numpy as np
import pytest

from symcocycle.cocycle import diag_pq, embed_blocks
from symcocycle.errors import ParameterError, PreconditionError
from symcocycle.kick import (
    cone_threshold,
    dimension_reduction,
    flow,
    flow_batch,
    kick_angles,
    make_bump,
    make_kick_hamiltonian,
    make_rot_hamiltonian,
    sample_nu,
    skew_product_residual,
    tangent_symplectic_defect,
    transform_hamiltonian,
    zero_hamiltonian,
)
from symcocycle.symplin import rotation_Rt


@pytest.fixture(scope="module")
def kick():
    return make_kick_hamiltonian(seed=0)


def fd_grad(H, X, h=1e-6):
    G = np.empty_like(X)
    for k in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[k] = h
        G[:, k] = (H.value(X + e) - H.value(X - e)) / (2 * h)
    return G


def fd_hess(H, X, h=1e-5):
    d = X.shape[1]
    out = np.empty((X.shape[0], d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        out[:, :, k] = (H.grad(X + e) - H.grad(X - e)) / (2 * h)
    return out


def test_bump_examples():
    rho = make_bump("rho", 0.9)
    assert rho(0.5) == 0.5
    assert make_bump("zeta", 0.5)(2.0) == 0.0
    t = np.linspace(-1, 2, 200001)
    assert np.abs(rho.d2(t)).max() <= 100.0
    z = make_bump("zeta", 0.7)
    assert np.abs(z.d1(t)).max() <= 10 / 0.3 and np.abs(z.d2(t)).max() <= 10 / 0.3 ** 2


def test_bump_derivatives_match_finite_differences():
    t = np.linspace(-0.2, 1.2, 1001)
    h = 1e-6
    for kind in ("rho", "zeta"):
        b = make_bump(kind, 0.6)
        assert np.allclose((b.value(t + h) - b.value(t - h)) / (2 * h), b.d1(t), atol=1e-6)
        assert np.allclose((b.d1(t + h) - b.d1(t - h)) / (2 * h), b.d2(t), atol=1e-4)


def test_bump_rejects_sigma():
    with pytest.raises(ParameterError):
        make_bump("rho", 1.0)


def test_rot_hamiltonian_rotates_inner_disk():
    H = make_rot_hamiltonian(np.pi / 2, 0.9)
    r = flow(H, 1.0, [0.1, 0.0])
    assert np.allclose(r.endpoint, [0.0, 0.1], atol=1e-9)
    c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
    assert np.allclose(r.tangent, [[c, -s], [s, c]], atol=1e-8)


def test_rot_hamiltonian_fixed_outside():
    H = make_rot_hamiltonian(0.8, 0.9)
    X = np.array([[1.0, 0.0], [0.8, -0.9], [-2.0, 1.0]])
    Y, D, _ = flow_batch(H, 1.0, X)
    assert np.array_equal(Y, X)
    assert np.allclose(D, np.eye(2))


def test_rot_hamiltonian_bounds():
    for alpha, sigma in ((0.5, 0.9), (2.0, 0.6)):
        H = make_rot_hamiltonian(alpha, sigma)
        assert H.hessian_bound <= alpha * (1 + 40 / (1 - sigma))
        rng = np.random.default_rng(1)
        X = rng.uniform(-1.1, 1.1, size=(5000, 2))
        assert np.linalg.norm(H.hess(X), 2, axis=(1, 2)).max() <= H.hessian_bound
        assert np.allclose(H.grad(X), fd_grad(H, X), atol=1e-6)
        assert np.allclose(H.hess(X), fd_hess(H, X), atol=1e-3 * H.hessian_bound)


def test_kick_derivatives_and_bounds(kick):
    rng = np.random.default_rng(2)
    X = rng.uniform(-1.05, 1.05, size=(3000, 4))
    g = kick.grad(X)
    assert np.allclose(g, fd_grad(kick, X), atol=1e-6 * kick.grad_bound)
    assert np.allclose(kick.hess(X), fd_hess(kick, X), atol=1e-4 * kick.hessian_bound)
    assert np.linalg.norm(g, axis=1).max() <= kick.grad_bound
    assert np.linalg.norm(kick.hess(X), 2, axis=(1, 2)).max() <= kick.hessian_bound
    assert kick.hessian_bound < kick.params["delta"]


def test_kick_vanishes_outside_cube(kick):
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(500, 4))
    k = rng.integers(0, 4, 500)
    X[np.arange(500), k] = rng.choice([-1.0, 1.0], 500) * rng.uniform(1.0, 2.0, 500)
    assert np.all(kick.value(X) == 0.0)
    assert np.all(kick.grad(X) == 0.0)


def test_kick_rejects_delta():
    with pytest.raises(ParameterError):
        make_kick_hamiltonian(delta=0.0)


def test_zero_hamiltonian_flow():
    r = flow(zero_hamiltonian(4), 1.0, [0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(r.endpoint, [0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(r.tangent, np.eye(4))


def test_zero_hamiltonian_angles():
    X = np.random.default_rng(0).uniform(-1, 1, size=(20, 4))
    assert np.all(kick_angles(zero_hamiltonian(4), X) == 0.0)
    assert np.all(sample_nu(zero_hamiltonian(4), 20, 1).samples == 0.0)


def test_small_delta_angle_law_shrinks():
    r = [np.abs(sample_nu(make_kick_hamiltonian(delta=d, seed=1), 300, 2).samples).max()
         for d in (0.4, 0.1, 0.025)]
    # the angle is nearly linear in the kick size, and delta drops 4x per step
    assert r[2] > 0
    assert r[0] / r[1] > 3 and r[1] / r[2] > 3


def test_default_kick_angle_law(kick):
    nu = sample_nu(kick, 10_000, seed=5)
    assert nu.variance > 0
    assert nu.support_radius < kick.params["alpha"] / 20


def test_sample_nu_deterministic(kick):
    a = sample_nu(kick, 200, seed=9).samples
    b = sample_nu(kick, 200, seed=9).samples
    assert np.array_equal(a, b)


def test_kick_flow_bounds(kick):
    rng = np.random.default_rng(4)
    X = kick.sample_support(200, rng)
    Y, D, _ = flow_batch(kick, 1.0, X, tol=1e-10)
    dev = np.linalg.norm(D - np.eye(4), 2, axis=(1, 2)).max()
    assert dev <= np.expm1(kick.params["delta"])
    assert dev <= np.expm1(kick.hessian_bound) + 1e-9
    assert np.linalg.norm(Y - X, axis=1).max() <= kick.grad_bound + 1e-9
    assert tangent_symplectic_defect(D) <= 1e-8


def test_flow_rk4_agrees_with_midpoint():
    H = make_kick_hamiltonian(delta=1.0, seed=2)
    X = H.sample_support(20, np.random.default_rng(1))
    Ya, Da, _ = flow_batch(H, 1.0, X, tol=1e-10)
    Yb, Db, _ = flow_batch(H, 1.0, X, tol=1e-10, method="rk4")
    assert np.allclose(Ya, Yb, atol=1e-9) and np.allclose(Da, Db, atol=1e-9)


def test_rescale_identity():
    H = make_rot_hamiltonian(0.9, 0.5)
    H1 = transform_hamiltonian(H, "rescale", a=2.0)
    X = np.random.default_rng(6).uniform(-0.6, 0.6, size=(100, 2))
    Y1, _, _ = flow_batch(H1, 1.0, X, tol=1e-10)
    Y, _, _ = flow_batch(H, 1.0, 2 * X, tol=1e-10)
    assert np.abs(Y1 - 0.5 * Y).max() <= 1e-8
    assert H1.hessian_bound == H.hessian_bound


def test_conjugate_identity_and_rotation():
    H = make_kick_hamiltonian(delta=1.0, seed=3)
    X = np.random.default_rng(7).uniform(-1, 1, size=(60, 4))
    Y, _, _ = flow_batch(H, 1.0, X, tol=1e-11)
    Hi = transform_hamiltonian(H, "conjugate", M=np.eye(4))
    Yi, _, _ = flow_batch(Hi, 1.0, X, tol=1e-11)
    assert np.abs(Yi - Y).max() <= 1e-10
    M = rotation_Rt(0.3)
    H2 = transform_hamiltonian(H, "conjugate", M=M)
    Y2, _, _ = flow_batch(H2, 1.0, X, tol=1e-11)
    Yc, _, _ = flow_batch(H, 1.0, X @ M.T, tol=1e-11)
    assert np.abs(Y2 - Yc @ np.linalg.inv(M).T).max() <= 1e-8


def test_conjugate_rejects_non_symplectic():
    with pytest.raises(PreconditionError):
        transform_hamiltonian(zero_hamiltonian(4), "conjugate", M=np.diag([2.0, 1, 1, 1]))


def test_dimension_reduction_identity_maps():
    H = make_rot_hamiltonian(0.6, 0.5)
    A = np.eye(4)
    dr = dimension_reduction([H], [A], kappa=0.5)
    assert skew_product_residual(dr, [H], [A], n=60, seed=0, tol=1e-8) <= 1e-12


def test_dimension_reduction_cylinder_height_grows():
    Hs = [make_kick_hamiltonian(delta=1.0, seed=s) for s in (1, 2, 3)]
    small = [embed_blocks(np.eye(4), diag_pq([1.0])) for _ in range(3)]
    big = [embed_blocks(np.eye(4), diag_pq([2.0])) for _ in range(3)]
    a_small = dimension_reduction(Hs, small, kappa=0.5).a
    dr = dimension_reduction(Hs, big, kappa=0.5)
    assert dr.a > a_small
    assert dr.sampled_hessian < 2 * dr.delta
    assert all(H.hessian_bound < 2 * dr.delta for H in dr.H_hats)


def test_dimension_reduction_volume_ratio():
    dr = dimension_reduction([make_rot_hamiltonian(0.5)], [np.eye(4)], kappa=0.5)
    assert dr.sigma > 0.5
    assert dr.volume_ratio == pytest.approx(dr.sigma ** 2)
    assert dr.volume_ratio > 0.5


def test_dimension_reduction_needs_block_maps():
    A = np.eye(4)
    A[2, 1] = A[3, 0] = 0.5  # couples p2 into q1, symplectic but not block-diagonal
    with pytest.raises(PreconditionError):
        dimension_reduction([make_rot_hamiltonian(0.5)], [A], kappa=0.5)


def test_cone_threshold_extreme_vector():
    tau = 1.5
    e = cone_threshold(tau)
    v = np.array([1.0, 0.0, 1.0, 0.0]) / np.sqrt(2)
    # push p down and q up by e: ratio reaches tau^2 exactly
    w = v + e * np.array([-1.0, 0.0, 1.0, 0.0])
    assert np.hypot(w[2], w[3]) / np.hypot(w[0], w[1]) == pytest.approx(tau ** 2)

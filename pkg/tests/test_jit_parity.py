import numpy as np
import pytest

from symcocycle import _jit
from symcocycle.kick import flow_batch, make_kick_hamiltonian
from symcocycle.walk import StepSource, WalkConfig, simulate_walk


def test_env_toggle(monkeypatch):
    monkeypatch.setenv(_jit.DISABLE_ENV, "1")
    assert not _jit.jit_enabled()
    monkeypatch.setenv(_jit.DISABLE_ENV, "0")
    assert _jit.jit_enabled() == _jit.jit_available()
    monkeypatch.delenv(_jit.DISABLE_ENV)
    assert _jit.jit_enabled() == _jit.jit_available()


@pytest.mark.skipif(not _jit.jit_available(), reason="numba not installed")
@pytest.mark.parametrize("src", [StepSource.uniform(0.04), StepSource.point_mass(0.013),
                                 StepSource.from_samples(np.linspace(-0.05, 0.03, 11))])
def test_walk_backends_identical(monkeypatch, src):
    cfg = WalkConfig(src, 0.4, 0.5, m_max=2000, paths=500, seed=5)
    fast = simulate_walk(cfg)
    monkeypatch.setenv(_jit.DISABLE_ENV, "1")
    slow = simulate_walk(cfg)
    assert np.array_equal(fast.absorbed_at, slow.absorbed_at)
    assert np.array_equal(fast.failure_prob, slow.failure_prob)


@pytest.mark.skipif(not _jit.jit_available(), reason="numba not installed")
def test_kick_flow_backends_agree(monkeypatch):
    H = make_kick_hamiltonian(delta=2.0, seed=4)
    X = H.sample_support(40, np.random.default_rng(0))
    Ya, Da, na = flow_batch(H, 1.0, X, tol=1e-11)
    monkeypatch.setenv(_jit.DISABLE_ENV, "1")
    Yb, Db, nb = flow_batch(H, 1.0, X, tol=1e-11)
    assert na == nb
    assert np.abs(Ya - Yb).max() <= 1e-12
    assert np.abs(Da - Db).max() <= 1e-11

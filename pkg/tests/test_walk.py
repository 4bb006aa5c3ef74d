import math

import numpy as np
import pytest

from symcocycle import walk
from symcocycle.errors import ParameterError
from symcocycle.symplin import circle_distance
from symcocycle.walk import StepSource, WalkConfig, find_m1, simulate_walk, write_walk_csv

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def reference_walk(kind, value, samples, alpha, seed, paths, m_max):
    """Scalar walk with Python-int SplitMix64 streams; one stream per path."""
    hw = alpha / 20.0
    out = []
    for i in range(paths):
        z = mix((seed + GOLDEN * (i + 1)) & MASK)
        y = -math.pi / 2
        hit = -1
        for n in range(1, m_max + 1):
            if kind == "point":
                x = value
            else:
                z = (z + GOLDEN) & MASK
                u = (mix(z) >> 11) * 2.0 ** -53
                if kind == "uniform":
                    x = value * (2.0 * u - 1.0)
                else:
                    x = samples[min(int(u * len(samples)), len(samples) - 1)]
            y += x
            if y >= math.pi / 2:
                y -= math.pi
            elif y < -math.pi / 2:
                y += math.pi
            if abs(y) <= hw:
                hit = n
                break
        out.append(hit)
    return np.array(out)


def test_splitmix_first_output():
    # first output of the SplitMix64 stream seeded with 0
    assert mix(GOLDEN) == 0xE220A8397B1DCDAF
    assert int(walk._seed_states(np.uint64(0), 0, 1)[0]) == 0xE220A8397B1DCDAF
    assert int(walk._seed_states_np(np.uint64(0), 0, 1)[0]) == 0xE220A8397B1DCDAF


def test_seed_states_agree():
    a = walk._seed_states(np.uint64(2 ** 63 + 5), 0, 1000)
    b = walk._seed_states_np(np.uint64(2 ** 63 + 5), 0, 1000)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kind", ["uniform", "samples"])
def test_walk_matches_scalar_reference(kind):
    samples = np.linspace(-0.06, 0.05, 7)
    src = StepSource.uniform(0.05) if kind == "uniform" else StepSource.from_samples(samples)
    cfg = WalkConfig(src, 0.4, 0.5, m_max=1500, paths=300, seed=11)
    res = simulate_walk(cfg)
    ref = reference_walk(kind, 0.05, list(samples), 0.4, 11, 300, 1500)
    assert np.array_equal(res.absorbed_at, ref)


def test_point_mass_zero_never_moves():
    res = find_m1(WalkConfig(StepSource.point_mass(0.0), 0.4, 0.5, m_max=64, paths=10, m_cap=256))
    assert np.all(res.failure_prob == 1.0)
    assert res.m1 is None and "m_cap" in res.diagnostic


def test_point_mass_absorption_time():
    # first n with |0.01 n - pi/2| <= 0.02
    n_star = next(n for n in range(1, 400) if circle_distance(0.01 * n, np.pi / 2) <= 0.02)
    assert 155 <= n_star <= 159
    res = simulate_walk(WalkConfig(StepSource.point_mass(0.01), 0.4, 0.5, m_max=300, paths=5))
    assert np.all(res.absorbed_at == n_star)
    assert res.failure_prob[n_star - 1] == 1.0 and res.failure_prob[n_star] == 0.0
    res = find_m1(WalkConfig(StepSource.point_mass(0.01), 0.4, 1.0, m_max=64, paths=5))
    assert res.m1 <= 160


def test_uniform_horizon_and_step_scale():
    big = find_m1(WalkConfig(StepSource.uniform(0.01), 0.4, 0.5, m_max=4096, paths=4000, seed=1))
    assert big.m1 is not None
    p = big.failure_prob
    assert np.all(np.diff(p) <= 0)
    # failure_prob strictly decreasing on average past the first passages
    assert p[big.m1] < p[big.m1 // 2] < p[big.m1 // 4] <= 1.0
    small = simulate_walk(WalkConfig(StepSource.uniform(0.001), 0.4, 0.5, m_max=big.m1, paths=4000, seed=1))
    assert small.m1 is None
    assert small.failure_prob[-1] > big.failure_prob[-1]


def test_resumed_walk_equals_single_run():
    cfg = WalkConfig(StepSource.uniform(0.05), 0.4, 0.5, m_max=500, paths=200, seed=3)
    w = walk._Walker(cfg)
    w.advance(100)
    w.advance(500)
    assert np.array_equal(w.result().absorbed_at, simulate_walk(cfg).absorbed_at)


def test_walk_csv(tmp_path):
    res = simulate_walk(WalkConfig(StepSource.point_mass(0.01), 0.4, 0.5, m_max=200, paths=3))
    path = tmp_path / "walk.csv"
    write_walk_csv(res, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "m,failure_prob,stderr" and len(rows) == 202
    assert float(rows[-1].split(",")[1]) == 0.0


def test_walk_config_validation():
    with pytest.raises(ParameterError):
        WalkConfig(StepSource.uniform(0.01), 2.0, 0.5)
    with pytest.raises(ParameterError):
        WalkConfig(StepSource.uniform(0.01), 0.4, 0.0)
    with pytest.raises(ParameterError):
        StepSource.uniform(-1.0)
    with pytest.raises(ParameterError):
        StepSource.from_samples([])

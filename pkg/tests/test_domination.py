import math

import numpy as np
import pytest

from symcocycle.cocycle import SplitSeq, diag_pq, segment_from_constant
from symcocycle.domination import (
    domination_horizon,
    domination_ratios,
    is_m_dominated,
    nondominance_holds,
    partial_hyperbolicity_check,
    ph_horizon,
    verify_ds_implies_ph,
)
from symcocycle.errors import HorizonError, PreconditionError
from symcocycle.symplin import Subspace, coordinate_subspace


def planar_seq(A, n):
    mats = np.repeat(np.asarray(A, dtype=float)[None], n, axis=0)
    p = Subspace(np.array([1.0, 0.0]))
    q = Subspace(np.array([0.0, 1.0]))
    return SplitSeq(mats, [p] * (n + 1), [q] * (n + 1))


def seg4(diag, n=20):
    A = np.diag(diag)
    return segment_from_constant(A, n, coordinate_subspace(2, ["p1"]),
                                 coordinate_subspace(2, ["p2", "q2"]), coordinate_subspace(2, ["q1"]))


def test_ratio_diag_2_half():
    rep = is_m_dominated(planar_seq(np.diag([2.0, 0.5]), 5), 1)
    assert rep.worst_ratio == pytest.approx(0.25) and rep.passed


def test_ratio_diag_11():
    seq = planar_seq(np.diag([1.1, 1 / 1.1]), 10)
    r3 = is_m_dominated(seq, 3)
    r4 = is_m_dominated(seq, 4)
    assert r3.worst_ratio == pytest.approx(1.1 ** -6) and not r3.passed
    assert r4.worst_ratio == pytest.approx(1.1 ** -8) and r4.passed


def test_horizon_examples():
    assert domination_horizon(planar_seq(np.diag([1.1, 1 / 1.1]), 20), 20) == math.ceil(math.log(2) / (2 * math.log(1.1)))
    assert domination_horizon(planar_seq(np.diag([4.0, 0.25]), 5), 5) == 1
    assert domination_horizon(planar_seq(np.eye(2), 5), 5) is None


def test_horizon_bad_m():
    with pytest.raises(HorizonError):
        domination_ratios(np.repeat(np.eye(2)[None], 3, axis=0), None, None, 4)


def test_nondominance_examples():
    seg = segment_from_constant(np.eye(4), 5, coordinate_subspace(2, ["p1"]), coordinate_subspace(2, ["p2", "q2"]),
                                coordinate_subspace(2, ["q1"]))
    assert nondominance_holds(seg, 3).ratio == pytest.approx(1.0)
    assert not nondominance_holds(seg4([2.0, 1.0, 0.5, 1.0]), 2)
    assert nondominance_holds(seg4([2.0, 1.0, 0.5, 1.0]), 2).ratio == pytest.approx(0.25)
    c = 1.7
    conf = segment_from_constant(diag_pq([c, c]), 5, coordinate_subspace(2, ["p1"]),
                                 coordinate_subspace(2, ["p2", "q1"]), coordinate_subspace(2, ["q2"]))
    nd = nondominance_holds(conf, 1)
    assert nd and nd.ratio == pytest.approx(1.0)


def test_ph_examples():
    assert partial_hyperbolicity_check(seg4([4.0, 1.0, 0.25, 1.0]), 1).passed
    rep = partial_hyperbolicity_check(seg4([1.0, 1.0, 1.0, 1.0]), 3)
    assert not rep.passed and rep.min_unstable_conorm == pytest.approx(1.0)
    assert ph_horizon(seg4([1.2, 1.0, 1 / 1.2, 1.0]), 20) == math.ceil(math.log(2) / math.log(1.2))
    assert ph_horizon(seg4([2.0, 1.0, 0.5, 1.0]), 20) == 1


def test_ph_two_rates():
    # E^u = p1 expands at 1.1, the centre (p2, q2) at 1.05 / 1/1.05, so every
    # clause is a comparison of powers; the binding one is 1.1^m >= 2
    seg = seg4([1.1, 1.05, 1 / 1.1, 1 / 1.05], n=40)
    m_dom = domination_horizon(seg.split_seq(), 40)
    assert m_dom == math.ceil(math.log(2) / math.log(1.1 / 1.05))
    assert ph_horizon(seg, 40) == max(m_dom, math.ceil(math.log(2) / math.log(1.1)))


def test_ds_implies_ph_perturbed():
    from symcocycle.classify import bounded_symplectic

    rng = np.random.default_rng(1)
    C = bounded_symplectic(rng, max_norm=1.1)
    seg = seg4([2.0, 1.0, 0.5, 1.0], n=40).conjugate(C)
    rep = verify_ds_implies_ph(seg, 2)
    assert rep.ph_m is not None and rep.ph_m <= 64 and rep.ph_report.passed


def test_ds_implies_ph_rejects_non_dominated():
    with pytest.raises(PreconditionError):
        verify_ds_implies_ph(seg4([1.0, 1.0, 1.0, 1.0]), 2)

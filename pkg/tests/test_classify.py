import numpy as np
import pytest

from symcocycle.classify import (
    DEFAULT_TEST_THRESHOLDS,
    FAMILIES,
    Thresholds,
    bounded_symplectic,
    build_type4_witness,
    classify_segment,
    correct_exponent_sequence,
    random_nondominated_segment,
    verify_type_witness,
)
from symcocycle.cocycle import diag_pq, segment_from_constant
from symcocycle.errors import NotApplicableError, ParameterError, PreconditionError
from symcocycle.symplin import Subspace, coordinate_subspace, symplectic_inverse

EXPECTED = {"angle_pinch": "I", "rate_swap": "II", "identity_plane": "III", "conformal": "IV"}


def coord_segment(A, n, ec=("p2", "q2")):
    return segment_from_constant(A, n, coordinate_subspace(2, ["p1"]), coordinate_subspace(2, list(ec)),
                                 coordinate_subspace(2, ["q1"]))


def test_thresholds_validation():
    with pytest.raises(ParameterError):
        Thresholds(alpha=2.0, K2=10.0, m0=2)
    with pytest.raises(ParameterError):
        Thresholds(alpha=0.1, K2=0.5, m0=2)


def test_type_one_at_start():
    alpha = 0.2
    t = 1.0 / np.tan(alpha / 2)
    S = np.eye(4)
    S[2, 0] = t
    A = S @ diag_pq([2.0, 2.0]) @ symplectic_inverse(S)
    seg = segment_from_constant(A, 10, Subspace(S[:, 0]), coordinate_subspace(2, ["p2", "q2"]),
                                coordinate_subspace(2, ["q1"]))
    cls = classify_segment(seg, Thresholds(alpha, 1e6, 4))
    assert cls.tag == "I" and cls.location == (0,)
    assert cls.constants["angle"] == pytest.approx(alpha / 2, abs=1e-12)


def test_type_two_first_window():
    seg = coord_segment(np.diag([1.0, 2.0, 1.0, 0.5]), 10)
    cls = classify_segment(seg, Thresholds(0.1, 4.0, 4), m=10)
    assert cls.tag == "II"
    # ratio 2^j first exceeds 4 at j = 3
    assert cls.location == (0, 3) and cls.constants["ratio"] == pytest.approx(8.0)


def test_type_four_normal_form():
    seg = coord_segment(diag_pq([2.0, 2.0]), 40)
    cls = classify_segment(seg, Thresholds(0.01, 1e12, 5), m=40)
    assert cls.tag == "IV"
    assert np.allclose(cls.rates, 2.0)
    rep = verify_type_witness(cls, seg)
    assert rep.max_residual < 1e-10


def test_type_three_already_split():
    seg = coord_segment(np.diag([1.0, 3.0, 1.0, 1 / 3]), 10)
    cls = classify_segment(seg, Thresholds(0.1, 1e6, 3), m=10)
    assert cls.tag == "III" and cls.location == (0, 3)
    for L in cls.witnesses:
        assert np.allclose(np.abs(L), np.eye(4), atol=1e-12)
    assert verify_type_witness(cls, seg).max_residual < 1e-12


def test_type_three_identity_cocycle():
    seg = coord_segment(np.eye(4), 6)
    cls = classify_segment(seg, Thresholds(0.1, 10.0, 2), m=6)
    assert cls.tag == "III"
    for L in cls.witnesses:
        assert np.allclose(np.abs(L), np.eye(4), atol=1e-12)


def test_type_three_conjugated():
    rng = np.random.default_rng(7)
    C = bounded_symplectic(rng, max_norm=2.0)
    base = coord_segment(np.diag([1.0, 3.0, 1.0, 1 / 3]), 10)
    seg = base.conjugate(C)
    cls = classify_segment(seg, Thresholds(0.1, 1e6, 3), m=10)
    assert cls.tag == "III"
    assert cls.constants["K_III"] <= cls.constants["K_III_bound"]
    rep = verify_type_witness(cls, seg)
    assert rep.max_residual <= 1e-8
    k = cls.location[0]
    for i in range(len(cls.witnesses) - 1):
        Ah = cls.witnesses[i + 1] @ seg.matrices[k + i] @ symplectic_inverse(cls.witnesses[i])
        assert np.allclose(Ah[:, [0, 2]], np.eye(4)[:, [0, 2]], atol=1e-8)


def test_type_four_conjugated():
    rng = np.random.default_rng(8)
    C = bounded_symplectic(rng, max_norm=2.0)
    seg = coord_segment(diag_pq([2.0, 2.0]), 20).conjugate(C)
    cls = classify_segment(seg, Thresholds(0.01, 1e12, 5), m=20)
    assert cls.tag == "IV"
    assert verify_type_witness(cls, seg).max_residual <= 1e-6


def test_alternating_rates_corrected_to_two():
    mats = np.array([diag_pq([c, c]) for c in [4.0, 1.0] * 6])
    seg = coord_segment(mats[0], 12)
    seg.matrices = mats
    from symcocycle.cocycle import _transport

    seg.Eu, seg.Ec, seg.Es = (_transport(mats, seg.Eu[0]), _transport(mats, seg.Ec[0]),
                              _transport(mats, seg.Es[0]))
    charts, c_hat, consts, _ = build_type4_witness(seg, 1.0, ell=2)
    # b_i = a_i / 2 so c_hat = exp((a_{i+1} - a_i) / 2) c_i = 2
    assert np.allclose(c_hat, 2.0, atol=1e-12)
    assert consts["ell"] == 2


def test_correction_examples():
    c = correct_exponent_sequence([1.0, 1.0, 1.0], 1, 1.0, 0.5)
    assert np.all(c.b == 0.0) and np.allclose(c.gaps, 1.0)

    a = np.array([np.log(4), 0.0, np.log(4), 0.0])
    c = correct_exponent_sequence(a, 2, np.log(4), np.log(4) * (1 - 1e-12))
    assert np.allclose(c.b[:4], a / 2)
    assert np.allclose(c.gaps, np.log(2))

    c = correct_exponent_sequence([-0.1, 0.5, -0.1, 0.5], 2, 0.5, 0.3)
    assert np.allclose(c.gaps[:3], 0.2)
    assert np.all(c.gaps > 0.3 / 2)


def test_correction_rejects_bad_windows():
    with pytest.raises(PreconditionError):
        correct_exponent_sequence([0.1, -0.5, 0.1], 2, 1.0, 0.0)
    with pytest.raises(PreconditionError):
        correct_exponent_sequence([2.0], 1, 1.0, 0.0)


def test_dominated_segment_not_applicable():
    seg = coord_segment(np.diag([4.0, 1.0, 0.25, 1.0]), 8)
    with pytest.raises(NotApplicableError):
        classify_segment(seg, Thresholds(0.1, 10.0, 2))


def test_witness_fault_injection():
    seg = coord_segment(diag_pq([2.0, 2.0]), 10)
    cls = classify_segment(seg, Thresholds(0.01, 1e12, 5))
    clean = verify_type_witness(cls, seg)
    cls.witnesses[0] = cls.witnesses[0].copy()
    cls.witnesses[0][0, 1] += 0.1
    bad = verify_type_witness(cls, seg)
    assert clean.max_residual < 1e-12
    assert bad.max_residual > 1e-3 and bad.worst_step == 0
    assert np.all(bad.normal_form[1:] < 1e-12)


def test_witness_needs_charts():
    seg = coord_segment(np.diag([1.0, 2.0, 1.0, 0.5]), 10)
    cls = classify_segment(seg, Thresholds(0.1, 4.0, 4))
    with pytest.raises(PreconditionError):
        verify_type_witness(cls, seg)


@pytest.mark.parametrize("family", FAMILIES)
def test_families_tag_and_conjugation(family):
    rng = np.random.default_rng(FAMILIES.index(family))
    th = Thresholds(**DEFAULT_TEST_THRESHOLDS)
    for _ in range(10):
        seg = random_nondominated_segment(family, rng)
        cls = classify_segment(seg, th)
        assert cls.tag == EXPECTED[family]
        conj = seg.conjugate(bounded_symplectic(rng))
        cls2 = classify_segment(conj, th)
        assert cls2.tag == cls.tag
        for s, c in ((seg, cls), (conj, cls2)):
            if c.witnesses:
                assert verify_type_witness(c, s).max_residual <= 1e-6

"""m-domination, the non-dominance ratio and partial hyperbolicity.

Orientation: the first bundle of a splitting is the dominating one, and
m-domination means ||P|F|| <= (1/2) m(P|E) for every m-step product P.
"""
from dataclasses import dataclass

import numpy as np

from .errors import HorizonError, PreconditionError


@dataclass
class DominationReport:
    m: int
    index: int
    passed: bool
    worst_ratio: float
    worst_step: int


def window_products(mats, m):
    """All products A_{i+m-1}...A_i for i = 0..n-m, as an (n-m+1, d, d) stack."""
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[0]
    P = mats[: n - m + 1].copy()
    for k in range(1, m):
        P = np.matmul(mats[k: n - m + 1 + k], P)
    return P


def _stack_basis(spaces, count):
    return np.stack([spaces[i].basis for i in range(count)])


def _restricted_sv(P, B):
    return np.linalg.svd(np.matmul(P, B), compute_uv=False)


def domination_ratios(mats, E1, E2, m):
    """ratio_i = ||P_i|E2_i|| / m(P_i|E1_i) for every admissible start i."""
    n = np.asarray(mats).shape[0]
    if m < 1 or m > n:
        raise HorizonError(f"horizon m={m} must lie in [1, {n}]")
    P = window_products(mats, m)
    cnt = P.shape[0]
    s1 = _restricted_sv(P, _stack_basis(E1, cnt))
    s2 = _restricted_sv(P, _stack_basis(E2, cnt))
    return s2[:, 0] / s1[:, -1]


def is_m_dominated(seq, m):
    r = domination_ratios(seq.matrices, seq.E1, seq.E2, m)
    k = int(np.argmax(r))
    return DominationReport(int(m), seq.index, bool(r[k] <= 0.5), float(r[k]), k)


def domination_horizon(seq, m_max):
    for m in range(1, min(int(m_max), len(seq)) + 1):
        if is_m_dominated(seq, m).passed:
            return m
    return None


@dataclass
class NondominanceResult:
    holds: bool
    ratio: float

    def __bool__(self):
        return self.holds


def nondominance_holds(segment, m):
    if m > len(segment):
        raise HorizonError("segment shorter than m")
    P = window_products(segment.matrices[:m], m)[0]
    num = np.linalg.svd(P @ segment.Ecs(0).basis, compute_uv=False)[0]
    den = np.linalg.svd(P @ segment.Eu[0].basis, compute_uv=False)[-1]
    r = float(num / den)
    return NondominanceResult(r >= 0.5, r)


@dataclass
class PHReport:
    m: int
    passed: bool
    u_over_cs: float  # worst ||P|E^cs|| / m(P|E^u)
    uc_over_s: float  # worst ||P|E^s|| / m(P|E^uc)
    min_unstable_conorm: float  # worst m(P|E^u)
    max_stable_norm: float  # worst ||P|E^s||


def partial_hyperbolicity_check(segment, m):
    n = len(segment)
    if m > n:
        raise HorizonError("segment shorter than m")
    P = window_products(segment.matrices, m)
    cnt = P.shape[0]
    su = _restricted_sv(P, _stack_basis(segment.Eu, cnt))
    ss = _restricted_sv(P, _stack_basis(segment.Es, cnt))
    scs = _restricted_sv(P, np.stack([segment.Ecs(i).basis for i in range(cnt)]))
    suc = _restricted_sv(P, np.stack([segment.Euc(i).basis for i in range(cnt)]))
    a = float(np.max(scs[:, 0] / su[:, -1]))
    b = float(np.max(ss[:, 0] / suc[:, -1]))
    c = float(np.min(su[:, -1]))
    d = float(np.max(ss[:, 0]))
    ok = a <= 0.5 and b <= 0.5 and c >= 2.0 and d <= 0.5
    return PHReport(int(m), ok, a, b, c, d)


def ph_horizon(segment, m_max):
    for m in range(1, min(int(m_max), len(segment)) + 1):
        if partial_hyperbolicity_check(segment, m).passed:
            return m
    return None


@dataclass
class DSImpliesPHReport:
    domination_m: int
    ph_m: int
    ph_report: PHReport


def verify_ds_implies_ph(segment, m, m_cap=64):
    if segment.p > segment.N:
        raise PreconditionError("dim E^u must not exceed N")
    dom = is_m_dominated(segment.split_seq("u|cs"), m)
    if not dom.passed:
        raise PreconditionError(f"E^u does not dominate E^cs at m={m} (ratio {dom.worst_ratio:.4g})")
    mp = ph_horizon(segment, m_cap)
    rep = partial_hyperbolicity_check(segment, mp) if mp is not None else None
    return DSImpliesPHReport(int(m), mp, rep)

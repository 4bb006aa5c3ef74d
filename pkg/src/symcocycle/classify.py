"""Decision procedure for non-dominated segments.

The clauses are tried in a fixed order: a small angle between E^u and E^cs
(type I), a large ratio ||P|E^cs|| / m(P|E^u) over some sub-window (type II),
a window where E^s is not contracted relative to E^u (type III, identity on a
symplectic plane after a bounded change of basis), and otherwise type IV
(conformal expansion on a 4-plane).  For types III and IV explicit charts are
built and returned.
"""
from dataclasses import dataclass, field

import numpy as np

from .cocycle import Segment, segment_from_constant, diag_pq
from .domination import nondominance_holds, window_products
from .errors import (
    ClassificationFailure,
    DegeneratePairingError,
    NotApplicableError,
    ParameterError,
    PreconditionError,
)
from .symplin import (
    Subspace,
    coordinate_subspace,
    dual_vector,
    omega,
    orthosymplectic_extend,
    random_symplectic,
    subspace_angle,
    symplectic_inverse,
)

NORMAL_FORM_TOL = 1e-6
TYPE3_TOL = 1e-8


@dataclass
class Thresholds:
    alpha: float
    K2: float
    m0: int
    tau: float = 1.0
    ell: int = None

    def __post_init__(self):
        if not 0 < self.alpha < np.pi / 2:
            raise ParameterError("alpha must lie in (0, pi/2)")
        if self.K2 <= 1:
            raise ParameterError("K2 must exceed 1")
        if int(self.m0) < 1:
            raise ParameterError("m0 must be >= 1")
        if self.tau < 1:
            raise ParameterError("tau must be >= 1")


@dataclass
class SegmentClass:
    tag: str
    location: tuple
    constants: dict
    witnesses: list = None
    rates: np.ndarray = None
    trace: dict = field(default_factory=dict)


# ------------------------------------------------------------------ helpers


def canonical_sign(v, tol=1e-8):
    """Flip v so its first clearly non-zero coordinate is positive."""
    v = np.asarray(v, dtype=float)
    nz = np.flatnonzero(np.abs(v) > tol * np.linalg.norm(v))
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def extremal_vector(P, E, which="min", tie_tol=1e-10):
    """Unit vector of E least (or most) expanded by P.

    Ties among singular values are broken by taking the normalised
    projection of the earliest canonical axis onto the tied subspace.
    """
    B = E.basis
    _, s, Vt = np.linalg.svd(P @ B)
    idx = -1 if which == "min" else 0
    target = s[idx]
    tied = np.flatnonzero(np.abs(s - target) <= tie_tol * max(target, 1e-300))
    if tied.size > 1:
        W = B @ Vt[tied].T
        proj = W @ W.T
        lens = np.linalg.norm(proj, axis=0)
        k = int(np.flatnonzero(lens >= lens.max() * (1 - 1e-9))[0])
        v = proj[:, k] / lens[k]
    else:
        v = B @ Vt[idx]
    return canonical_sign(v / np.linalg.norm(v))


def _projected_forward(mats, spaces, v0, count):
    """Pi_i v0 for i = 0..count, projected back onto the moving subspace at
    every step so rounding cannot leak into faster directions."""
    out = [np.asarray(v0, dtype=float)]
    x = out[0]
    for i in range(count):
        y = mats[i] @ x
        B = spaces[i + 1].basis
        x = B @ (B.T @ y)
        out.append(x)
    return np.array(out)


def _projected_backward(mats, spaces, w_end, count):
    """x_count = w_end and x_i = A_i^{-1} x_{i+1}, projected onto the subspace."""
    out = [np.asarray(w_end, dtype=float)]
    x = out[0]
    for i in range(count - 1, -1, -1):
        y = symplectic_inverse(mats[i]) @ x
        B = spaces[i].basis
        x = B @ (B.T @ y)
        out.append(x)
    return np.array(out[::-1])


def _restricted_chain(mats, spaces, count):
    """k x k matrices of A_i between the orthonormal bases of E_i, E_{i+1}."""
    return np.array([spaces[i + 1].basis.T @ mats[i] @ spaces[i].basis for i in range(count)])


def _least_expanded_image(mats, spaces, count):
    """(v, images) for the unit vector of E_0 least expanded over `count`
    steps, with images obtained by pulling back the end point (stable for the
    most contracted direction)."""
    from .cocycle import product_svd

    M = _restricted_chain(mats, spaces, count)
    ps = product_svd(M)
    k = M.shape[1]
    v = spaces[0].basis @ ps.V[:, k - 1]
    sign = 1.0
    if np.any(canonical_sign(v) != v):
        sign = -1.0
    v = sign * v
    w_end = sign * np.exp(ps.log_sv[k - 1]) * (spaces[count].basis @ ps.U[:, k - 1])
    imgs = _projected_backward(mats, spaces, w_end, count)
    # the start of the backward chain reproduces v up to rounding
    imgs[0] = v
    return v, imgs, ps.log_sv


# --------------------------------------------------------- exponent correction


@dataclass
class Correction:
    b: np.ndarray
    gaps: np.ndarray  # b_{i+1} + a_i - b_i for every i
    C2: float
    ell: int
    delta1: float


def correct_exponent_sequence(a, ell, C1, delta1):
    """b_i = (1/ell) sum_{j<ell} (ell-1-j) a_{i+j}, with a padded by C1.

    Telescoping gives b_{i+1} + a_i - b_i = mean(a_i..a_{i+ell-1}), which
    exceeds delta1/ell whenever every length-ell window sum exceeds delta1.
    """
    a = np.asarray(a, dtype=float)
    ell = int(ell)
    m = a.size
    if ell < 1:
        raise ParameterError("ell must be >= 1")
    if np.any(np.abs(a) > C1 * (1 + 1e-12)):
        k = int(np.flatnonzero(np.abs(a) > C1 * (1 + 1e-12))[0])
        raise PreconditionError(f"|a_{k}| exceeds C1")
    pad = np.concatenate([a, np.full(ell, float(C1))])
    # windows running into the padding matter only when ell > m
    sums = np.convolve(pad, np.ones(ell), mode="valid")[:m]
    bad = np.flatnonzero(sums <= delta1)
    if bad.size:
        raise PreconditionError(f"window starting at {int(bad[0])} has sum {sums[bad[0]]:.6g} <= delta1")
    w = (ell - 1 - np.arange(ell)) / ell
    b = np.array([np.dot(w, pad[i:i + ell]) for i in range(m + 1)])
    gaps = b[1:] + a - b[:-1]
    C2 = float(ell * C1)
    return Correction(b, gaps, C2, ell, float(delta1))


# ----------------------------------------------------------------- witnesses


def _chart_norm(L):
    return float(max(np.linalg.norm(L, 2), np.linalg.norm(symplectic_inverse(L), 2)))


def build_type3_witness(segment, k, m0):
    """Charts L_0..L_{m0} along steps k..k+m0 that make the conjugated maps
    fix dp_1 and dq_1."""
    mats = segment.matrices[k:k + m0]
    Eu = segment.Eu[k:k + m0 + 1]
    Es = segment.Es[k:k + m0 + 1]
    P = window_products(mats, m0)[0]
    v = extremal_vector(P, Eu[0], "min")
    dp = dual_vector(v, Eu[0], Es[0])
    v_star = canonical_sign(dp.v_star)
    w = omega(v, v_star)
    if abs(w) < 1e-10:
        raise DegeneratePairingError("omega(v, v*) vanishes")
    ev = _projected_forward(mats, Eu, v, m0)
    fv = _projected_forward(mats, Es, v_star, m0) / w
    K1 = float(max(np.linalg.norm(ev, axis=1).max(), np.linalg.norm(fv, axis=1).max()))
    charts = []
    bound = 0.0
    for i in range(m0 + 1):
        sb = orthosymplectic_extend(np.stack([ev[i], fv[i]], axis=1), K1=K1)
        charts.append(sb.chart)
        bound = max(bound, sb.norm_bound)
    K3 = max(_chart_norm(L) for L in charts)
    return charts, {"K_III": K3, "K_III_bound": bound, "pairing": float(w),
                    "pairing_lower_bound": dp.lower_bound,
                    "v": v, "v_star": v_star}


def build_type4_witness(segment, tau_target=1.0, ell=None):
    """Charts over the whole segment conjugating the maps to
    diag(c, c, 1/c, 1/c) on the p1 p2 q1 q2 plane, then rebalanced by the
    exponent correction so every rate exceeds tau_target."""
    m = len(segment)
    N = segment.N
    if segment.p >= N:
        raise ClassificationFailure("type IV needs a non-trivial centre bundle (p < N)")
    mats = segment.matrices
    Eu, Ec, Es = segment.Eu, segment.Ec, segment.Es
    Pm = window_products(mats, m)[0]
    vu = extremal_vector(Pm, Eu[0], "min")
    vs = canonical_sign(dual_vector(vu, Eu[0], Es[0]).v_star)
    vcs, cs_imgs, _ = _least_expanded_image(mats, Ec, m)
    vcu = canonical_sign(dual_vector(vcs, Ec[0], Ec[0]).v_star)
    w1 = omega(vu, vs)
    w2 = omega(vcu, vcs)
    if min(abs(w1), abs(w2)) < 1e-10:
        raise DegeneratePairingError("degenerate pairing in type IV construction")
    u_imgs = _projected_forward(mats, Eu, vu, m)
    s_imgs = _projected_forward(mats, Es, vs, m)
    cu_imgs = _projected_forward(mats, Ec, vcu, m)
    nu = np.linalg.norm(u_imgs, axis=1)
    e1 = u_imgs / nu[:, None]
    f1 = s_imgs * (nu / w1)[:, None]
    e2 = cu_imgs / nu[:, None]
    f2 = cs_imgs * (nu / w2)[:, None]
    c = nu[1:] / nu[:-1]
    a = np.log(c)
    C1 = float(np.max(np.abs(a))) if a.size else 0.0
    ell = int(ell) if ell else 1
    trace = {"c": c}
    while True:
        sums = np.convolve(a, np.ones(ell), mode="valid") if ell <= m else np.array([a.sum()])
        min_sum = float(sums.min())
        if min_sum > 0 or ell >= m:
            break
        ell = min(2 * ell, m)
    trace["ell"] = ell
    trace["min_window_sum"] = min_sum
    if min_sum <= 0:
        raise ClassificationFailure("no window length gives positive expansion on E^u", trace)
    delta1 = min_sum * (1 - 1e-9)
    corr = correct_exponent_sequence(a, ell, C1, delta1)
    # a constant shift of b leaves every corrected rate unchanged; centring it
    # keeps D_i as close to the identity as possible
    b = corr.b - 0.5 * (corr.b.max() + corr.b.min())
    c_hat = np.exp(b[1:] - b[:-1]) * c
    trace["c_hat"] = c_hat
    if np.any(c_hat <= tau_target):
        k = int(np.argmin(c_hat))
        raise ClassificationFailure(f"corrected rate {c_hat[k]:.6g} at step {k} does not exceed {tau_target}", trace)
    K1 = float(max(np.linalg.norm(x, axis=1).max() for x in (e1, f1, e2, f2)))
    charts = []
    bound = 0.0
    for i in range(m + 1):
        fam = np.stack([e1[i], e2[i], f1[i], f2[i]], axis=1)
        sb = orthosymplectic_extend(fam, K1=K1, tol=1e-9)
        D = np.diag(np.concatenate([np.full(N, np.exp(b[i])), np.full(N, np.exp(-b[i]))]))
        charts.append(D @ sb.chart)
        bound = max(bound, float(sb.norm_bound * np.exp(abs(b[i]))))
    K4 = max(_chart_norm(L) for L in charts)
    consts = {"K_IV": K4, "K_IV_bound": bound, "tau": float(c_hat.min()), "ell": ell,
              "delta1": float(delta1), "C1": C1, "C2": corr.C2}
    return charts, c_hat, consts, trace


# ------------------------------------------------------------------ classify


def _type2_search(segment, m, K2):
    mats = segment.matrices
    for i in range(m):
        Bu = segment.Eu[i].basis
        Bcs = segment.Ecs(i).basis
        xs_u, xs_cs = [], []
        for j in range(i, m):
            Bu = mats[j] @ Bu
            Bcs = mats[j] @ Bcs
            xs_u.append(Bu)
            xs_cs.append(Bcs)
        su = np.linalg.svd(np.array(xs_u), compute_uv=False)[:, -1]
        scs = np.linalg.svd(np.array(xs_cs), compute_uv=False)[:, 0]
        r = scs / su
        hit = np.flatnonzero(r > K2)
        if hit.size:
            j = i + 1 + int(hit[0])
            return i, j, float(r[hit[0]])
    return None


def classify_segment(segment, th, m=None):
    if m is None:
        m = len(segment)
    m = int(m)
    if m < th.m0 or m > len(segment):
        raise NotApplicableError(f"need m0={th.m0} <= m={m} <= length {len(segment)}")
    nd = nondominance_holds(segment, m)
    if not nd.holds:
        raise NotApplicableError(f"segment is dominated at horizon {m} (ratio {nd.ratio:.4g})")
    # (I) small angle
    for i in range(m + 1):
        ang = subspace_angle(segment.Eu[i], segment.Ecs(i))
        if ang < th.alpha:
            return SegmentClass("I", (i,), {"alpha": th.alpha, "angle": ang})
    # (II) large ratio on some sub-window
    hit = _type2_search(segment, m, th.K2)
    if hit is not None:
        i, j, r = hit
        return SegmentClass("II", (i, j), {"K_II": th.K2, "ratio": r})
    # (III) E^s not contracted relative to E^u over m0 steps
    m0 = int(th.m0)
    mats = segment.matrices
    P = window_products(mats[:m], m0)
    for k in range(m - m0 + 1):
        s_s = np.linalg.svd(P[k] @ segment.Es[k].basis, compute_uv=False)[0]
        s_u = np.linalg.svd(P[k] @ segment.Eu[k].basis, compute_uv=False)[-1]
        ratio = s_s / s_u
        if ratio >= 0.5:
            charts, consts = build_type3_witness(segment, k, m0)
            consts = {"ratio": float(ratio), "m0": m0, **{k_: v for k_, v in consts.items()
                                                        if k_ not in ("v", "v_star")}}
            return SegmentClass("III", (k, k + m0), consts, charts)
    # (IV)
    if segment.p >= segment.N:
        raise ClassificationFailure("reached type IV with p = N, where it cannot occur")
    seg_m = segment.window(0, m) if m < len(segment) else segment
    charts, c_hat, consts, trace = build_type4_witness(seg_m, th.tau, th.ell or th.m0)
    return SegmentClass("IV", (0, m), consts, charts, c_hat, trace)


# -------------------------------------------------------------- verification


@dataclass
class WitnessReport:
    norm_excess: float
    placement: np.ndarray  # per chart
    normal_form: np.ndarray  # per step
    complement: np.ndarray  # per step
    max_residual: float
    worst_step: int


def verify_type_witness(cls, segment):
    if cls.tag not in ("III", "IV") or not cls.witnesses:
        raise PreconditionError("classification carries no witnesses")
    charts = cls.witnesses
    start = cls.location[0]
    N = segment.N
    d = 2 * N
    if cls.tag == "III":
        plane = [0, N]
        targets = [(0, segment.Eu), (N, segment.Es)]
        K = cls.constants["K_III"]
    else:
        plane = [0, 1, N, N + 1]
        targets = [(0, segment.Eu), (1, segment.Ec), (N, segment.Es), (N + 1, segment.Ec)]
        K = cls.constants["K_IV"]
    comp = [i for i in range(d) if i not in plane]
    inv = [symplectic_inverse(L) for L in charts]
    norm_excess = max(max(np.linalg.norm(L, 2), np.linalg.norm(Li, 2)) for L, Li in zip(charts, inv)) - K
    placement = np.zeros(len(charts))
    for i, Li in enumerate(inv):
        for col, spaces in targets:
            v = Li[:, col]
            placement[i] = max(placement[i], subspace_angle(Subspace(v), spaces[start + i]))
    steps = len(charts) - 1
    normal = np.zeros(steps)
    compl = np.zeros(steps)
    for i in range(steps):
        Ah = charts[i + 1] @ segment.matrices[start + i] @ inv[i]
        blk = Ah[np.ix_(plane, plane)]
        if cls.tag == "III":
            target = np.eye(2)
        else:
            ch = cls.rates[i]
            target = np.diag([ch, ch, 1 / ch, 1 / ch])
        normal[i] = np.max(np.abs(blk - target))
        if cls.tag == "IV" and cls.rates[i] <= 1.0:
            normal[i] = max(normal[i], 1.0 - cls.rates[i])
        if comp:
            compl[i] = max(np.max(np.abs(Ah[np.ix_(comp, plane)])), np.max(np.abs(Ah[np.ix_(plane, comp)])))
    per_step = np.maximum(normal, compl)
    per_step = np.maximum(per_step, np.maximum(placement[:-1], placement[1:]))
    mx = float(max(per_step.max() if steps else 0.0, placement.max(), max(norm_excess, 0.0)))
    return WitnessReport(float(norm_excess), placement, normal, compl, mx,
                         int(np.argmax(per_step)) if steps else 0)


# ------------------------------------------------------- segment generators

FAMILIES = ("angle_pinch", "rate_swap", "identity_plane", "conformal")


def bounded_symplectic(rng, N=2, max_norm=1.5):
    """expm(J0 S) with ||S|| <= log(max_norm), so ||C^{+-1}|| <= max_norm."""
    from scipy.linalg import expm

    from .symplin import standard_form_matrix

    S = rng.normal(size=(2 * N, 2 * N))
    S = 0.5 * (S + S.T)
    S *= np.log(max_norm) * rng.uniform(0.3, 1.0) / np.linalg.norm(S, 2)
    return expm(standard_form_matrix(N) @ S)


def _segment_from_steps(mats, Eu, Ec, Es):
    from .cocycle import _transport

    seg = Segment(np.array(mats), _transport(mats, Eu), _transport(mats, Ec), _transport(mats, Es), Eu.dim)
    from .cocycle import segment_residuals

    seg.residuals = segment_residuals(seg)
    return seg


def random_nondominated_segment(family, rng, m=12):
    """Random 4-dimensional test segments for the four families.

    Parameters keep each instance well inside its clause so that a bounded
    conjugation (||C^{+-1}|| <= 1.5) does not change the tag under the
    thresholds alpha=0.1, K2=1000, m0=4.
    """
    Eu = coordinate_subspace(2, ["p1"])
    Ec = coordinate_subspace(2, ["p2", "q2"])
    Es = coordinate_subspace(2, ["q1"])
    mats = []
    if family == "conformal":
        boost = rng.uniform(3.0, 10.0) ** (1.0 / m)
        for _ in range(m):
            c = rng.uniform(1.6, 2.4)
            cc = c * boost * rng.uniform(0.97, 1.03)
            mats.append(diag_pq([c, cc]))
    elif family == "rate_swap":
        for _ in range(m):
            c = rng.uniform(1.3, 2.0)
            mats.append(diag_pq([c, c * rng.uniform(2.8, 3.2)]))
    elif family == "identity_plane":
        eps = rng.uniform(0.15, 0.2)
        r = rng.uniform(1.0, 1.1)
        for _ in range(m):
            th = rng.uniform(-0.5, 0.5)
            rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
            A = np.zeros((4, 4))
            A[0, 0], A[2, 2] = np.exp(-eps), np.exp(eps)
            blk = rot @ np.diag([r, 1 / r])
            A[np.ix_([1, 3], [1, 3])] = blk
            mats.append(A)
    elif family == "angle_pinch":
        theta0 = rng.uniform(0.1 / 20, 0.1 / 6)
        t = 1.0 / np.tan(theta0)
        S = np.eye(4)
        S[2, 0] = t  # p1 -> p1 + t q1, a symplectic shear
        Si = symplectic_inverse(S)
        boost = rng.uniform(3.0, 10.0) ** (1.0 / m)
        for _ in range(m):
            c = rng.uniform(1.6, 2.4)
            mats.append(S @ diag_pq([c, c * boost]) @ Si)
        Eu = Subspace(S @ Eu.basis)
        Ec = Subspace(S @ Ec.basis)
        Es = Subspace(S @ Es.basis)
    else:
        raise ParameterError(f"unknown family {family!r}")
    return _segment_from_steps(mats, Eu, Ec, Es)


DEFAULT_TEST_THRESHOLDS = dict(alpha=0.1, K2=1000.0, m0=4)

"""Finite symplectic cocycles: generators, Lyapunov spectra, splittings."""
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidDimensionError, NoGapError, ParameterError
from .symplin import (
    Subspace,
    as_subspace,
    direct_sum,
    half_dim,
    omega_matrix,
    span_distance,
    symplectic_complement,
    symplectic_defect,
    symplectic_inverse,
)

CAT_MATRIX = np.array([[2.0, 1.0], [1.0, 1.0]])
SOURCE_TOL = 1e-9


# ---------------------------------------------------------------- generators


@dataclass
class OrbitSource:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0


def coupled_standard_step(x, K1, K2, b):
    """One step of two kicked rotors with a trigonometric coupling.

    p' = p + F(q),  q' = q + p'  with F = -grad V and
    V(q) = K1 cos q1 + K2 cos q2 + b cos(q1 - q2); all angles mod 2 pi.
    Returns the new point and the Jacobian [[I, S], [I, I + S]], S = DF(q).
    """
    p1, p2, q1, q2 = x
    c12 = np.cos(q1 - q2)
    S = np.array([[K1 * np.cos(q1) + b * c12, -b * c12],
                  [-b * c12, K2 * np.cos(q2) + b * c12]])
    F1 = K1 * np.sin(q1) + b * np.sin(q1 - q2)
    F2 = K2 * np.sin(q2) + b * np.sin(q2 - q1)
    np1, np2 = p1 + F1, p2 + F2
    nq1, nq2 = q1 + np1, q2 + np2
    two_pi = 2.0 * np.pi
    x_new = np.mod(np.array([np1, np2, nq1, nq2]), two_pi)
    I = np.eye(2)
    jac = np.block([[I, S], [I, I + S]])
    return x_new, jac


def generate_cocycle(source, n):
    n = int(n)
    if n < 1:
        raise ParameterError("n must be >= 1")
    kind = source.kind
    prm = source.params or {}
    if kind == "cat_map":
        return np.repeat(CAT_MATRIX[None], n, axis=0)
    if kind == "constant_matrix":
        A = np.asarray(prm["matrix"], dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ParameterError("constant_matrix needs a square matrix")
        half_dim(A.shape[0])
        if symplectic_defect(A) > SOURCE_TOL:
            raise ParameterError("constant_matrix is not symplectic")
        return np.repeat(A[None], n, axis=0)
    if kind == "coupled_standard_map":
        K = prm.get("K", (0.9, 0.9))
        b = float(prm.get("b", 0.05))
        rng = np.random.default_rng(source.seed)
        x = rng.uniform(0.0, 2.0 * np.pi, size=4)
        out = np.empty((n, 4, 4))
        for i in range(n):
            x, out[i] = coupled_standard_step(x, float(K[0]), float(K[1]), b)
        return out
    if kind == "file":
        from .cli import load_cocycle

        cf = load_cocycle(prm["path"])
        mats = cf.matrices
        if len(mats) < n:
            raise FormatError(f"file holds {len(mats)} matrices, {n} requested")
        return mats[:n].copy()
    raise ParameterError(f"unknown source kind {kind!r}")


# -------------------------------------------------------- products and spectra


def _as_stack(mats):
    M = np.asarray(mats, dtype=float)
    if M.ndim == 2:
        M = M[None]
    if M.ndim != 3 or M.shape[1] != M.shape[2]:
        raise InvalidDimensionError("expected a stack of square matrices")
    half_dim(M.shape[1])
    return M


def _qr_pos(Z):
    Q, R = np.linalg.qr(Z)
    sgn = np.sign(np.diag(R))
    sgn[sgn == 0] = 1.0
    return Q * sgn, np.abs(np.diag(R))


def qr_pass(mats, Q0, transpose=False):
    """Push the frame Q0 through the sequence (or its reversed transposes),
    re-orthonormalising at every step.  Returns the final frame and the
    accumulated log|diag R|."""
    Q = Q0
    logs = np.zeros(Q0.shape[1])
    seq = mats[::-1] if transpose else mats
    for A in seq:
        Q, d = _qr_pos((A.T if transpose else A) @ Q)
        logs += np.log(d)
    return Q, logs


@dataclass
class ProductSVD:
    log_sv: np.ndarray  # log singular values of the product, descending
    V: np.ndarray  # right singular frame at the start
    U: np.ndarray  # left singular frame at the end
    sweeps: int


def product_svd(mats, max_sweeps=12, tol=1e-13):
    """Singular data of A_{n-1}...A_0 without forming the product.

    Alternating forward QR passes over the sequence and backward passes over
    the transposed sequence is subspace iteration for P^T P; the frame at the
    start converges to the right singular vectors and the forward diagonal
    logs to log singular values.
    """
    mats = _as_stack(mats)
    d = mats.shape[1]
    Q0 = np.eye(d)
    prev = None
    for k in range(1, max_sweeps + 1):
        Qn, logs = qr_pass(mats, Q0)
        Q0, _ = qr_pass(mats, Qn, transpose=True)
        if prev is not None and np.max(np.abs(logs - prev)) <= tol * max(1.0, np.max(np.abs(logs))):
            break
        prev = logs
    Qn, logs = qr_pass(mats, Q0)
    order = np.argsort(-logs, kind="stable")
    return ProductSVD(logs[order], Q0[:, order], Qn[:, order], k)


@dataclass
class LyapSpectrum:
    exponents: np.ndarray
    horizon: int
    method: str

    @property
    def symmetry_defect(self):
        lam = self.exponents
        return float(np.max(np.abs(lam + lam[::-1])))


def _is_constant(mats):
    return bool(np.all(mats == mats[0]))


def finite_lyapunov_spectrum(mats, method="qr"):
    mats = _as_stack(mats)
    n = mats.shape[0]
    d = mats.shape[1]
    if method == "qr":
        # start from the frame left by one backward pass so the arbitrary
        # initial frame does not bias the finite-time average
        Q0, _ = qr_pass(mats, np.eye(d), transpose=True)
        _, logs = qr_pass(mats, Q0)
        lam = logs / n
    elif method == "svd":
        lam = product_svd(mats).log_sv / n
    elif method == "exact-eigen":
        if not _is_constant(mats):
            raise ParameterError("exact-eigen needs a constant sequence")
        lam = np.log(np.abs(np.linalg.eigvals(mats[0])))
        lam = np.sort(lam)[::-1]
        lam = 0.5 * (lam - lam[::-1])
    else:
        raise ParameterError(f"unknown method {method!r}")
    return LyapSpectrum(np.sort(lam)[::-1], n, method)


# ------------------------------------------------------------------ splittings


@dataclass
class SplitSeq:
    matrices: np.ndarray
    E1: list
    E2: list

    @property
    def index(self):
        return self.E1[0].dim

    def __len__(self):
        return self.matrices.shape[0]


@dataclass
class Segment:
    matrices: np.ndarray
    Eu: list
    Ec: list
    Es: list
    p: int
    residuals: dict = field(default_factory=dict)

    def __len__(self):
        return self.matrices.shape[0]

    @property
    def N(self):
        return self.matrices.shape[1] // 2

    def Ecs(self, i):
        return direct_sum(self.Ec[i], self.Es[i]) if self.Ec[i].dim else self.Es[i]

    def Euc(self, i):
        return direct_sum(self.Eu[i], self.Ec[i]) if self.Ec[i].dim else self.Eu[i]

    def split_seq(self, which="u|cs"):
        n = len(self)
        if which == "u|cs":
            return SplitSeq(self.matrices, list(self.Eu), [self.Ecs(i) for i in range(n + 1)])
        if which == "uc|s":
            return SplitSeq(self.matrices, [self.Euc(i) for i in range(n + 1)], list(self.Es))
        raise ParameterError(which)

    def conjugate(self, C):
        """Segment for the cocycle C A_i C^{-1} with bundles C E."""
        C = np.asarray(C, dtype=float)
        Ci = symplectic_inverse(C)
        mats = np.einsum("ij,njk,kl->nil", C, self.matrices, Ci)

        def push(L):
            return [Subspace(C @ E.basis) if E.dim else E for E in L]

        seg = Segment(mats, push(self.Eu), push(self.Ec), push(self.Es), self.p)
        seg.residuals = segment_residuals(seg)
        return seg

    def window(self, i, j):
        seg = Segment(self.matrices[i:j], self.Eu[i:j + 1], self.Ec[i:j + 1], self.Es[i:j + 1], self.p)
        seg.residuals = dict(self.residuals)
        return seg


def empty_subspace(d):
    return Subspace(np.zeros((d, 0)), orthonormal=True)


def _transport(mats, E0):
    """E_i = A_{i-1}...A_0 E_0, re-orthonormalised at every step."""
    out = [as_subspace(E0)]
    B = out[0].basis
    for A in mats:
        B, _ = _qr_pos(A @ B)
        out.append(Subspace(B, orthonormal=True))
    return out


def _pull_back(mats, En):
    """E_i = A_i^{-1}...A_{n-1}^{-1} E_n."""
    out = [as_subspace(En)]
    B = out[0].basis
    for A in mats[::-1]:
        B, _ = _qr_pos(symplectic_inverse(A) @ B)
        out.append(Subspace(B, orthonormal=True))
    return out[::-1]


def center_from(Eu, Es):
    d = Eu.ambient
    if Eu.dim + Es.dim >= d:
        return empty_subspace(d)
    return symplectic_complement(direct_sum(Eu, Es))


def segment_from_constant(A, n, Eu, Ec, Es):
    A = np.asarray(A, dtype=float)
    mats = np.repeat(A[None], n, axis=0)
    Eu, Es = as_subspace(Eu), as_subspace(Es)
    Ec = as_subspace(Ec) if Ec is not None and np.size(Ec) else empty_subspace(A.shape[0])
    seg = Segment(mats, _transport(mats, Eu), _transport(mats, Ec) if Ec.dim else [Ec] * (n + 1),
                  _transport(mats, Es), Eu.dim)
    seg.residuals = segment_residuals(seg)
    return seg


def oseledets_splitting(mats, p, gap_tol=1e-6):
    """E^u from the top-p right singular directions of the forward product,
    E^s from the top-p right singular directions of the backward product
    (the p most contracted output directions), each transported along the
    cocycle so invariance is exact up to rounding; E^c = (E^u + E^s)^omega."""
    mats = _as_stack(mats)
    n, d = mats.shape[0], mats.shape[1]
    N = d // 2
    if not 1 <= p <= N:
        raise InvalidDimensionError(f"index p must lie in [1, {N}]")
    psvd = product_svd(mats)
    lam = psvd.log_sv / n
    gap = lam[p - 1] - lam[p]
    if gap <= gap_tol:
        raise NoGapError(f"exponent gap {gap:.3e} at index {p} is below {gap_tol}")
    Eu = _transport(mats, Subspace(psvd.V[:, :p], orthonormal=True))
    Es = _pull_back(mats, Subspace(psvd.U[:, d - p:], orthonormal=True))
    Ec = [center_from(Eu[i], Es[i]) for i in range(n + 1)]
    seg = Segment(mats, Eu, Ec, Es, p)
    seg.residuals = segment_residuals(seg)
    seg.residuals["gap"] = float(gap)
    return seg


def _omega_block(E, F):
    if E.dim == 0 or F.dim == 0:
        return 0.0
    return float(np.max(np.abs(omega_matrix(E.basis, F.basis))))


def segment_residuals(seg, stride=1):
    inv = 0.0
    orth = 0.0
    n = len(seg)
    for i in range(0, n + 1, stride):
        Eu, Ec, Es = seg.Eu[i], seg.Ec[i], seg.Es[i]
        orth = max(orth, _omega_block(Eu, Eu), _omega_block(Eu, Ec),
                   _omega_block(Ec, Eu), _omega_block(Ec, Es), _omega_block(Es, Es))
        if i < n:
            A = seg.matrices[i]
            for L in (seg.Eu, seg.Ec, seg.Es):
                if L[i].dim:
                    inv = max(inv, span_distance(Subspace(A @ L[i].basis), L[i + 1]))
    return {"invariance": inv, "omega_orthogonality": orth}


def zipped_splitting(spectrum, seg, zero_tol=None):
    """(E+, E0, E-) at the start of the segment.

    The exponents are symmetrised pairwise so that dim E+ == dim E- and
    dim E0 is even regardless of finite-time asymmetry.
    """
    lam = np.asarray(spectrum.exponents)
    d = lam.size
    if zero_tol is None:
        zero_tol = 10.0 / spectrum.horizon
    sym = 0.5 * (lam - lam[::-1])
    k = int(np.sum(sym[: d // 2] > zero_tol))
    if k == 0:
        return empty_subspace(d), Subspace(np.eye(d), orthonormal=True), empty_subspace(d)
    if k == seg.p:
        Ep, Em = seg.Eu[0], seg.Es[0]
    else:
        sub = oseledets_splitting(seg.matrices, k, gap_tol=0.0)
        Ep, Em = sub.Eu[0], sub.Es[0]
    E0 = center_from(Ep, Em)
    assert Ep.dim == Em.dim and E0.dim % 2 == 0
    return Ep, E0, Em


@dataclass
class WedgeRates:
    Lambda_prev: float
    Lambda_p: float
    Lambda_next: float
    Phi: float


def lambda_p_and_phi(mats, p, n=None):
    mats = _as_stack(mats)
    if n is None:
        n = mats.shape[0]
    d = mats.shape[1]
    if not 1 <= p <= d // 2:
        raise InvalidDimensionError("p must lie in [1, N]")
    log_sv = product_svd(mats[:n]).log_sv
    Lam = np.concatenate([[0.0], np.cumsum(log_sv)]) / n
    return WedgeRates(float(Lam[p - 1]), float(Lam[p]), float(Lam[p + 1]),
                      float(0.5 * (Lam[p - 1] + Lam[p + 1])))


@dataclass
class InvarianceReport:
    per_step: np.ndarray
    max_residual: float
    worst_step: int
    passed: bool


def check_split_invariance(seq, tol=1e-8):
    n = len(seq)
    if len(seq.E1) != n + 1 or len(seq.E2) != n + 1:
        raise InvalidDimensionError("splittings must be given at steps 0..n")
    res = np.zeros(n)
    for i in range(n):
        A = seq.matrices[i]
        for L in (seq.E1, seq.E2):
            if L[i].dim != L[i + 1].dim:
                raise InvalidDimensionError(f"bundle dimension changes at step {i}")
            if L[i].dim:
                res[i] = max(res[i], span_distance(Subspace(A @ L[i].basis), L[i + 1]))
    k = int(np.argmax(res)) if n else 0
    mx = float(res.max()) if n else 0.0
    return InvarianceReport(res, mx, k, mx <= tol)


def embed_blocks(*blocks):
    """Direct sum of symplectic blocks, each given in its own (p, q) order."""
    Ns = [half_dim(np.asarray(B).shape[0]) for B in blocks]
    N = sum(Ns)
    A = np.zeros((2 * N, 2 * N))
    off = 0
    for B, k in zip(blocks, Ns):
        B = np.asarray(B, dtype=float)
        idx = np.r_[off:off + k, N + off:N + off + k]
        A[np.ix_(idx, idx)] = B
        off += k
    return A


def diag_pq(p_scales, q_scales=None):
    p_scales = np.asarray(p_scales, dtype=float)
    q_scales = 1.0 / p_scales if q_scales is None else np.asarray(q_scales, dtype=float)
    return np.diag(np.concatenate([p_scales, q_scales]))

"""Random walks on R/piZ with an absorbing window around pi/2, the horizon m1,
and the type-IV cascade in R^4 that realises the walk with kicked boxes.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import jit_enabled, numba_jit
from .errors import MemoryGuardError, ParameterError
from .kick import KICK_DEFAULT_DELTA, make_kick_hamiltonian, nu_quadrature
from .symplin import circle_distance

HALF_PI = 0.5 * np.pi

# SplitMix64 constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53

POINT_MASS, UNIFORM, SAMPLES = 0, 1, 2


# ------------------------------------------------------------------- streams


@numba_jit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@numba_jit
def _seed_states(seed, lo, hi):
    out = np.empty(hi - lo, dtype=np.uint64)
    for i in range(lo, hi):
        out[i - lo] = _mix64(seed + _GOLDEN * np.uint64(i + 1))
    return out


def _seed_states_np(seed, lo, hi):
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + _GOLDEN * (np.arange(lo, hi, dtype=np.uint64) + np.uint64(1))
        return _mix_np(z)


def _mix_np(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


# --------------------------------------------------------------- step source


@dataclass
class StepSource:
    """Law of the i.i.d. steps: a point mass, uniform(-r, r), or the
    empirical law of an array of samples (drawn uniformly by index)."""
    kind: int
    value: float = 0.0
    samples: np.ndarray = None

    @classmethod
    def point_mass(cls, theta0):
        return cls(POINT_MASS, float(theta0))

    @classmethod
    def uniform(cls, r):
        if r < 0:
            raise ParameterError("uniform radius must be >= 0")
        return cls(UNIFORM, float(r))

    @classmethod
    def from_samples(cls, X):
        X = np.ascontiguousarray(np.asarray(X, dtype=float).ravel())
        if X.size == 0:
            raise ParameterError("empty sample array")
        return cls(SAMPLES, 0.0, X)

    def _arrays(self):
        s = self.samples if self.samples is not None else np.zeros(1)
        return int(self.kind), float(self.value), s

    def describe(self):
        if self.kind == POINT_MASS:
            return {"dist": "point_mass", "theta0": self.value}
        if self.kind == UNIFORM:
            return {"dist": "uniform", "radius": self.value}
        return {"dist": "samples", "count": int(self.samples.size),
                "mean": float(self.samples.mean()), "variance": float(self.samples.var())}


@dataclass
class WalkConfig:
    step_source: StepSource
    alpha: float
    kappa: float
    m_max: int = 4096
    paths: int = 100_000
    seed: int = 0
    m_cap: int = 1 << 22

    def __post_init__(self):
        if self.paths < 1:
            raise ParameterError("paths must be >= 1")
        if not 0 < self.alpha < HALF_PI:
            raise ParameterError("alpha must lie in (0, pi/2)")
        if not 0 < self.kappa <= 1:
            raise ParameterError("kappa must lie in (0, 1]")
        if self.m_max < 1:
            raise ParameterError("m_max must be >= 1")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


@dataclass
class WalkResult:
    failure_prob: np.ndarray  # index m = 0..m_max
    stderr: np.ndarray
    m1: int
    absorbed_at: np.ndarray  # -1 for paths still outside the window at m_max
    m_max: int
    paths: int
    diagnostic: str = ""

    def ci_halfwidth(self, z=1.96):
        return z * self.stderr


# ---------------------------------------------------------------- kernels


# The kernels carry y = S - pi/2 as a representative in [-pi/2, pi/2), so
# the absorption test is |y| <= alpha/20 and wrapping is one add.


@numba_jit
def _walk_kernel(kind, value, samples, half_width, Y, state, T, m_start, m_end):
    ns = samples.shape[0]
    for i in range(Y.shape[0]):
        if T[i] >= 0:
            continue
        y = Y[i]
        z = state[i]
        for n in range(m_start + 1, m_end + 1):
            if kind == POINT_MASS:
                x = value
            else:
                z = z + _GOLDEN
                u = float(_mix64(z) >> _S11) * _TO_UNIT
                if kind == UNIFORM:
                    x = value * (2.0 * u - 1.0)
                else:
                    x = samples[min(int(u * ns), ns - 1)]
            y += x
            if y >= HALF_PI:
                y -= np.pi
            elif y < -HALF_PI:
                y += np.pi
            if abs(y) <= half_width:
                T[i] = n
                break
        Y[i] = y
        state[i] = z


def _walk_numpy(kind, value, samples, half_width, Y, state, T, m_start, m_end):
    ns = samples.shape[0]
    live = np.flatnonzero(T < 0)
    y = Y[live]
    z = state[live]
    for n in range(m_start + 1, m_end + 1):
        if live.size == 0:
            break
        if kind == POINT_MASS:
            x = value
        else:
            with np.errstate(over="ignore"):
                z = z + _GOLDEN
            u = (_mix_np(z) >> _S11).astype(float) * _TO_UNIT
            if kind == UNIFORM:
                x = value * (2.0 * u - 1.0)
            else:
                x = samples[np.minimum((u * ns).astype(np.int64), ns - 1)]
        y = y + x
        y = np.where(y >= HALF_PI, y - np.pi, np.where(y < -HALF_PI, y + np.pi, y))
        hit = np.abs(y) <= half_width
        if hit.any():
            T[live[hit]] = n
            Y[live[hit]] = y[hit]
            state[live[hit]] = z[hit]
            keep = ~hit
            live, y, z = live[keep], y[keep], z[keep]
    Y[live] = y
    state[live] = z


class _Walker:
    """Resumable batch of paths; extending the horizon continues each path."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.Y = np.full(cfg.paths, -HALF_PI)
        seeds = _seed_states if jit_enabled() else _seed_states_np
        self.state = seeds(np.uint64(cfg.seed), 0, cfg.paths)
        self.T = np.full(cfg.paths, -1, dtype=np.int64)
        self.m = 0

    def advance(self, m_end):
        kind, value, samples = self.cfg.step_source._arrays()
        fn = _walk_kernel if jit_enabled() else _walk_numpy
        fn(kind, value, samples, self.cfg.alpha / 20.0, self.Y, self.state, self.T, self.m, int(m_end))
        self.m = int(m_end)

    def result(self, diagnostic=""):
        cfg = self.cfg
        absorbed = self.T[self.T >= 0]
        counts = np.bincount(absorbed, minlength=self.m + 1)[: self.m + 1]
        still_out = cfg.paths - np.cumsum(counts)
        p = still_out / cfg.paths
        if np.any(np.diff(p) > 0):
            raise AssertionError("failure probability increased with m")
        se = np.sqrt(p * (1.0 - p) / cfg.paths)
        ok = np.flatnonzero((p + 2.0 * se < cfg.kappa / 20.0) & (np.arange(p.size) >= 1))
        m1 = int(ok[0]) if ok.size else None
        return WalkResult(p, se, m1, self.T.copy(), self.m, cfg.paths, diagnostic)


def simulate_walk(cfg):
    """Paths of S_n mod pi stopped at the first n >= 1 with
    |S_n - pi/2| <= alpha/20; failure_prob(m) = fraction still outside."""
    w = _Walker(cfg)
    w.advance(cfg.m_max)
    return w.result()


def find_m1(cfg):
    """simulate_walk with the horizon doubled (paths resumed) until m1 is
    found or m_cap is reached."""
    w = _Walker(cfg)
    m = cfg.m_max
    while True:
        w.advance(m)
        res = w.result()
        if res.m1 is not None:
            return res
        if m >= cfg.m_cap:
            res.diagnostic = f"no m1 up to m_cap={cfg.m_cap}; failure_prob(m_cap)={res.failure_prob[-1]:.4g}"
            return res
        m = min(2 * m, cfg.m_cap)


def write_walk_csv(res, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["m", "failure_prob", "stderr"])
        for m, (p, s) in enumerate(zip(res.failure_prob, res.stderr)):
            wr.writerow([m, repr(float(p)), repr(float(s))])


# ------------------------------------------------------------------ cascade


def _normalize(V):
    return V / np.linalg.norm(V, axis=-1, keepdims=True)


def _theta(V):
    return np.mod(np.arctan2(V[..., 1], V[..., 0]), np.pi)


def shear_charts(U):
    """Batched L_u and L_u^{-1} for rows u in the cone |q| < |p|.

    L_u = R_theta M(a, b) with R_{-theta} u / |u_p| = (1, 0, a, b), so L_u
    sends dp1 to u / |u_p| and adds Theta(u) to the angle of every vector.
    """
    U = np.atleast_2d(U)
    U = U / np.hypot(U[:, 0], U[:, 1])[:, None]
    th = np.arctan2(U[:, 1], U[:, 0])
    c, s = np.cos(th), np.sin(th)
    a = c * U[:, 2] + s * U[:, 3]
    b = -s * U[:, 2] + c * U[:, 3]
    n = U.shape[0]
    R = np.zeros((n, 4, 4))
    R[:, 0, 0] = R[:, 1, 1] = R[:, 2, 2] = R[:, 3, 3] = c
    R[:, 0, 1] = R[:, 2, 3] = -s
    R[:, 1, 0] = R[:, 3, 2] = s
    M = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
    M[:, 2, 0], M[:, 2, 1], M[:, 3, 0] = a, b, b
    Minv = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
    Minv[:, 2, 0], Minv[:, 2, 1], Minv[:, 3, 0] = -a, -b, -b
    Rt = np.transpose(R, (0, 2, 1))
    return R @ M, Minv @ Rt


def conformal_block(c):
    return np.diag([c, c, 1.0 / c, 1.0 / c])


def _cone_sample(n, rng, beta=1.0):
    """Unit vectors with |q| < beta |p|."""
    P = rng.normal(size=(n, 2))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    Q = rng.normal(size=(n, 2))
    Q /= np.linalg.norm(Q, axis=1, keepdims=True)
    Q *= (beta * rng.uniform(size=(n, 1)) ** 0.5)
    return _normalize(np.concatenate([P, Q], axis=1))


def measure_K(tangents, rates, n_samples=4000, seed=0):
    """Sampled Lipschitz constants on unit vectors of the cone C_1.

    K_theta: |Theta(v) - Theta(w)| <= K |v - w|; its exact value is sqrt 2
    (|grad Theta| = 1/|p| on the unit sphere).  K_norm: the spherical
    derivative of v -> N(Dg v) for Dg = B_c L_u Dh L_u^{-1} with u, Dh, c
    drawn from the cascade's ingredients.  Returns max of both and 1.
    """
    rng = np.random.default_rng(seed)
    nodes = rng.integers(0, tangents.shape[0], n_samples)
    U = _cone_sample(n_samples, rng)
    L, Linv = shear_charts(U)
    cs = np.asarray(rates, dtype=float)
    Bc = np.stack([conformal_block(c) for c in np.unique(cs)])
    B = Bc[rng.integers(0, Bc.shape[0], n_samples)]
    M = B @ L @ tangents[nodes] @ Linv
    V = _cone_sample(n_samples, rng)
    MV = np.einsum("nij,nj->ni", M, V)
    nv = np.linalg.norm(MV, axis=1)
    Nn = MV / nv[:, None]
    P_out = np.eye(4) - Nn[:, :, None] * Nn[:, None, :]
    P_in = np.eye(4) - V[:, :, None] * V[:, None, :]
    Jac = P_out @ M @ P_in / nv[:, None, None]
    k_norm = float(np.linalg.norm(Jac, 2, axis=(1, 2)).max())
    pnorm = np.hypot(V[:, 0], V[:, 1])
    k_theta = float(max(np.sqrt(2.0), (1.0 / pnorm).max()))
    return max(k_theta, k_norm, 1.0 + 1e-12), k_theta, k_norm


def eta_bound(alpha, kappa, K, m):
    return min(alpha / (100.0 * K * K * m), kappa / (20.0 * m))


@dataclass
class CascadeConfig:
    rates: list = None  # c_i per level; default all 2
    delta: float = KICK_DEFAULT_DELTA
    alpha: float = 1.5
    kappa: float = 0.5
    depth: int = None  # default: m1 of the walk driven by the measured angle law
    grid: int = 12
    eta: float = None
    seed: int = 0
    tau: float = 1.5
    walk_paths: int = 20_000
    lattice_factor: float = 10.0  # bin width <= alpha / (lattice_factor * depth)
    max_bins: int = 1 << 23

    def __post_init__(self):
        if self.grid < 2:
            raise ParameterError("grid must be >= 2")
        if not 0 < self.alpha < HALF_PI:
            raise ParameterError("alpha must lie in (0, pi/2)")
        if not 0 < self.kappa < 1:
            raise ParameterError("kappa must lie in (0, 1)")
        if self.delta < 0:
            raise ParameterError("delta must be >= 0")
        if self.tau <= 1:
            raise ParameterError("tau must exceed 1")
        if self.depth is not None and self.depth < 1:
            raise ParameterError("depth must be >= 1")
        if self.rates is not None and min(self.rates) <= self.tau:
            raise ParameterError("every rate c_i must exceed tau")


@dataclass
class CascadeResult:
    config: CascadeConfig
    depth: int
    m1: int
    K: float
    K_theta: float
    K_norm: float
    eta: float
    rates: np.ndarray
    nodes: np.ndarray  # quadrature points omega_j of the kick cube
    tangents: np.ndarray  # Dh(omega_j)
    node_angles: np.ndarray  # X_j = Theta(Dh(omega_j) dp1)
    node_shift: np.ndarray  # X_j rounded to lattice steps
    bin_width: float
    arrived_fraction: float
    not_arrived: float
    measure_loss: float
    theta_histogram: np.ndarray  # arrived mass per lattice bin (final Theta)
    live_histogram: np.ndarray  # not-yet mass per lattice bin
    trace: dict = field(default_factory=dict)
    kick_params: dict = field(default_factory=dict)

    @property
    def bins(self):
        return self.theta_histogram.size

    def bin_centers(self):
        return np.arange(self.bins) * self.bin_width


def _kick_nodes(cfg):
    if cfg.delta == 0:
        g = (np.arange(cfg.grid) + 0.5) / cfg.grid * 2.0 - 1.0
        G = np.stack(np.meshgrid(*([g] * 4), indexing="ij"), axis=-1).reshape(-1, 4)
        D = np.broadcast_to(np.eye(4), (G.shape[0], 4, 4)).copy()
        return G, D, np.zeros(G.shape[0]), {"eps": 0.0}
    H = make_kick_hamiltonian(cfg.delta, cfg.alpha, seed=cfg.seed)
    G, D, X = nu_quadrature(H, cfg.grid)
    return G, D, X, dict(H.params)


def cascade_run(cfg):
    """Level-by-level cascade on a Theta-lattice.

    Every not-yet box is split into grid^4 cells of the kick cube, cell j
    moving the tracked direction by X_j; boxes whose lattice direction is
    within alpha/10 of pi/2 are frozen (the unperturbed B_n keeps Theta).
    """
    G, D, X, kparams = _kick_nodes(cfg)
    m1 = None
    depth = cfg.depth
    if depth is None:
        src = StepSource.from_samples(X) if cfg.delta > 0 else StepSource.point_mass(0.0)
        wres = find_m1(WalkConfig(src, cfg.alpha, cfg.kappa, m_max=1024, paths=cfg.walk_paths,
                                  seed=cfg.seed, m_cap=1 << 17))
        if wres.m1 is None:
            raise ParameterError("the walk has no finite horizon m1; pass depth explicitly")
        m1 = depth = wres.m1
    rates = np.full(depth, 2.0) if cfg.rates is None else np.asarray(cfg.rates, dtype=float)
    if rates.size != depth:
        if rates.size == 1:
            rates = np.full(depth, rates[0])
        else:
            raise ParameterError("rates must have one entry per level")
    if rates.min() <= cfg.tau:
        raise ParameterError("every rate c_i must exceed tau")
    K, k_theta, k_norm = measure_K(D, rates, seed=cfg.seed)
    bound = eta_bound(cfg.alpha, cfg.kappa, K, depth)
    eta = bound if cfg.eta is None else float(cfg.eta)
    if eta > bound * (1 + 1e-12):
        raise ParameterError(f"eta must not exceed {bound:.6g}")

    nb = 1 << int(math.ceil(math.log2(cfg.lattice_factor * depth * np.pi / cfg.alpha)))
    if nb > cfg.max_bins:
        raise MemoryGuardError(f"lattice needs {nb} bins; use a smaller depth")
    w = np.pi / nb
    shift = np.rint(X / w).astype(np.int64)
    kern = np.bincount(np.mod(shift, nb), minlength=nb) / X.size
    khat = np.fft.rfft(kern)
    centers = np.arange(nb) * w
    window = circle_distance(centers, HALF_PI) < cfg.alpha / 10.0

    live = np.zeros(nb)
    live[0] = 1.0
    arrived = np.zeros(nb)
    tr_live = np.empty(depth)
    tr_arr = np.empty(depth)
    trivial = not np.any(shift)
    for n in range(depth):
        if not trivial:
            live = np.fft.irfft(np.fft.rfft(live) * khat, n=nb)
        arrived[window] += live[window]
        live[window] = 0.0
        tr_live[n] = live.sum()
        tr_arr[n] = arrived.sum()
    a, b = float(arrived.sum()), float(live.sum())
    trace = {"level": np.arange(1, depth + 1), "not_yet": tr_live, "arrived": tr_arr,
             "loss": np.zeros(depth)}
    return CascadeResult(cfg, depth, m1, K, k_theta, k_norm, eta, rates, G, D, X, shift, w,
                         a, b, 0.0, arrived, live, trace, kparams)


def write_cascade_csv(res, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["level", "not_yet", "arrived", "loss"])
        t = res.trace
        for i in range(res.depth):
            wr.writerow([int(t["level"][i]), repr(float(t["not_yet"][i])),
                         repr(float(t["arrived"][i])), repr(float(t["loss"][i]))])


@dataclass
class CascadeReport:
    itineraries: int
    arrived_itineraries: int
    max_recurrence_residual: float
    recurrence_envelope: float  # 2 K^2 eta
    max_arrived_increment: float
    arrived_envelope: float  # K eta
    measure_identity_residual: float
    max_lattice_residual: float
    lattice_envelope: float  # depth * bin_width / 2
    max_final_deviation: float  # |Theta - pi/2| on arrived itineraries
    cone_violations: int
    conservation_residual: float
    measure_loss: float
    loss_budget: float  # depth * eta

    @property
    def passed(self):
        return (self.max_recurrence_residual <= self.recurrence_envelope
                and self.max_arrived_increment <= self.arrived_envelope
                and self.measure_identity_residual <= 1e-9
                and self.max_lattice_residual <= self.lattice_envelope
                and self.max_final_deviation < self.config_half_alpha
                and self.cone_violations == 0
                and self.conservation_residual <= 1e-9
                and self.measure_loss <= self.loss_budget)

    config_half_alpha: float = 0.0


def cascade_verify(res, n_itineraries=1000, seed=0):
    """Follow sampled itineraries with real tangent vectors.

    Each itinerary draws its cell per level with probability equal to the
    cell's share of the box, as the measure does.  At each level the tracked
    vector u of the box centre is pushed by Dg = B_n L_u Dh(omega) L_u^{-1}
    (not-yet) or B_n (arrived); the recurrence is checked on vectors v, v'
    within eta of u.
    """
    rng = np.random.default_rng(seed)
    cfg = res.config
    nb, w, eta, K = res.bins, res.bin_width, res.eta, res.K
    ncell = res.node_angles.size
    n = int(n_itineraries)
    u = np.zeros((n, 4))
    u[:, 0] = 1.0
    b = np.zeros(n, dtype=np.int64)
    arrived = np.zeros(n, dtype=bool)
    log_ratio = np.zeros(n)
    log_volume = np.zeros(n)
    cell_log_fraction = 4.0 * np.log((2.0 / cfg.grid) / 2.0)
    rec = arr_inc = lat = 0.0
    cone_bad = 0

    def near(V):
        Z = rng.normal(size=V.shape)
        Z *= (eta * rng.uniform(size=(V.shape[0], 1)) ** 0.25) / np.linalg.norm(Z, axis=1, keepdims=True)
        return _normalize(V + Z)

    for lvl in range(res.depth):
        B = conformal_block(res.rates[lvl])
        idx = np.flatnonzero(~arrived)
        jdx = np.flatnonzero(arrived)
        if idx.size:
            j = rng.integers(0, ncell, idx.size)
            L, Linv = shear_charts(u[idx])
            M = B @ L @ res.tangents[j] @ Linv
            uu = u[idx]
            v, v2 = near(uu), near(uu)
            Mv = np.einsum("nij,nj->ni", M, v)
            r = circle_distance(_theta(Mv), _theta(v2) + res.node_angles[j])
            rec = max(rec, float(np.max(r)))
            u[idx] = _normalize(np.einsum("nij,nj->ni", M, uu))
            b[idx] = np.mod(b[idx] + res.node_shift[j], nb)
            log_ratio[idx] += -np.log(ncell)
            log_volume[idx] += cell_log_fraction + np.log(np.abs(np.linalg.det(M)))
        if jdx.size:
            v, v2 = near(u[jdx]), near(u[jdx])
            r = circle_distance(_theta(v @ B.T), _theta(v2))
            arr_inc = max(arr_inc, float(np.max(r)))
            u[jdx] = _normalize(u[jdx] @ B.T)
            log_volume[jdx] += np.log(abs(np.linalg.det(B)))
        cone_bad += int(np.sum(np.hypot(u[:, 2], u[:, 3]) >= np.hypot(u[:, 0], u[:, 1])))
        lat = max(lat, float(np.max(circle_distance(_theta(u), b * w))))
        arrived |= circle_distance(b * w, HALF_PI) < cfg.alpha / 10.0

    final_dev = float(np.max(circle_distance(_theta(u[arrived]), HALF_PI))) if arrived.any() else 0.0
    total = res.arrived_fraction + res.not_arrived + res.measure_loss
    return CascadeReport(
        itineraries=n,
        arrived_itineraries=int(arrived.sum()),
        max_recurrence_residual=rec,
        recurrence_envelope=2.0 * K * K * eta,
        max_arrived_increment=arr_inc,
        arrived_envelope=K * eta,
        measure_identity_residual=float(np.max(np.abs(log_ratio - log_volume))),
        max_lattice_residual=lat,
        lattice_envelope=res.depth * w / 2.0 + 1e-9,
        max_final_deviation=final_dev,
        cone_violations=cone_bad,
        conservation_residual=abs(total - 1.0),
        measure_loss=res.measure_loss,
        loss_budget=res.depth * eta,
        config_half_alpha=cfg.alpha / 2.0,
    )


@dataclass
class NormDropReport:
    horizon: int
    unperturbed_rate: float
    perturbed_rate: float
    gap: float
    over: str  # "arrived" or "all" when nothing arrived
    p1_share: float  # mean cos^2 Theta of the tracked direction
    p2_share: float


def norm_drop_report(res, n=20):
    """Forward rate of the tracked direction for n steps after the cascade.

    After the segment the cocycle continues as diag(c, 1, 1/c, 1): dp1
    keeps expanding at log c while dp2 is neutral.  A direction at angle
    Theta grows at (1/n) log sqrt(c^{2n} cos^2 + sin^2), strictly below log c
    unless Theta = 0.
    """
    if n < 1:
        raise ParameterError("horizon must be >= 1")
    c = float(res.rates[-1])
    mass = res.theta_histogram
    over = "arrived"
    if mass.sum() <= 0:
        mass = res.live_histogram + res.theta_histogram
        over = "all"
    wts = mass / mass.sum()
    th = res.bin_centers()
    cos2, sin2 = np.cos(th) ** 2, np.sin(th) ** 2
    # log sqrt(c^{2n} cos^2 + sin^2) / n, written to avoid overflow
    rate = np.log(c) + np.log(cos2 + sin2 * c ** (-2.0 * n)) / (2.0 * n)
    pr = float(np.sum(wts * rate))
    return NormDropReport(n, np.log(c), pr, np.log(c) - pr, over,
                          float(np.sum(wts * cos2)), float(np.sum(wts * sin2)))

"""Command-line front end and the JSON cocycle file format.

Cocycle files: {"dim": 2N, "matrices": [[row-major floats], ...],
"splittings": {"Eu": [[vector, ...] per step], ...}, "metadata": {...}}.
Floats are written with 17 significant digits so files round-trip exactly.
"""
import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import FormatError, ParameterError, ValidationError
from .symplin import Subspace, is_symplectic

COMMANDS = ("gen", "exponents", "dominate", "classify", "kickflow", "walk", "cascade")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_USAGE = 0, 2, 3, 64
SYMPLECTIC_LOAD_TOL = 1e-8
SPLIT_LOAD_TOL = 1e-8


# -------------------------------------------------------------- JSON output


def _fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if all(ch not in s for ch in ".en"):
        s += ".0"
    return s


def dumps(obj, indent=0, step=2):
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    pad = " " * (indent + step)
    end = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + step, step)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + step, step) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, step)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    return json.dumps(str(obj))


# ------------------------------------------------------------ cocycle files


@dataclass
class CocycleFile:
    dim: int
    matrices: np.ndarray
    splittings: dict = field(default_factory=dict)  # name -> list of Subspace
    metadata: dict = field(default_factory=dict)

    def segment(self, p=None):
        from .cocycle import Segment, segment_residuals

        if not all(k in self.splittings for k in ("Eu", "Ec", "Es")):
            raise FormatError("file carries no Eu/Ec/Es splitting")
        Eu = self.splittings["Eu"]
        seg = Segment(self.matrices, Eu, self.splittings["Ec"], self.splittings["Es"], Eu[0].dim)
        seg.residuals = segment_residuals(seg)
        return seg


def _subspace(vectors, d, where):
    B = np.asarray(vectors, dtype=float)
    if B.size == 0:
        return Subspace(np.zeros((d, 0)), orthonormal=True)
    if B.ndim != 2 or B.shape[1] != d:
        raise FormatError(f"{where}: basis vectors must have length {d}")
    # keep stored orthonormal frames bit for bit so save/load is lossless
    ortho = np.abs(B @ B.T - np.eye(B.shape[0])).max() <= 1e-14
    return Subspace(B.T, orthonormal=bool(ortho))


def load_cocycle(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}")
    if not isinstance(raw, dict) or "dim" not in raw or "matrices" not in raw:
        raise FormatError("schema: expected an object with 'dim' and 'matrices'")
    d = raw["dim"]
    if not isinstance(d, int) or d < 2 or d % 2:
        raise FormatError("schema: 'dim' must be a positive even integer")
    mats = raw["matrices"]
    if not isinstance(mats, list) or not mats:
        raise FormatError("schema: 'matrices' must be a non-empty list")
    out = np.empty((len(mats), d, d))
    for i, M in enumerate(mats):
        if not isinstance(M, list) or len(M) != d * d:
            raise FormatError(f"schema: matrix {i} must be a row-major list of {d * d} numbers")
        out[i] = np.asarray(M, dtype=float).reshape(d, d)
        if not is_symplectic(out[i], SYMPLECTIC_LOAD_TOL):
            raise FormatError(f"matrix {i} is not symplectic at tol {SYMPLECTIC_LOAD_TOL}")
    splits = {}
    for name, steps in (raw.get("splittings") or {}).items():
        if name not in ("E1", "E2", "Eu", "Ec", "Es"):
            raise FormatError(f"schema: unknown splitting key {name!r}")
        if not isinstance(steps, list) or len(steps) != len(mats) + 1:
            raise FormatError(f"schema: splitting {name} needs {len(mats) + 1} per-step bases")
        splits[name] = [_subspace(b, d, f"splitting {name} step {i}") for i, b in enumerate(steps)]
    _check_splittings(out, splits)
    meta = raw.get("metadata") or {}
    if not isinstance(meta, dict):
        raise FormatError("schema: 'metadata' must be an object")
    return CocycleFile(d, out, splits, {str(k): str(v) for k, v in meta.items()})


def _check_splittings(mats, splits):
    from .cocycle import SplitSeq, check_split_invariance

    pairs = [("E1", "E2"), ("Eu", "Es"), ("Ec", "Ec")]
    for a, b in pairs:
        if a in splits and b in splits:
            rep = check_split_invariance(SplitSeq(mats, splits[a], splits[b]), SPLIT_LOAD_TOL)
            if not rep.passed:
                raise FormatError(f"splitting {a}/{b} is not invariant at step {rep.worst_step} "
                                  f"(residual {rep.max_residual:.3e})")


def save_cocycle(path, matrices, splittings=None, metadata=None):
    mats = np.asarray(matrices, dtype=float)
    d = mats.shape[1]
    body = {"dim": int(d), "matrices": [M.ravel().tolist() for M in mats]}
    if splittings:
        body["splittings"] = {k: [E.basis.T.tolist() for E in v] for k, v in splittings.items()}
    if metadata:
        body["metadata"] = {str(k): str(v) for k, v in metadata.items()}
    with open(path, "w") as fh:
        fh.write(dumps(body) + "\n")


def _file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# ---------------------------------------------------------------- commands


def _need_seed(args):
    if args.seed is None:
        raise ParameterError(f"'{args.command}' is randomized and needs an explicit --seed")
    return int(args.seed)


def _source(args):
    from .cocycle import OrbitSource

    prm = {}
    if args.source == "coupled_standard_map":
        prm = {"K": (args.K1, args.K2), "b": args.b}
        return OrbitSource(args.source, prm, _need_seed(args))
    if args.source == "constant_matrix":
        if args.matrix is None:
            raise ParameterError("constant_matrix needs --matrix")
        prm = {"matrix": json.loads(args.matrix)}
    if args.source == "file":
        prm = {"path": args.file}
    return OrbitSource(args.source, prm, 0 if args.seed is None else int(args.seed))


def _matrices(args):
    from .cocycle import generate_cocycle

    if args.file and args.source in (None, "file"):
        return load_cocycle(args.file).matrices
    if args.source is None:
        raise ParameterError("give --source or --file")
    return generate_cocycle(_source(args), args.n)


def cmd_gen(args):
    from .classify import random_nondominated_segment
    from .cocycle import generate_cocycle

    if not args.file:
        raise ParameterError("gen needs --file for the cocycle output")
    splits, meta = None, {"source": args.source}
    if args.source == "segment":
        rng = np.random.default_rng(_need_seed(args))
        seg = random_nondominated_segment(args.family, rng, m=args.n)
        mats = seg.matrices
        splits = {"Eu": seg.Eu, "Ec": seg.Ec, "Es": seg.Es}
        meta["family"] = args.family
    else:
        mats = generate_cocycle(_source(args), args.n)
    save_cocycle(args.file, mats, splits, meta)
    return {"file_sha256": _file_digest(args.file), "count": int(mats.shape[0]), "dim": int(mats.shape[1])}


def cmd_exponents(args):
    from .cocycle import finite_lyapunov_spectrum

    sp = finite_lyapunov_spectrum(_matrices(args), args.method)
    return {"exponents": sp.exponents, "horizon": sp.horizon, "method": sp.method,
            "symmetry_defect": sp.symmetry_defect}


def _segment(args):
    from .cocycle import oseledets_splitting

    if args.file:
        cf = load_cocycle(args.file)
        if all(k in cf.splittings for k in ("Eu", "Ec", "Es")):
            return cf.segment()
        mats = cf.matrices
    else:
        mats = _matrices(args)
    return oseledets_splitting(mats, args.index)


def cmd_dominate(args):
    from .domination import domination_horizon, is_m_dominated

    seg = _segment(args)
    seq = seg.split_seq("u|cs")
    m = domination_horizon(seq, args.m_max)
    out = {"index": seq.index, "length": len(seq), "m_max": args.m_max, "horizon": m}
    if m is not None:
        rep = is_m_dominated(seq, m)
        out["worst_ratio"] = rep.worst_ratio
        out["worst_step"] = rep.worst_step
    return out


def cmd_classify(args):
    from .classify import Thresholds, classify_segment, verify_type_witness

    seg = _segment(args)
    th = Thresholds(args.alpha, args.K_II, args.m0, args.tau)
    cls = classify_segment(seg, th, args.m)
    out = {"tag": cls.tag, "location": list(cls.location),
           "constants": {k: v for k, v in cls.constants.items() if np.ndim(v) == 0}}
    if cls.rates is not None:
        out["rates"] = cls.rates
    if cls.witnesses:
        rep = verify_type_witness(cls, seg)
        out["witness_max_residual"] = rep.max_residual
        out["witness_worst_step"] = rep.worst_step
    return out


def cmd_kickflow(args):
    from .kick import flow_batch, make_kick_hamiltonian, sample_nu, tangent_symplectic_defect

    seed = _need_seed(args)
    H = make_kick_hamiltonian(args.delta, args.alpha, seed=seed)
    nu = sample_nu(H, args.samples, seed)
    rng = np.random.default_rng(seed)
    X = H.sample_support(args.points, rng)
    Y, D, n = flow_batch(H, args.t, X, args.tol)
    out = {
        "eps": H.params["eps"], "hessian_bound": H.hessian_bound, "grad_bound": H.grad_bound,
        "nu_mean": nu.mean, "nu_variance": nu.variance, "nu_support_radius": nu.support_radius,
        "support_limit": args.alpha / 20.0,
        "flow_steps": n, "max_displacement": float(np.linalg.norm(Y - X, axis=1).max()),
        "displacement_bound": abs(args.t) * H.grad_bound,
        "max_tangent_deviation": float(np.linalg.norm(D - np.eye(4), 2, axis=(1, 2)).max()),
        "tangent_deviation_bound": float(np.expm1(abs(args.t) * H.hessian_bound)),
        "symplectic_defect": tangent_symplectic_defect(D),
    }
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("index,angle\n")
            for i, a in enumerate(nu.samples):
                fh.write(f"{i},{_fmt_float(a)}\n")
    return out


def cmd_walk(args):
    from .walk import StepSource, WalkConfig, find_m1, simulate_walk, write_walk_csv

    seed = _need_seed(args)
    if args.dist == "point_mass":
        src = StepSource.point_mass(args.theta0)
    else:
        src = StepSource.uniform(args.radius)
    cfg = WalkConfig(src, args.alpha, args.kappa, m_max=args.m_max, paths=args.paths, seed=seed,
                     m_cap=max(args.m_cap, args.m_max))
    res = find_m1(cfg) if args.grow else simulate_walk(cfg)
    out = {"step_source": src.describe(), "alpha": args.alpha, "kappa": args.kappa, "paths": args.paths,
           "m_max": res.m_max, "m1": res.m1, "diagnostic": res.diagnostic,
           "absorbed": int(np.sum(res.absorbed_at >= 0))}
    if res.m1 is not None:
        out["failure_prob_at_m1"] = res.failure_prob[res.m1]
        out["ci95_halfwidth_at_m1"] = res.ci_halfwidth()[res.m1]
    out["failure_prob_at_m_max"] = res.failure_prob[-1]
    if args.csv:
        write_walk_csv(res, args.csv)
    return out


def cmd_cascade(args):
    from .walk import CascadeConfig, cascade_run, cascade_verify, norm_drop_report, write_cascade_csv

    seed = _need_seed(args)
    cfg = CascadeConfig(delta=args.delta, alpha=args.alpha, kappa=args.kappa, depth=args.depth,
                        grid=args.grid, seed=seed, rates=[args.rate])
    res = cascade_run(cfg)
    rep = cascade_verify(res, args.itineraries, seed)
    nd = norm_drop_report(res, args.norm_horizon)
    out = {
        "depth": res.depth, "m1": res.m1, "K": res.K, "eta": res.eta, "bins": res.bins,
        "arrived_fraction": res.arrived_fraction, "not_arrived": res.not_arrived,
        "measure_loss": res.measure_loss, "kick": res.kick_params,
        "verify": {k: v for k, v in vars(rep).items()} | {"passed": rep.passed},
        "norm_drop": vars(nd),
    }
    if args.csv:
        write_cascade_csv(res, args.csv)
    return out


HANDLERS = {"gen": cmd_gen, "exponents": cmd_exponents, "dominate": cmd_dominate,
            "classify": cmd_classify, "kickflow": cmd_kickflow, "walk": cmd_walk, "cascade": cmd_cascade}


def build_parser():
    ap = argparse.ArgumentParser(prog="symcocycle", description="Symplectic cocycle toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="JSON report path (default: stdout)")
        p.add_argument("--csv", help="CSV series path")
        p.add_argument("--seed", type=int)
        return p

    def source(p):
        p.add_argument("--source", choices=["cat_map", "coupled_standard_map", "constant_matrix", "file"])
        p.add_argument("--file")
        p.add_argument("--n", type=int, default=100)
        p.add_argument("--matrix", help="JSON nested list for constant_matrix")
        p.add_argument("--K1", type=float, default=0.9)
        p.add_argument("--K2", type=float, default=0.9)
        p.add_argument("--b", type=float, default=0.05)

    p = common(sub.add_parser("gen", help="write a cocycle file"))
    p.add_argument("--source", required=True,
                   choices=["cat_map", "coupled_standard_map", "constant_matrix", "segment"])
    p.add_argument("--file")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--matrix")
    p.add_argument("--K1", type=float, default=0.9)
    p.add_argument("--K2", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.05)
    p.add_argument("--family", default="conformal", choices=["angle_pinch", "rate_swap", "identity_plane", "conformal"])

    p = common(sub.add_parser("exponents", help="finite-time Lyapunov spectrum"))
    source(p)
    p.add_argument("--method", default="qr", choices=["qr", "svd", "exact-eigen"])

    p = common(sub.add_parser("dominate", help="smallest m with E^u m-dominating E^cs"))
    source(p)
    p.add_argument("--index", type=int, default=1)
    p.add_argument("--m-max", dest="m_max", type=int, default=64)

    p = common(sub.add_parser("classify", help="type I-IV classification of a segment"))
    source(p)
    p.add_argument("--index", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--K-II", dest="K_II", type=float, default=1000.0)
    p.add_argument("--m0", type=int, default=4)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--m", type=int)

    p = common(sub.add_parser("kickflow", help="kick Hamiltonian, its flow and angle law"))
    p.add_argument("--delta", type=float, default=8.0)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--points", type=int, default=16)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)

    p = common(sub.add_parser("walk", help="absorbing random walk and the horizon m1"))
    p.add_argument("--dist", required=True, choices=["point_mass", "uniform"])
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--radius", type=float, default=0.01)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--m-max", dest="m_max", type=int, default=4096)
    p.add_argument("--m-cap", dest="m_cap", type=int, default=1 << 22)
    p.add_argument("--no-grow", dest="grow", action="store_false")

    p = common(sub.add_parser("cascade", help="type-IV cascade with verification"))
    p.add_argument("--delta", type=float, default=8.0)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--depth", type=int)
    p.add_argument("--grid", type=int, default=12)
    p.add_argument("--rate", type=float, default=2.0)
    p.add_argument("--itineraries", type=int, default=1000)
    p.add_argument("--norm-horizon", dest="norm_horizon", type=int, default=20)
    return ap


def _digest(args):
    inputs = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "csv")}
    if getattr(args, "file", None) and args.command != "gen":
        inputs["file_sha256"] = _file_digest(args.file)
    return hashlib.sha256(dumps(inputs).encode()).hexdigest()


def run_command(argv):
    """Returns (exit code, report dict or None)."""
    argv = list(argv)
    if not argv or argv[0] not in COMMANDS:
        build_parser().print_usage(sys.stderr)
        print(f"unknown command {argv[0] if argv else ''!r}; expected one of {', '.join(COMMANDS)}",
              file=sys.stderr)
        return EXIT_USAGE, None
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return (EXIT_VALIDATION if exc.code else EXIT_OK), None
    try:
        results = HANDLERS[args.command](args)
        report = {"command": args.command, "version": __version__,
                  "inputs_digest": _digest(args), "results": results}
    except (ValidationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION, None
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, None
    text = dumps(report) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK, report


def main(argv=None):
    code, _ = run_command(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())

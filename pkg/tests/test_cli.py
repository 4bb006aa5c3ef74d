import json
import subprocess
import sys

import numpy as np
import pytest

from symcocycle.cli import dumps, load_cocycle, main, run_command, save_cocycle
from symcocycle.cocycle import diag_pq
from symcocycle.errors import FormatError
from symcocycle.symplin import random_symplectic


def write_json(path, body):
    path.write_text(json.dumps(body))
    return str(path)


def test_load_well_formed(tmp_path):
    mats = [np.eye(2).ravel().tolist(), [2.0, 0.0, 0.0, 0.5]]
    cf = load_cocycle(write_json(tmp_path / "a.json", {"dim": 2, "matrices": mats}))
    assert cf.matrices.shape == (2, 2, 2) and cf.matrices[1, 0, 0] == 2.0


def test_load_rejects_non_symplectic(tmp_path):
    path = write_json(tmp_path / "b.json", {"dim": 2, "matrices": [[2.0, 0.0, 0.0, 1.0]]})
    with pytest.raises(FormatError, match="matrix 0"):
        load_cocycle(path)


def test_load_rejects_dimension_mismatch(tmp_path):
    path = write_json(tmp_path / "c.json", {"dim": 4, "matrices": [[1.0, 0.0, 0.0, 1.0]]})
    with pytest.raises(FormatError, match="schema"):
        load_cocycle(path)


def test_load_reports_parse_position(tmp_path):
    path = tmp_path / "d.json"
    path.write_text('{"dim": 2,\n "matrices": [1, 2,,]}')
    with pytest.raises(FormatError, match="line 2"):
        load_cocycle(str(path))


def test_load_rejects_non_invariant_splitting(tmp_path):
    A = diag_pq([2.0])
    path = tmp_path / "e.json"
    save_cocycle(str(path), [A, A])
    body = json.loads(path.read_text())
    body["splittings"] = {"E1": [[[1.0, 0.0]], [[1.0, 0.0]], [[0.6, 0.8]]],
                          "E2": [[[0.0, 1.0]]] * 3}
    path.write_text(json.dumps(body))
    with pytest.raises(FormatError, match="step 1"):
        load_cocycle(str(path))


def test_round_trip_lossless(tmp_path):
    rng = np.random.default_rng(4)
    mats = np.array([random_symplectic(2, rng) for _ in range(5)])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_cocycle(str(a), mats, metadata={"note": "x"})
    cf = load_cocycle(str(a))
    assert np.array_equal(cf.matrices, mats)
    save_cocycle(str(b), cf.matrices, metadata=cf.metadata)
    assert a.read_bytes() == b.read_bytes()
    assert cf.metadata == {"note": "x"}


def test_round_trip_with_segment(tmp_path):
    f1, f2 = tmp_path / "s.json", tmp_path / "t.json"
    code, _ = run_command(["gen", "--source", "segment", "--family", "identity_plane", "--n", "8",
                           "--seed", "3", "--file", str(f1)])
    assert code == 0
    cf = load_cocycle(str(f1))
    save_cocycle(str(f2), cf.matrices, {k: cf.splittings[k] for k in ("Eu", "Ec", "Es")}, cf.metadata)
    cf2 = load_cocycle(str(f2))
    assert np.array_equal(cf.matrices, cf2.matrices)
    for k in ("Eu", "Ec", "Es"):
        for E, F in zip(cf.splittings[k], cf2.splittings[k]):
            assert np.array_equal(E.basis, F.basis)


def test_dumps_deterministic_floats():
    assert dumps({"b": 0.1, "a": [1, 2.0]}) == '{\n  "a": [1, 2.0],\n  "b": 0.10000000000000001\n}'
    assert json.loads(dumps({"x": 1 / 3}))["x"] == 1 / 3
    assert dumps(float("nan")) == '"nan"'


def test_exponents_cat(tmp_path):
    code, rep = run_command(["exponents", "--source", "cat_map", "--n", "100", "--method", "qr",
                             "--out", str(tmp_path / "r.json")])
    assert code == 0
    lam = rep["results"]["exponents"]
    assert lam[0] == pytest.approx(0.962424, abs=1e-6) and lam[1] == pytest.approx(-0.962424, abs=1e-6)


def test_dominate_file(tmp_path):
    f = tmp_path / "c.json"
    save_cocycle(str(f), [np.diag([1.1, 1 / 1.1])] * 20)
    code, rep = run_command(["dominate", "--file", str(f), "--index", "1", "--m-max", "64",
                             "--out", str(tmp_path / "r.json")])
    assert code == 0 and rep["results"]["horizon"] == 4
    save_cocycle(str(f), [np.eye(2)] * 5)
    code, rep = run_command(["dominate", "--file", str(f), "--m-max", "64", "--out", str(tmp_path / "r.json")])
    # an identity cocycle has no exponent gap, so no splitting can be built
    assert code == 3


def test_classify_generated_segment(tmp_path):
    f = tmp_path / "s.json"
    run_command(["gen", "--source", "segment", "--family", "conformal", "--n", "12", "--seed", "1",
                 "--file", str(f)])
    code, rep = run_command(["classify", "--file", str(f), "--out", str(tmp_path / "r.json")])
    assert code == 0 and rep["results"]["tag"] == "IV"
    assert rep["results"]["witness_max_residual"] <= 1e-6


def test_walk_command(tmp_path):
    csv = tmp_path / "w.csv"
    code, rep = run_command(["walk", "--dist", "point_mass", "--theta0", "0.01", "--alpha", "0.4",
                             "--kappa", "1.0", "--paths", "10", "--m-max", "256", "--seed", "7",
                             "--csv", str(csv), "--out", str(tmp_path / "r.json")])
    assert code == 0 and rep["results"]["m1"] <= 160
    assert csv.read_text().startswith("m,failure_prob,stderr")


def test_kickflow_command(tmp_path):
    code, rep = run_command(["kickflow", "--delta", "1.0", "--samples", "50", "--points", "8", "--seed", "2",
                             "--out", str(tmp_path / "r.json")])
    r = rep["results"]
    assert code == 0
    assert r["max_displacement"] <= r["displacement_bound"] + 1e-9
    assert r["max_tangent_deviation"] <= r["tangent_deviation_bound"] + 1e-9
    assert r["nu_support_radius"] < r["support_limit"]


def test_byte_identical_reports(tmp_path):
    argv = ["walk", "--dist", "uniform", "--radius", "0.05", "--alpha", "0.4", "--kappa", "0.5",
            "--paths", "2000", "--m-max", "512", "--seed", "7"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_command(argv + ["--out", str(a)])[0] == 0
    assert run_command(argv + ["--out", str(b)])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    run_command(argv[:-1] + ["8", "--out", str(c)])
    assert c.read_bytes() != a.read_bytes()


def test_exit_codes(capsys):
    assert main(["bogus"]) == 64
    assert main([]) == 64
    assert main(["walk", "--dist", "uniform", "--alpha", "0.4", "--kappa", "0.5"]) == 2  # no seed
    assert main(["walk", "--dist", "uniform", "--alpha", "3.0", "--kappa", "0.5", "--seed", "1"]) == 2
    assert main(["exponents", "--source", "constant_matrix", "--matrix", "[[2, 0], [0, 1]]"]) == 2
    assert main(["exponents", "--nope"]) == 2
    capsys.readouterr()


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "symcocycle", "exponents", "--source", "cat_map", "--n", "10",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(out.read_text())["command"] == "exponents"


def test_cascade_command(tmp_path):
    csv = tmp_path / "c.csv"
    code, rep = run_command(["cascade", "--depth", "100", "--grid", "4", "--itineraries", "50", "--seed", "1",
                             "--csv", str(csv), "--out", str(tmp_path / "r.json")])
    r = rep["results"]
    assert code == 0 and r["verify"]["passed"]
    assert r["arrived_fraction"] + r["not_arrived"] + r["measure_loss"] == pytest.approx(1.0, abs=1e-12)
    assert r["norm_drop"]["gap"] >= 0
    assert len(csv.read_text().splitlines()) == 101

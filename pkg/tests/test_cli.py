import json
import subprocess
import sys

import numpy as np

from mixctl import io
from mixctl.cli import main
from mixctl.ensembles import amplitude_damping, random_conversion_pair, random_dephasing, random_planted
from mixctl.lindblad import DensityMatrix, depolarizing


def _dump(path, obj):
    path.write_text(io.dumps(obj))
    return str(path)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def _state_json(state):
    return io.matrix_to_json(state.mat)


def test_majorize_ok(tmp_path, capsys):
    p = _dump(tmp_path / "p.json", [1.0, 0.0, 0.0])
    q = _dump(tmp_path / "q.json", [1 / 3, 1 / 3, 1 / 3])
    code, report = _run(["majorize", p, q], capsys)
    assert code == 0 and report["majorizes"]
    assert len(report["ttransform_chain"]) <= 2
    w = np.array(report["witness_matrix"])
    np.testing.assert_allclose(w @ [1, 0, 0], [1 / 3] * 3, atol=1e-12)


def test_majorize_incomparable(tmp_path, capsys):
    p = _dump(tmp_path / "p.json", [0.5, 0.5, 0.0])
    q = _dump(tmp_path / "q.json", [0.6, 0.2, 0.2])
    code, report = _run(["majorize", p, q], capsys)
    assert code == 3 and not report["majorizes"]
    assert report["first_failing_prefix"] == 0


def test_malformed_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    good = _dump(tmp_path / "q.json", [0.5, 0.5])
    assert main(["majorize", str(bad), good]) == 2
    assert main(["majorize", str(tmp_path / "missing.json"), good]) == 2
    assert main(["majorize", _dump(tmp_path / "neg.json", [1.5, -0.5]), good]) == 2
    assert main(["classify", _dump(tmp_path / "l.json", {"L": [[[1, 2], [3]]]})]) == 2
    assert main(["bogus"]) == 2
    capsys.readouterr()


def test_classify_examples(tmp_path, capsys, rng):
    code, rep = _run(["classify", _dump(tmp_path / "dep.json", io.lindbladian_to_json(depolarizing(3)))], capsys)
    assert code == 0
    assert rep["unital"] and rep["depolarizing"] and rep["dephasing"] is None
    assert rep["optimal"]["status"] == "not_optimal"

    lind = random_dephasing(rng, 4, rotate=False)
    _, rep = _run(["classify", _dump(tmp_path / "deph.json", io.lindbladian_to_json(lind))], capsys)
    assert rep["dephasing"] is not None and rep["optimal"]["status"] == "optimal"
    assert not rep["depolarizing"]

    _, rep = _run(["classify", _dump(tmp_path / "ad.json", io.lindbladian_to_json(amplitude_damping(3)))], capsys)
    assert not rep["unital"] and rep["optimal"]["status"] == "not_optimal"


def _triple(tmp_path, lind, rho, sigma):
    return (
        _dump(tmp_path / "L.json", io.lindbladian_to_json(lind)),
        _dump(tmp_path / "rho.json", _state_json(rho)),
        _dump(tmp_path / "sigma.json", _state_json(sigma)),
    )


def test_synthesize_and_simulate(tmp_path, capsys, rng):
    lind = random_dephasing(rng, 4)
    rho, sigma = random_conversion_pair(rng, 4)
    lf, rf, sf = _triple(tmp_path, lind, rho, sigma)
    plan_path = str(tmp_path / "plan.json")
    assert main(["synthesize", lf, rf, sf, "-o", plan_path]) == 0
    plan = json.loads(open(plan_path).read())
    assert plan["route"] == "dephasing"
    assert plan["provenance"]["lindbladian_hash"] == io.lindbladian_hash(lind)

    code, res = _run(["simulate", lf, rf, plan_path, "--traj-stride", "4"], capsys)
    assert code == 0 and res["spectral_error"] <= 1e-6
    assert res["audit"]["ok"]
    assert main(["simulate", lf, rf, plan_path, "--mode", "bogus"]) == 2
    capsys.readouterr()


def test_simulate_physical(tmp_path, capsys, rng):
    lind = random_planted(rng, 3)
    rho, sigma = random_conversion_pair(rng, 3)
    lf, rf, sf = _triple(tmp_path, lind, rho, sigma)
    plan_path = str(tmp_path / "plan.json")
    assert main(["synthesize", lf, rf, sf, "-o", plan_path]) == 0
    code, res = _run(["simulate", lf, rf, plan_path, "--mode", "physical", "--steer-dt", "1e-3"], capsys)
    assert code == 0 and res["mode"] == "physical"
    assert res["spectral_error"] <= 1e-2


def test_synthesize_exit_codes(tmp_path, capsys):
    lf, rf, sf = _triple(
        tmp_path, depolarizing(3), DensityMatrix.diagonal([0.6, 0.3, 0.1]), DensityMatrix.diagonal([0.5, 0.3, 0.2])
    )
    assert main(["synthesize", lf, rf, sf]) == 5
    lf, rf, sf = _triple(
        tmp_path, random_dephasing(np.random.default_rng(0), 3),
        DensityMatrix.maximally_mixed(3), DensityMatrix.diagonal([1.0, 0.0, 0.0]),
    )
    assert main(["synthesize", lf, rf, sf]) == 4
    capsys.readouterr()


def test_output_is_byte_identical(tmp_path, rng):
    lind = random_planted(rng, 4)
    rho, sigma = random_conversion_pair(rng, 4)
    lf, rf, sf = _triple(tmp_path, lind, rho, sigma)
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert main(["synthesize", lf, rf, sf, "-o", a]) == 0
    assert main(["synthesize", lf, rf, sf, "-o", b]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()


def test_env_and_flag_precedence(tmp_path, capsys, monkeypatch):
    p = _dump(tmp_path / "p.json", [0.5, 0.5000001])
    q = _dump(tmp_path / "q.json", [0.5, 0.5])
    assert main(["majorize", p, q]) == 2
    monkeypatch.setenv("MIXCTL_TOL_SUM", "1e-6")
    assert main(["majorize", p, q]) == 0
    assert main(["majorize", p, q, "--tol-sum", "1e-9"]) == 2
    capsys.readouterr()


def test_verify_batch(tmp_path, capsys):
    manifest = _dump(tmp_path / "m.json", {"entries": [{"recipe": {"kind": "dephasing", "d": 4, "count": 10}}]})
    code, rep = _run(["verify-batch", manifest, "--jobs", "4", "--seed", "3"], capsys)
    assert code == 0 and rep["passed"] == 10
    assert all(r["spectral_error"] <= 1e-6 for r in rep["entries"])
    assert [r["index"] for r in rep["entries"]] == list(range(10))
    _, again = _run(["verify-batch", manifest, "--jobs", "1", "--seed", "3"], capsys)
    assert io.dumps(again) == io.dumps(rep)


def test_verify_batch_failures(tmp_path, capsys, rng):
    lf, rf, sf = _triple(
        tmp_path, random_dephasing(rng, 3), DensityMatrix.maximally_mixed(3), DensityMatrix.diagonal([1.0, 0.0, 0.0])
    )
    entries = [{"recipe": {"kind": "planted", "d": 3, "count": 2}}, {"name": "bad", "L": lf, "rho": rf, "sigma": sf}]
    code, rep = _run(["verify-batch", _dump(tmp_path / "m.json", entries)], capsys)
    assert code != 0
    assert rep["entries"][-1]["status"] == "fail-majorization"
    assert rep["passed"] == 2
    assert main(["verify-batch", _dump(tmp_path / "empty.json", [])]) == 2
    capsys.readouterr()


def test_module_entry_point(tmp_path):
    p = _dump(tmp_path / "p.json", [0.7, 0.3])
    q = _dump(tmp_path / "q.json", [0.6, 0.4])
    proc = subprocess.run([sys.executable, "-m", "mixctl", "majorize", p, q], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["majorizes"]

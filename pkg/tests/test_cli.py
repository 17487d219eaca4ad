import json
import subprocess
import sys

import numpy as np
import pytest

from oracles import scalar_lti
from switchgain.cli import main
from switchgain.io import save_system, system_to_dict


@pytest.fixture
def scalar_file(tmp_path):
    p = tmp_path / "lti.json"
    save_system(scalar_lti(), p)
    return p


@pytest.fixture(scope="module")
def pendulum_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("pend")
    raw, small = d / "raw.json", d / "min.json"
    assert main(["example-pendulum", "--out", str(raw)]) == 0
    assert main(["minimize", str(raw), "--out", str(small), "--report", str(d / "report.json")]) == 0
    return raw, small, d


def run(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out


def test_validate_ok_and_invalid(capsys, tmp_path, scalar_file):
    code, out = run(capsys, "validate", scalar_file)
    assert code == 0 and json.loads(out.out)["ok"]
    data = system_to_dict(scalar_lti())
    data["edges"][0]["A"] = [[1.0, 2.0]]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    code, out = run(capsys, "validate", bad)
    assert code == 1
    assert json.loads(out.out)["violations"][0]["kind"] == "shape"


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, out = run(capsys, "lower", bad, "--horizon", 2)
    assert code == 1 and "line 1" in out.err


def test_minimize_writes_system_and_report(pendulum_files):
    _, small, d = pendulum_files
    report = json.loads((d / "report.json").read_text())
    assert report["final_dims"] == {"a": 2, "b": 3, "c": 2}
    assert json.loads(small.read_text())["nodes"][1] == {"name": "b", "dim": 3}


def test_lower_and_upper(capsys, tmp_path, scalar_file):
    code, out = run(capsys, "lower", scalar_file, "--horizon", 20, "--p", "inf")
    assert code == 0
    res = json.loads(out.out)
    assert res["lower"] == pytest.approx(sum(0.5**k for k in range(19)))
    out_file = tmp_path / "up.json"
    code, out = run(capsys, "upper", scalar_file, "--horizon", 1, "--tol", 1e-3, "--out", out_file, "--samples", 500)
    assert code == 0
    res = json.loads(out_file.read_text())
    assert res["upper"] == pytest.approx(2.0, abs=1e-3)
    assert res["verification"]["max_violation"] <= 1e-6


def test_bracket(capsys, scalar_file):
    code, out = run(capsys, "bracket", scalar_file, "--horizon", 2, "--lower-horizon", 20)
    res = json.loads(out.out)
    assert code == 0
    assert res["lower"] <= 2.0 <= res["upper"] + 1e-3
    assert res["stability"] == "stable"


def test_stability_exit_codes(capsys, tmp_path):
    from oracles import lti_system

    for A, expected in (([[0.5]], 0), ([[2.0]], 2), ([[1.0]], 3)):
        p = tmp_path / "s.json"
        save_system(lti_system(A, [[1]], [[1]], [[0]]), p)
        code, _ = run(capsys, "stability", p)
        assert code == expected


def test_unstable_bracket_aborts(capsys, tmp_path):
    from oracles import lti_system

    p = tmp_path / "u.json"
    save_system(lti_system([[1.5]], [[1]], [[1]], [[0]]), p)
    code, out = run(capsys, "bracket", p, "--horizon", 1)
    assert code == 2


def test_storage_below_floor_aborts(capsys, pendulum_files):
    _, small, d = pendulum_files
    code, _ = run(capsys, "storage", small, "--gamma", 1e-4, "--horizon", 4, "--node", "b", "--out", d / "x.csv")
    assert code == 2


def test_storage_csv(capsys, pendulum_files):
    _, small, d = pendulum_files
    out = d / "b.csv"
    code, res = run(capsys, "storage", small, "--gamma", 0.25, "--horizon", 4, "--node", "b", "--out", out, "--resolution", 40)
    assert code == 0
    assert json.loads(res.out)["sections"] == ["x0-x1", "x0-x2", "x1-x2"]
    assert len(out.read_text().splitlines()) == 1 + 3 * 41


def test_worst_case(capsys, pendulum_files):
    _, small, _ = pendulum_files
    code, out = run(capsys, "worst-case", small, "--path", "2,4,5", "--gamma", 0.25, "--x0", "1,0")
    res = json.loads(out.out)
    assert code == 0
    assert res["attained"] == pytest.approx(res["predicted"], rel=1e-8)
    assert np.asarray(res["disturbance"]).shape == (3, 1)


def test_worst_case_bad_path(capsys, pendulum_files):
    _, small, _ = pendulum_files
    code, _ = run(capsys, "worst-case", small, "--path", "2,2", "--gamma", 0.25, "--x0", "1,0")
    assert code == 1


def test_inconclusive_exit_code(capsys, tmp_path):
    from oracles import lti_system

    th = 0.3
    R = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
    p = tmp_path / "r.json"
    save_system(lti_system(R, [[1.0], [0.0]], [[1.0, 0.0]], [[0.0]]), p)
    code, _ = run(capsys, "upper", p, "--horizon", 1)
    assert code == 3


def test_module_entry_point(tmp_path):
    out = tmp_path / "p.json"
    proc = subprocess.run(
        [sys.executable, "-m", "switchgain", "example-pendulum", "--out", str(out), "--minimize"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(proc.stdout)["dims"] == {"a": 2, "b": 3, "c": 2}

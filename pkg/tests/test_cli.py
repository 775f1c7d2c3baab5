import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dualsolver.cli import main
from dualsolver.cli.acceptance import DEFAULT_TOLERANCES, load_tolerances
from dualsolver.cli.runners import RUN_STATUSES, RunReport, write_rows
from dualsolver.cli.schema import validate_problem
from dualsolver.errors import SchemaError

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def _write(tmp_path, problem, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(problem))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _circle(**solver):
    p = {"schema": "dualsolver/1", "kind": "algebraic",
         "system": {"name": "circle_line", "alpha": 0.6},
         "potential": {"a": 1.0, "base": [0.0, 0.8]}}
    if solver:
        p["solver"] = solver
    return p


# schema ---------------------------------------------------------------------------

def test_missing_kind_names_key():
    with pytest.raises(SchemaError) as exc:
        validate_problem({"schema": "dualsolver/1", "system": {"name": "circle_line"}})
    assert exc.value.path == "kind"
    assert "kind" in str(exc.value)


def test_unknown_key_rejected_with_path():
    p = _circle()
    p["potential"]["wieghts"] = 1.0
    with pytest.raises(SchemaError) as exc:
        validate_problem(p)
    assert exc.value.path == "potential/wieghts"
    assert "unknown key" in str(exc.value)


def test_nested_missing_key_path():
    p = {"schema": "dualsolver/1", "kind": "pde", "system": {"name": "transport"},
         "grid": {"nx": 4, "T": 1.0}}
    with pytest.raises(SchemaError) as exc:
        validate_problem(p)
    assert exc.value.path == "grid/nt"


@pytest.mark.parametrize("problem,path", [
    ({"schema": "dualsolver/1", "kind": "algebraic", "system": {"name": "heat"}},
     "system/name"),
    ({"schema": "dualsolver/1", "kind": "algebraic", "system": {"name": "linear",
                                                               "rhs": [1.0]}},
     "system/matrix"),
    ({"schema": "dualsolver/1", "kind": "pde", "system": {"name": "heat"}}, "grid"),
    ({"schema": "dualsolver/1", "kind": "ellipticity", "system": {"name": "burgers"}}, "scan"),
    ({"schema": "dualsolver/0", "kind": "algebraic", "system": {"name": "linear"}}, "schema"),
])
def test_semantic_schema_rules(problem, path):
    with pytest.raises(SchemaError) as exc:
        validate_problem(problem)
    assert exc.value.path == path


@pytest.mark.parametrize("name", sorted(p.name for p in PROBLEMS.glob("*.json")))
def test_shipped_problems_validate(name):
    validate_problem(json.loads((PROBLEMS / name).read_text()))


# exit codes and artifacts -----------------------------------------------------------

def test_circle_line_solve(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["solve", _write(tmp_path, _circle()), "--out", str(out)])
    assert code == 0
    assert "status: converged" in capsys.readouterr().out
    rows = _rows(out / "primal.csv")
    assert rows[0] == ["index", "x"]
    x = np.array([float(r[1]) for r in rows[1:]])
    # the only root of x^2 + y^2 = 1, x = 0.6 reachable from (0, 0.8)
    np.testing.assert_allclose(x, [0.6, 0.8], atol=1e-10)
    report = (out / "report.txt").read_text()
    assert "status: converged" in report and str(out / "primal.csv") in report


def test_missing_kind_exit_2(tmp_path, capsys):
    path = _write(tmp_path, {"schema": "dualsolver/1", "system": {"name": "circle_line"}})
    assert main(["solve", path, "--out", str(tmp_path / "o")]) == 2
    assert "kind" in capsys.readouterr().err


def test_unreadable_and_invalid_json_exit_2(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_max_iter_flag_gives_exit_1(tmp_path, capsys):
    code = main(["solve", _write(tmp_path, _circle()), "--out", str(tmp_path / "o"),
                 "--max-iter", "1"])
    assert code == 1
    assert "status: max_iter" in capsys.readouterr().out


def test_solver_error_exit_1(tmp_path, capsys):
    # P-block weights too small for a large back stress: the inner problem is a saddle
    p = {"schema": "dualsolver/1", "kind": "plasticity_rd", "system": {"name": "single_slip"},
         "potential": {"a": {"P": 1.0}},
         "points": [{"Pi": [[50, 0, 0], [0, 50, 0], [0, 0, 50]]}]}
    out = tmp_path / "o"
    assert main(["solve", _write(tmp_path, p), "--out", str(out)]) == 1
    rows = _rows(out / "points.csv")
    assert rows[1][-1].startswith("NonConvexInner")


def test_bad_parameter_value_exit_2(tmp_path):
    p = _circle()
    p["potential"]["base"] = [0.0, 0.8, 1.0]
    assert main(["solve", _write(tmp_path, p), "--out", str(tmp_path / "o")]) == 2


def test_ellipticity_subcommand_rejects_other_kinds(tmp_path, capsys):
    assert main(["ellipticity", _write(tmp_path, _circle())]) == 2
    assert "kind" in capsys.readouterr().err


def _scan(tmp_path, radius, a, samples=60, name="transport"):
    p = {"schema": "dualsolver/1", "kind": "ellipticity", "system": {"name": name},
         "scan": {"radius": radius, "samples": samples, "a": a}}
    out = tmp_path / f"scan_{radius}_{a}"
    code = main(["ellipticity", _write(tmp_path, p, f"{name}_{radius}_{a}.json"),
                 "--out", str(out)])
    return code, _rows(out / "ellipticity.csv")


def test_ellipticity_transport_origin(tmp_path):
    code, rows = _scan(tmp_path, 0.0, 1.0)
    assert code == 0
    assert rows[0] == ["sample", "M_min_eig", "A_min_eig", "certified", "error"]
    assert len(rows) == 2 and rows[1][3] == "true"


def test_ellipticity_quadratic_certified(tmp_path):
    code, rows = _scan(tmp_path, 0.5, 1.0, name="scalar_quadratic")
    assert code == 0
    assert all(r[3] == "true" for r in rows[1:])


def test_ellipticity_small_weight_flags_mpd_loss(tmp_path):
    code, rows = _scan(tmp_path, 0.5, 0.1, name="scalar_quadratic")
    assert code == 1
    flagged = [r for r in rows[1:] if r[4].startswith("MPDLoss")]
    assert flagged and all(r[3] == "false" for r in flagged)
    # flagged rows carry the offending eigenvalue of M
    assert all(float(r[1]) <= 0 for r in flagged)


def test_pde_problem_writes_nodal_csv(tmp_path):
    out = tmp_path / "heat"
    assert main(["solve", str(PROBLEMS / "heat.json"), "--out", str(out)]) == 0
    rows = _rows(out / "primal.csv")
    assert rows[0] == ["x", "t", "U0", "U1"]
    assert len(rows) == 1 + 9 * 9
    dual = _rows(out / "dual.csv")
    assert dual[0][:2] == ["x", "t"] and len(dual) == len(rows)


def test_plasticity_problem_rows(tmp_path):
    out = tmp_path / "ri"
    assert main(["solve", str(PROBLEMS / "double_slip_ri.json"), "--out", str(out)]) == 0
    rows = _rows(out / "points.csv")
    head = rows[0]
    assert head[0] == "point" and head[-6:] == ["iterations", "residual", "min_eig",
                                                 "jacobian_asymmetry", "det_P_drift", "error"]
    assert len(rows) == 1 + 4
    assert all(float(r[head.index("min_eig")]) > 0 for r in rows[1:])


# determinism and seeds --------------------------------------------------------------

def test_identical_csv_bytes(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["ellipticity", str(PROBLEMS / "ellipticity_quadratic_weak.json"),
              "--out", str(out), "--seed", "7"])
        main(["solve", str(PROBLEMS / "single_slip_rd.json"), "--out", str(out / "rd"),
              "--seed", "7"])
        outs.append(out)
    for rel in ("ellipticity.csv", "rd/points.csv"):
        assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()


def test_seed_env_fallback(tmp_path):
    path = str(PROBLEMS / "ellipticity_quadratic_weak.json")
    main(["ellipticity", path, "--out", str(tmp_path / "flag"), "--seed", "3"])
    main(["ellipticity", path, "--out", str(tmp_path / "env")],
         environ={"DUALSOLVER_SEED": "3"})
    main(["ellipticity", path, "--out", str(tmp_path / "other")],
         environ={"DUALSOLVER_SEED": "4"})
    a, b, c = ((tmp_path / d / "ellipticity.csv").read_bytes() for d in ("flag", "env", "other"))
    assert a == b and a != c
    assert main(["ellipticity", path], environ={"DUALSOLVER_SEED": "x"}) == 2


def test_csv_is_rfc4180_with_shortest_floats(tmp_path):
    path = write_rows(tmp_path / "t.csv", ["a", "b"], [(0.1, "x,y"), (1 / 3, None)])
    raw = path.read_bytes()
    assert raw == b'a,b\r\n0.1,"x,y"\r\n0.3333333333333333,\r\n'
    assert float(_rows(path)[2][0]) == 1 / 3


def test_run_report_status_closed():
    assert RunReport("algebraic", "linear", "converged").converged
    with pytest.raises(ValueError):
        RunReport("algebraic", "linear", "almost")
    assert set(RUN_STATUSES) >= {"converged", "max_iter", "dtp_failure", "stagnation"}


# acceptance configuration -----------------------------------------------------------

def test_env_override_is_configuration():
    tol, notes = load_tolerances({"DUALSOLVER_TOL_C1_DUAL": "1e-12"})
    assert tol["C1_DUAL"] == 1e-12
    assert any("C1_DUAL" in n for n in notes)


def test_unknown_env_override_warns_and_is_ignored():
    with pytest.warns(UserWarning, match="DUALSOLVER_TOL_BOGUS"):
        tol, notes = load_tolerances({"DUALSOLVER_TOL_BOGUS": "1"})
    assert tol == DEFAULT_TOLERANCES


def test_console_entry_point(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "dualsolver.cli", "solve",
                           str(PROBLEMS / "circle_line.json"), "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert "status: converged" in proc.stdout

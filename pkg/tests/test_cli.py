import csv
import json

import numpy as np
import pytest

from accmd import cli
from accmd.lyapunov import LyapunovSuite


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_trace_with_monotone_energy(tmp_path):
    out = tmp_path / "t.csv"
    summary = tmp_path / "t.json"
    rc = cli.main(["run", "--problem", "loglinear", "--dim", "64", "--seed", "7", "--solver", "accmd-forward",
                   "--out", str(out), "--json-summary", str(summary), "--no-timing"])
    assert rc == 0
    rows = read_csv(out)
    E = np.array([float(r["lyap_Ealpha"]) for r in rows])
    assert np.all(np.diff(E) <= 1e-12)
    assert all(r["time_ms"] == "" for r in rows)
    data = json.loads(summary.read_text())
    assert data["status"] == "converged" and data["iterations"] == len(rows) - 1


def test_run_max_iters_zero(tmp_path, capsys):
    assert cli.main(["run", "--max-iters", "0", "--no-timing"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and lines[1].startswith("0,")


def test_run_abort_exit_code(tmp_path):
    out = tmp_path / "a.csv"
    rc = cli.main(["run", "--problem", "counterexample", "--solver", "md", "--step", "100", "--out", str(out)])
    assert rc == 1
    assert len(read_csv(out)) >= 1


def test_run_lasso_from_dataset(fixtures_dir, tmp_path):
    out = tmp_path / "l.csv"
    rc = cli.main(["run", "--problem", "lasso", "--data", str(fixtures_dir / "tiny.csv"), "--lambda", "0.05",
                   "--solver", "homotopy", "--max-iters", "200", "--out", str(out), "--no-timing"])
    assert rc == 0 and len(read_csv(out)) > 1


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--solver", "nope"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "--check", "bogus"])
    assert exc.value.code == 2
    assert cli.main(["run", "--problem", "loglinear", "--mu", "2"]) == 2
    assert cli.main(["run", "--problem", "maxmargin", "--solver", "accmd-forward"]) == 2
    assert cli.main(["run", "--problem", "loglinear", "--g", "1,x"]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen", "--problem", "quartic"])
    assert exc.value.code == 2


def test_verify_all_passes(tmp_path, capsys):
    out = tmp_path / "v.json"
    rc = cli.main(["verify", "--all", "--problem", "loglinear", "--dim", "16", "--seed", "1", "--out", str(out)])
    assert rc == 0
    data = json.loads(out.read_text())
    assert data["passed"] and len(data["checks"]) >= 7
    assert "FAIL" not in capsys.readouterr().out


def test_verify_bare_mirror(capsys):
    assert cli.main(["verify", "--check", "three-point", "--mirror", "quadratic"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("PASS three-point")
    assert float(line.split("max_rel=")[1].split()[0]) <= 1e-13


def test_verify_sign_flip_negative_control(monkeypatch):
    original = LyapunovSuite.cross
    monkeypatch.setattr(LyapunovSuite, "cross", lambda self, x, y: -original(self, x, y))
    rc = cli.main(["verify", "--check", "step-identity", "--problem", "loglinear", "--dim", "8", "--seed", "1"])
    assert rc == 1


def test_verify_boundary_minimizer_skips(capsys):
    rc = cli.main(["verify", "--all", "--problem", "maxmargin", "--dim", "8", "--seed", "1", "--samples", "100",
                   "--gcs-samples", "500"])
    assert rc == 0
    assert "SKIP perturbed-step-identity" in capsys.readouterr().out
    assert cli.main(["verify", "--check", "strong-lyapunov", "--problem", "maxmargin", "--dim", "8"]) == 2


def test_bench_compares_solvers(tmp_path):
    out = tmp_path / "b.json"
    rc = cli.main(["bench", "--problem", "loglinear", "--g", "20,0,0,0,0,0,0,0",
                   "--solvers", "md,accmd-forward", "--max-iters", "3000", "--out", str(out), "--no-timing"])
    assert rc == 0
    rows = {r["solver"]: r for r in json.loads(out.read_text())["rows"]}
    assert rows["accmd-forward"]["iterations_to_target"] < rows["md"]["iterations_to_target"]
    assert "time_to_target_ms" not in rows["md"]


def test_bench_single_solver_is_usage_error():
    assert cli.main(["bench", "--solvers", "md"]) == 2
    assert cli.main(["bench", "--solvers", "md,warp-drive"]) == 2


def test_gen_quartic_metadata(tmp_path):
    rc = cli.main(["gen", "--problem", "quartic", "--dim", "256", "--seed", "0", "--out", str(tmp_path / "q")])
    assert rc == 0
    meta = json.loads((tmp_path / "q" / "metadata.json").read_text())
    assert abs(meta["mu"] - 1.0) < 1e-3
    assert meta["C"] == meta["L"]
    for name in meta["files"]:
        assert (tmp_path / "q" / name).exists()


def test_gen_log_linear_from_vector(tmp_path):
    assert cli.main(["gen", "--problem", "loglinear", "--g", "3,4", "--out", str(tmp_path / "g")]) == 0
    meta = json.loads((tmp_path / "g" / "metadata.json").read_text())
    assert meta["C"] == 25.0 and meta["L"] == 17.0 and meta["mu"] == 1.0


def test_gen_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["gen", "--problem", "loglinear", "--out", str(blocker / "sub")]) == 1


def test_gen_lasso_writes_loadable_dataset(tmp_path):
    from accmd.objective import load_dataset, make_lasso_random

    assert cli.main(["gen", "--problem", "lasso", "--dim", "30", "--rows", "10", "--seed", "2",
                     "--out", str(tmp_path / "l")]) == 0
    A, b = load_dataset(tmp_path / "l" / "dataset.csv")
    ref = make_lasso_random(10, 30, 2)
    assert np.array_equal(A, ref.f.A) and np.array_equal(b, ref.f.b)


def test_manifest_values_and_overrides(tmp_path, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"command": "run", "problem": "counterexample", "solver": "accmd-forward",
                                    "max_iters": 7, "tol": 0.0, "no_timing": True}))
    assert cli.main(["run", "--manifest", str(manifest)]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 1 + 8
    assert cli.main(["run", "--manifest", str(manifest), "--max-iters", "2"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 1 + 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"warp": 9}))
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--manifest", str(bad)])
    assert exc.value.code == 2
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"command": "gen"}))
    with pytest.raises(SystemExit):
        cli.main(["run", "--manifest", str(wrong)])


def test_c_estimator_flag(tmp_path):
    out = tmp_path / "s.json"
    cli.main(["run", "--problem", "loglinear", "--g", "3,4", "--c-estimator", "global-L", "--max-iters", "3",
              "--out", str(tmp_path / "t.csv"), "--json-summary", str(out), "--no-timing"])
    meta = json.loads(out.read_text())["problem"]
    assert meta["C"] == 17.0 and meta["gcs_method"] == "global-L"
    cli.main(["run", "--problem", "lasso", "--solver", "homotopy", "--c-estimator", "practical", "--max-iters", "3",
              "--out", str(tmp_path / "t.csv"), "--json-summary", str(out), "--no-timing"])
    meta = json.loads(out.read_text())["problem"]
    assert meta["gcs_method"] == "practical-adaptive"


def test_log_level_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("ACCMD_LOG", "info")
    assert cli.main(["run", "--problem", "counterexample", "--max-iters", "3", "--no-timing"]) == 0

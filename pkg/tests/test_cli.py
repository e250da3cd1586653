import csv
import json

import pytest

from mfwsn.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(text.splitlines()))


def test_q_curve_uniform(capsys):
    code, out, _ = run(capsys, "q-curve", "--i-max", "10", "--n-points", "11")
    assert code == 0
    table = rows(out)
    assert table[0] == ["i", "q"]
    q = {float(i): float(v) for i, v in table[1:]}
    assert abs(q[1.0] - 1) < 1e-9
    assert 0.15 < q[10.0] < 0.25


def test_q_curve_lognormal_decays(capsys):
    _, out, _ = run(capsys, "q-curve", "--spatial", "lognormal", "--i-max", "40",
                    "--n-points", "9")
    q = [float(v) for _, v in rows(out)[1:]]
    assert q[-1] < q[2] < 1


def test_q_curve_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["q-curve", "--n-points", "0"])
    assert info.value.code == 2
    code, _, err = run(capsys, "q-curve", "--z", "-1")
    assert code == 2 and "z" in err


def test_transform_aloha(capsys, tmp_path):
    listing = tmp_path / "aloha.json"
    code, out, _ = run(capsys, "transform", "aloha3.json", "--json", str(listing))
    assert code == 0
    assert out.count("d x_") == 3 and "q(N*x_T)" in out
    data = json.loads(listing.read_text())
    assert [t["label"] for t in data["transitions"]] == ["generate", "capture", "failure",
                                                         "resend"]


def test_transform_discovery_json(capsys):
    code, out, _ = run(capsys, "transform", "discovery6.json", "--convention",
                       "interference-total", "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data["states"]) == 6
    assert data["metadata"]["convention"] == "interference-total"


def test_transform_unknown_convention():
    with pytest.raises(SystemExit) as info:
        main(["transform", "discovery6.json", "--convention", "nearest"])
    assert info.value.code == 2


def test_bad_model_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"states": ["A"],')
    code, _, err = run(capsys, "transform", str(bad))
    assert code == 2 and "line" in err
    code, _, _ = run(capsys, "transform", str(tmp_path / "missing.json"))
    assert code == 2


def test_missing_required_flag():
    with pytest.raises(SystemExit) as info:
        main(["compare", "aloha3.json"])
    assert info.value.code == 2


def test_integrate_writes_csv_and_manifest(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code, _, _ = run(capsys, "integrate", "aloha3.json", "--N", "90", "--x0", "O=1",
                     "--T", "2000", "--n-out", "21", "--out", str(out))
    assert code == 0
    table = rows(out.read_text())
    assert table[0] == ["t", "x_0", "x_1", "x_2"]
    last = [float(v) for v in table[-1]]
    assert last[0] == 2000.0 and last[3] < 0.02
    manifest = json.loads((tmp_path / "traj.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "integrate"
    assert manifest["tolerances"]["rtol"] == 1e-8
    assert len(manifest["model_hash"]) == 64


def test_integrate_large_n_matches_balance_equation(capsys, aloha):
    # beyond the fold of the good branch only the congested equilibrium exists
    from test_odes import aloha_equilibria
    (oracle,) = aloha_equilibria(aloha.channel, 500)
    _, out, _ = run(capsys, "integrate", "aloha3.json", "--N", "500", "--x0", "O=1",
                    "--T", "2000", "--n-out", "3")
    last = [float(v) for v in rows(out)[-1][1:]]
    assert max(abs(a - b) for a, b in zip(last, oracle)) < 1e-4


def test_bad_x0_exit_2(capsys):
    code, _, err = run(capsys, "integrate", "aloha3.json", "--x0", "O=0.6,T=0.5")
    assert code == 2 and "sum" in err


def test_numeric_failure_exit_3(capsys):
    code, _, err = run(capsys, "fixpoints", "aloha3.json", "--tol", "1e-30", "--T", "10")
    assert code == 3 and "numeric" in err


def test_fixpoints_bistable(capsys):
    code, out, _ = run(capsys, "fixpoints", "aloha3.json")
    fps = json.loads(out)
    assert code == 0 and len(fps) == 2
    assert all(f["residual"] < 1e-10 for f in fps)


def test_basin_two_labels(capsys, tmp_path):
    out = tmp_path / "basin.csv"
    code, _, _ = run(capsys, "basin", "aloha3.json", "--axes", "O,R", "--resolution", "6",
                     "--out", str(out))
    table = rows(out.read_text())
    assert code == 0 and table[0] == ["axis_i", "axis_j", "fixpoint_index"]
    assert {r[2] for r in table[1:]} == {"0", "1"}
    assert len(table) - 1 == 21


def test_basin_bad_axes(capsys):
    code, _, _ = run(capsys, "basin", "aloha3.json", "--axes", "O,Q", "--resolution", "4")
    assert code == 2


def test_field_export(capsys):
    code, out, _ = run(capsys, "field", "aloha3.json", "--axes", "O,R", "--resolution", "3")
    table = rows(out)
    assert code == 0 and len(table) == 7 and table[0][-1] == "dx_2"


def test_simulate_byte_identical(capsys, tmp_path):
    args = ["simulate", "aloha3.json", "--N", "50", "--x0", "T=1", "--T", "20",
            "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    table = rows(a.read_text())
    assert table[1] == ["0.0", "0.0", "1.0", "0.0"]


def test_compare_small(capsys, tmp_path):
    out = tmp_path / "cmp.csv"
    code, _, _ = run(capsys, "compare", "aloha3.json", "--Ns", "20,40", "--replications",
                     "2", "--T", "10", "--seed", "7", "--out", str(out))
    table = rows(out.read_text())
    assert code == 0 and table[0] == ["N", "mean_sup_error", "std_sup_error"]
    meta = json.loads((tmp_path / "cmp.csv.manifest.json").read_text())
    assert meta["results"]["seed"] == 7 and meta["results"]["grid_points"] == 1000


def test_tabulated_q_close_to_direct(capsys):
    _, direct, _ = run(capsys, "integrate", "discovery6.json", "--T", "5", "--n-out", "2")
    _, table, _ = run(capsys, "integrate", "discovery6.json", "--T", "5", "--n-out", "2",
                      "--q-table", "256")
    a = [float(v) for v in rows(direct)[-1]]
    b = [float(v) for v in rows(table)[-1]]
    assert max(abs(x - y) for x, y in zip(a, b)) < 1e-3

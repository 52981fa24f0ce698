import csv
import json
from importlib.resources import files

import pytest
from conftest import wide_instance

from clscopt.cli import FRONT_HEADER, STATS_HEADER, main
from clscopt.instances import oracle_tiny, tabletop
from clscopt.model import Solution, check_feasibility, dump_instance

DATA = files("clscopt") / "data"


@pytest.fixture
def desk_path(tmp_path):
    path = tmp_path / "tabletop.json"
    path.write_text(dump_instance(tabletop()))
    return path


@pytest.fixture
def tiny_path(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(dump_instance(oracle_tiny()))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_bundled_files_match_generators():
    assert (DATA / "tabletop.json").read_text() == dump_instance(tabletop())
    assert (DATA / "oracle_tiny.json").read_text() == dump_instance(oracle_tiny())


def test_validate_bundled(capsys):
    assert main(["validate", "--instance", str(DATA / "tabletop.json")]) == 0
    assert "valid" in capsys.readouterr().out


def test_validate_truncated_file(tmp_path, desk_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text(desk_path.read_text()[:250])
    assert main(["validate", "--instance", str(broken)]) == 2
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_validate_missing_file(tmp_path):
    assert main(["validate", "--instance", str(tmp_path / "none.json")]) == 2


def test_validate_bad_probabilities(tmp_path, desk_path, capsys):
    doc = json.loads(desk_path.read_text())
    doc["scenarios"][1]["probability"] = 0.4
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", "--instance", str(bad)]) == 1
    assert "probabilities sum to 0.9" in capsys.readouterr().err


def test_validate_missing_field(tmp_path, desk_path, capsys):
    doc = json.loads(desk_path.read_text())
    del doc["alpha"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", "--instance", str(bad)]) == 1
    assert "alpha" in capsys.readouterr().err


def test_gen_instance_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gen-instance", "--template", "tabletop", "--seed", "3", "--out", str(a)]) == 0
    assert main(["gen-instance", "--template", "tabletop", "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["validate", "--instance", str(a)]) == 0
    c = tmp_path / "c.json"
    main(["gen-instance", "--template", "tabletop", "--seed", "4", "--out", str(c)])
    assert c.read_bytes() != a.read_bytes()


def test_gen_instance_unwritable(tmp_path):
    out = tmp_path / "missing-dir" / "x.json"
    assert main(["gen-instance", "--template", "oracle-tiny", "--out", str(out)]) == 2


def test_solve_nsga2_outputs(desk_path, tmp_path, capsys):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    args = ["solve", "--instance", str(desk_path), "--method", "nsga2", "--seed", "7",
            "--pop", "20", "--gens", "15"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert "front size" in capsys.readouterr().out
    for name in ("front.csv", "solutions.json", "stats.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    rows = read_rows(out1 / "front.csv")
    assert rows[0] == FRONT_HEADER
    keys = [(float(r[2]), float(r[3]), -float(r[4])) for r in rows[1:]]
    assert keys == sorted(keys)
    assert all(len(x.split(".")[1]) == 6 for r in rows[1:] for x in r[2:])
    assert read_rows(out1 / "stats.csv")[0] == STATS_HEADER


def test_solutions_json_round_trip_and_audit(desk_path, tmp_path):
    out = tmp_path / "r"
    main(["solve", "--instance", str(desk_path), "--method", "nsga2", "--pop", "20",
          "--gens", "5", "--out", str(out)])
    text = (out / "solutions.json").read_text()
    doc = json.loads(text)
    assert json.dumps(doc, indent=2) + "\n" == text
    inst = tabletop()
    for entry in doc["solutions"]:
        sol = Solution.from_json(entry, inst)
        assert check_feasibility(inst, sol).feasible
        assert Solution.from_json(json.loads(json.dumps(sol.to_json(inst))), inst) == sol
        assert set(entry["flows"][0]) == {"Ya", "Yb", "Yc", "Yd", "Ye"}


def test_solve_wsum_corners(desk_path, tmp_path):
    out = tmp_path / "w"
    assert main(["solve", "--instance", str(desk_path), "--method", "wsum", "--grid", "1",
                 "--out", str(out)]) == 0
    assert len(read_rows(out / "front.csv")) == 1 + 3
    assert not (out / "stats.csv").exists()


def test_compare_report(tiny_path, tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["compare", "--instance", str(tiny_path), "--pop", "40", "--gens", "100",
                 "--out", str(out)]) == 0
    report = json.loads((out / "compare.json").read_text())
    assert report["coverage_ga_ws_tol"] == 1.0
    assert report["hypervolume_union"] >= report["hypervolume_ga"] - 1e-9
    assert report["hypervolume_union"] >= report["hypervolume_ws"] - 1e-9
    assert len(report["utopia"]) == 3
    methods = {r[1] for r in read_rows(out / "compare.csv")[1:]}
    assert methods == {"nsga2", "wsum"}
    assert "C(GA, WS)" in capsys.readouterr().out


def test_tractability_exit_code(tmp_path):
    path = tmp_path / "wide.json"
    path.write_text(dump_instance(wide_instance(7)))
    assert main(["solve", "--instance", str(path), "--method", "wsum", "--out",
                 str(tmp_path / "o")]) == 3


def test_bad_option_value(desk_path, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--instance", str(desk_path), "--method", "nsga2", "--pop", "3",
              "--out", str(tmp_path)])
    assert exc.value.code == 2

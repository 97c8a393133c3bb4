import csv
import json

import pytest

from semimap.cli import fixture_path, main


def run(args, capsys):
    rc = main(args)
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_analyze_report_structure(tmp_path, capsys):
    out = tmp_path / "r.json"
    rc, _, _ = run(["analyze", "--map", str(fixture_path("ex_cbrt_x")),
                    "--point", "0,0", "--out", str(out)], capsys)
    assert rc == 0
    rep = json.loads(out.read_text())
    assert set(rep) == {"tool_version", "config_echo", "verdicts", "evidence",
                        "budgets", "seed"}
    assert rep["verdicts"]["classification"] == "regular"
    assert rep["verdicts"]["nu_value"] == pytest.approx(1.0, abs=1e-4)


def test_degree_subcommand(tmp_path, capsys):
    out = tmp_path / "d.json"
    rc, _, _ = run(["degree", "--map", str(fixture_path("complex_square")),
                    "--target", "1,0", "--ball", "0,0,2",
                    "--out", str(out)], capsys)
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["verdicts"]["degree"] == 2
    assert rep["verdicts"]["oracle_agrees"]


def test_sard_subcommand_with_grid(tmp_path, capsys):
    out = tmp_path / "s.json"
    grid = tmp_path / "g.csv"
    rc, _, _ = run(["sard", "--map", str(fixture_path("ex_sqrt_abs")),
                    "--box=-1,1,-1,1", "--resolution", "9",
                    "--out", str(out), "--grid-out", str(grid)], capsys)
    assert rc == 0
    assert json.loads(out.read_text())["verdicts"]["occupancy_decreasing"]
    rows = list(csv.reader(grid.open()))
    assert len(rows) == 81
    assert all(len(r) == 3 for r in rows)
    # regularity proxy is undefined on the guard line x1 = 0
    nan_rows = [r for r in rows if r[2] == "nan"]
    assert nan_rows
    assert all(float(r[0]) == 0.0 for r in nan_rows)


def test_implicit_subcommand(tmp_path, capsys):
    out = tmp_path / "i.json"
    mapfile = tmp_path / "rel.map"
    mapfile.write_text("map rel(x1, x2) = (x2 - x1 * x1 * x1)\n")
    rc, _, _ = run(["implicit", "--map", str(mapfile), "--point", "0",
                    "--target", "0", "--box=-1,1", "--out", str(out)], capsys)
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["verdicts"]["cells_diverged"] == 0
    assert rep["evidence"]["max_residual"] < 1e-9


def test_selftest(capsys):
    rc, out, _ = run(["selftest", "--seed", "0"], capsys)
    assert rc == 0
    assert json.loads(out)["verdicts"]["all_pass"]


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.map"
    bad.write_text("map f(x1) = (x1 +)\n")
    rc, _, err = run(["analyze", "--map", str(bad), "--point", "0"], capsys)
    assert rc == 2
    assert "parse error" in err


def test_missing_file_exit_code(capsys):
    rc, _, err = run(["analyze", "--map", "/nonexistent.map", "--point", "0"],
                     capsys)
    assert rc == 2


def test_seeded_reports_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["degree", "--map", str(fixture_path("complex_cube")),
            "--target", "1,0", "--ball", "0,0,2", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()

    c = tmp_path / "c.json"
    assert main(["global", "--map", str(fixture_path("identity2")),
                 "--seed", "3", "--out", str(c)]) == 0
    d = tmp_path / "d.json"
    assert main(["global", "--map", str(fixture_path("identity2")),
                 "--seed", "3", "--out", str(d)]) == 0
    assert c.read_bytes() == d.read_bytes()

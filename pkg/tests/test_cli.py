import numpy as np
import pytest

from stabledim.cli import main
from stabledim.io import read_csv_rows, read_pgm
from stabledim.torus_dynamics import TowerSpec


def test_region_resolution_gate(capsys):
    assert main(["region", "--resolution", "128"]) == 2


def test_region_outputs(tmp_path, capsys):
    csv, pgm = tmp_path / "r.csv", tmp_path / "r.pgm"
    code = main(["region", "--resolution", "512", "--out-csv", str(csv), "--out-pgm", str(pgm)])
    out = capsys.readouterr().out
    assert code in (0, 1)
    assert "0.600000000000" in out and "0.523809523810" in out
    head = open(csv, encoding="utf-8").readline()
    assert head.startswith("# paper-check: region")
    rows = dict(read_csv_rows(csv)[1:])
    assert 0 < float(rows["ratio"]) < 1
    assert read_pgm(pgm).shape == (512, 512)


def test_cover_examples(tmp_path, capsys):
    csv = tmp_path / "c.csv"
    assert main(["cover", "--map", "kind=diag K=4 L=2", "--d", "1.5", "--out-csv", str(csv)]) == 0
    (row,) = read_csv_rows(csv)[1:]
    assert float(row[1]) <= float(row[2]) == pytest.approx(1510.58, abs=0.01)
    assert main(["cover", "--map", "kind=identity", "--d", "2"]) == 0
    assert "534.07" in capsys.readouterr().out


def test_cover_malformed(capsys):
    assert main(["cover", "--map", "kind=diag K=four"]) == 2
    assert main(["cover", "--map", "garbage"]) == 2


def test_dims_examples(capsys):
    assert main(["dims", "0.51", "0.51", "--conservative"]) == 0
    assert "expected" in capsys.readouterr().out
    assert main(["dims", "0.55", "0.55", "--conservative"]) == 1
    assert main(["dims", str(11 / 21), str(11 / 21), "--conservative"]) == 1
    assert main(["dims", "0.2", "0.4"]) == 2


def test_cascade_examples(tmp_path, capsys):
    assert main(["cascade", "--synthetic", "5"]) == 0
    flat = tmp_path / "flat.csv"
    flat.write_text("j,P,Q\n0,0.1,1e-05\n1,1e-05,1e-05\n2,1e-05,1e-05\n")
    assert main(["cascade", "--widths", str(flat)]) == 1
    assert "j=1" in capsys.readouterr().out
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["cascade", "--widths", str(empty)]) == 2


def test_affine_suite(tmp_path, capsys):
    csv = tmp_path / "a.csv"
    assert main(["affine", "--pairs", "20", "--seed", "1", "--out-csv", str(csv)]) == 0
    assert all(r[1] == "true" for r in read_csv_rows(csv)[1:])


def test_affine_map_file(tmp_path, capsys):
    f = tmp_path / "m.txt"
    f.write_text("kind=linear\ndomain_s=0,1\ndomain_u=0,1\ncodomain_s=0,1\ncodomain_u=0,1\n"
                 "A=0,0.3333333333333333,0\nB=0,0,0.3333333333333333\n")
    assert main(["affine", "--map-file", str(f)]) == 0
    f.write_text("kind=linear\n")
    assert main(["affine", "--map-file", str(f)]) == 2


def test_tower_input_errors(capsys):
    assert main(["tower", "--eps", "0.25", "--n-height", "60", "--seed", "1"]) == 2
    assert "65" in capsys.readouterr().err
    assert main(["tower", "--eps", "1.5", "--seed", "1"]) == 2


def test_tower_small(tmp_path, capsys):
    prefix = str(tmp_path / "t")
    args = ["tower", "--eps", "0.5", "--n-height", "19", "--samples", "2000", "--seed", "3",
            "--cloud", "10000", "--grid", "32", "--out-prefix", prefix]
    assert main(args) == 0
    spec = TowerSpec.from_kv(open(prefix + ".spec.txt", encoding="utf-8").read())
    assert spec.N == 19 and len(spec.centers) == spec.m
    rows = read_csv_rows(prefix + ".escape.csv")
    assert rows[0] == ["sample", "x", "y", "escape_time", "ok"]
    assert len(rows) == 2001 and all(r[4] == "1" for r in rows[1:])
    assert np.all(read_pgm(prefix + ".field.pgm") == 255)

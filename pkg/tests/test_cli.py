import csv
import io
import subprocess
import sys

import pytest

from conftest import EXAMPLE_TEXT
from packlab.cli import CSV_HEADER, main
from packlab.instance import parse_instance
from packlab.pipeline import BinSolution, verify


@pytest.fixture
def example_file(tmp_path):
    p = tmp_path / "example.txt"
    p.write_text(EXAMPLE_TEXT + "\n")
    return p


def test_gen_writes_parseable_instance(tmp_path, capsys):
    assert main(["gen", "--kind", "three_partition", "--n", "30", "--seed", "4"]) == 0
    inst = parse_instance(capsys.readouterr().out)
    assert inst.total_items == 30
    out = tmp_path / "i.txt"
    assert main(["gen", "--n", "12", "--seed", "4", "-o", str(out)]) == 0
    assert parse_instance(out.read_text()).total_items == 12


def test_gen_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("PACKLAB_SEED", "7")
    main(["gen", "--n", "20"])
    a = capsys.readouterr().out
    main(["gen", "--n", "20", "--seed", "7"])
    assert capsys.readouterr().out == a
    monkeypatch.setenv("PACKLAB_SEED", "seven")
    assert main(["gen", "--n", "20"]) == 2


@pytest.mark.parametrize("algo", ["paper", "kk", "ff", "ffd"])
def test_solve_each_algorithm(example_file, tmp_path, capsys, algo):
    out = tmp_path / "sol.json"
    assert main(["solve", str(example_file), "--algo", algo, "--seed", "1", "-o", str(out)]) == 0
    line = capsys.readouterr().out
    assert line.startswith(f"{algo} bins=") and "opt_f=1.500000" in line
    sol = BinSolution.from_json(out.read_text())
    assert verify(parse_instance(EXAMPLE_TEXT), sol).ok
    assert sol.meta["seed"] == 1


def test_usage_errors(example_file, tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("0.5 2\n1.5 1\n")
    assert main(["solve", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["solve", str(example_file), "--sigma-small", "1/3"]) == 2
    assert main(["bench"]) == 2
    assert main(["bench", "--kinds", "uniform"]) == 2
    assert main(["bench", str(example_file), "--algos", "ffd,magic"]) == 2
    assert main(["gen", "--n", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 2


def read_rows(text):
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == CSV_HEADER
    return rows[1:]


def test_bench_rows_and_determinism(example_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = [str(example_file), "--kinds", "uniform,three_partition", "--sizes", "20,40",
            "--algos", "ffd,ff,kk,paper", "--seeds", "0,1"]
    assert main(["bench", *args, "-o", str(a)]) == 0
    assert main(["bench", *args, "--jobs", "2", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_rows(a.read_text())
    assert len(rows) == 5 * 4 * 2
    for r in rows:
        name, n, items, opt_f, algo, bins, gap, seed, ms = r
        assert int(bins) - int(gap) >= float(opt_f) - 1e-6
        assert ms == "0.0"
    assert main(["bench", str(example_file), "--algos", "ffd", "--append", "-o", str(a)]) == 0
    assert len(read_rows(a.read_text())) == 41


def test_module_entry_point(example_file):
    res = subprocess.run([sys.executable, "-m", "packlab", "solve", str(example_file), "--algo", "ffd"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("ffd bins=2")

import csv
import subprocess
import sys

import pytest

from ubli.cli import main
from ubli.experiments import planted_config


@pytest.fixture
def config(small_fixture):
    return planted_config(small_fixture, codes=("M1", "M2", "M3"), stall_patience=3)


def test_matrix_prints_table_and_writes_csv(config, tmp_path, capsys):
    assert main(["matrix", "--config", str(config), "--out-dir", str(tmp_path), "--threads", "2"]) == 0
    out = capsys.readouterr().out
    assert "M1" in out and "M3" in out and "*" in out
    rows = list(csv.DictReader(open(tmp_path / "results.csv")))
    assert [r["code"] for r in rows] == ["M1", "M2", "M3"]
    assert float(rows[0]["delta_vs_baseline"]) == 0.0


def test_run_selected_plan(config, tmp_path, capsys):
    assert main(["run", "--config", str(config), "--plan", "M2", "--out-dir", str(tmp_path), "--seed", "5"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "results.csv")))
    assert [(r["code"], r["seed"]) for r in rows] == [("M2", "5")]


def test_unknown_plan_exits(config):
    with pytest.raises(SystemExit, match="M9"):
        main(["run", "--config", str(config), "--plan", "M9"])


def test_sweep_needs_one_plan(config):
    with pytest.raises(SystemExit, match="exactly one"):
        main(["sweep-alpha", "--config", str(config)])


def test_sweep_alpha_small_grid(config, capsys):
    assert main(["sweep-alpha", "--config", str(config), "--plan", "M1", "--grid=-0.25,0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3


def test_sweep_minfreq(config, capsys):
    assert main(["sweep-minfreq", "--config", str(config), "--plan", "M1", "--thresholds", "1,2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[0] == "min_freq" and len(lines) == 3


def test_failing_plan_gives_exit_one(small_fixture, tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(f"[DEFAULT]\nsrc_embeddings = {small_fixture / 'src.vec'}\n"
                    f"trg_embeddings = {tmp_path / 'missing.vec'}\ngold = {small_fixture / 'gold.tsv'}\n\n[M1]\n")
    assert main(["matrix", "--config", str(path)]) == 1
    assert "error" in capsys.readouterr().out


def test_missing_config_gives_exit_two(tmp_path, capsys):
    assert main(["matrix", "--config", str(tmp_path / "none.ini")]) == 2
    assert "error" in capsys.readouterr().err


def test_eval(tmp_path, capsys):
    (tmp_path / "r.tsv").write_text("a\tz x\nb\ty\n", encoding="utf-8")
    (tmp_path / "g.tsv").write_text("a\tx\nb\ty\nc\tq\n", encoding="utf-8")
    assert main(["eval", "--ranked", str(tmp_path / "r.tsv"), "--gold", str(tmp_path / "g.tsv"),
                 "--k", "1,2", "--out", str(tmp_path / "rep.csv")]) == 0
    out = capsys.readouterr().out
    assert "pr@1 = 50.00  (1/2)" in out and "pr@2 = 100.00" in out and "skipped_oov = 1" in out
    assert (tmp_path / "rep.csv").exists()


def test_curate(tmp_path, capsys):
    (tmp_path / "s.vec").write_text("2 2\ndog 1 0\ncolombo 0 1\n", encoding="utf-8")
    (tmp_path / "t.vec").write_text("2 2\nballa 1 0\nkolamba 0 1\n", encoding="utf-8")
    (tmp_path / "p.tsv").write_text("dog\tballa\ncolombo\tkolamba\ncat\tpusa\n", encoding="utf-8")
    (tmp_path / "proper.txt").write_text("colombo\n", encoding="utf-8")
    out = tmp_path / "kept.tsv"
    assert main(["curate", "--pairs", str(tmp_path / "p.tsv"), "--src-embeddings", str(tmp_path / "s.vec"),
                 "--trg-embeddings", str(tmp_path / "t.vec"), "--proper-nouns", str(tmp_path / "proper.txt"),
                 "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == "dog\tballa\n"
    assert "kept 1 of 3" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ubli", "--help"], capture_output=True, text=True, check=True)
    assert "sweep-alpha" in res.stdout

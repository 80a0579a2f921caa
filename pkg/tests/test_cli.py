from __future__ import annotations

import json
import subprocess
import sys

import pytest

from lle_tpa.cli import main
from lle_tpa.outputs import read_rows

TABLE1 = {
    1.1: (0.045, 0.042),
    1.6: (0.185, 0.185),
    2.0: (0.248, 0.245),
    4.0: (0.380, 0.378),
    10.0: (0.474, 0.473),
    20.0: (0.513, 0.513),
}


def run(tmp_path, *argv):
    return main([argv[0], "--out-dir", str(tmp_path), *argv[1:]])


def test_critical_kappa_prints_table_value(tmp_path, capsys):
    assert run(tmp_path, "critical-kappa", "--f", "1.6") == 0
    assert capsys.readouterr().out.strip() == "0.185"


def test_nonexistence_kappa(tmp_path, capsys):
    assert run(tmp_path, "nonexistence-kappa", "--d", "0.1", "--f", "1.6") == 0
    assert float(capsys.readouterr().out) == pytest.approx(4.88e9, rel=1e-3)


def test_invalid_d_writes_nothing(tmp_path, capsys):
    assert run(tmp_path, "detect-bifurcations", "--d", "0", "--f", "1.6") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["code"] == 2
    assert list(tmp_path.iterdir()) == []


def test_trivial_branch_and_candidates(tmp_path):
    assert run(tmp_path, "trivial-branch", "--f", "1.6", "--n", "101") == 0
    rows = read_rows(tmp_path / "trivial_branch.csv")
    assert len(rows) == 101
    assert run(tmp_path, "detect-bifurcations", "--d", "0.1", "--f", "1.6") == 0
    cands = read_rows(tmp_path / "candidates.csv")
    assert cands and all(r["k"] >= 1 for r in cands)
    manifest = json.loads((tmp_path / "candidates.csv.manifest.json").read_text())
    assert manifest["command"] == "detect-bifurcations"


def test_table1(tmp_path):
    assert run(tmp_path, "table1", "--jobs", "2") == 0
    rows = read_rows(tmp_path / "table1.csv")
    assert len(rows) == 6
    for row in rows:
        star, num = TABLE1[row["f"]]
        assert row["kappa_star"] == pytest.approx(star, abs=1e-3)
        assert row["kappa_num"] == pytest.approx(num, abs=1e-3)


def test_continue_closes(tmp_path, capsys):
    assert run(tmp_path, "continue", "--d", "0.1", "--f", "1.6", "--candidate-index", "0") == 0
    assert capsys.readouterr().out.strip() == "closed"
    side = json.loads((tmp_path / "branch.json").read_text())
    assert side["closed"] and side["n_points"] == len(read_rows(tmp_path / "branch.csv"))


def test_continue_bad_index(tmp_path):
    code = run(tmp_path, "continue", "--d", "0.1", "--f", "1.6", "--candidate-index", "999")
    assert code == 2
    assert list(tmp_path.iterdir()) == []


def test_evolve_and_rerun_is_byte_identical(tmp_path):
    args = ["evolve", "--d", "0.1", "--f", "1.6", "--kappa", "0.6", "--zeta", "2",
            "--tmax", "0.5", "--modes", "32", "--stride", "50"]
    assert run(tmp_path, *args) == 0
    series = tmp_path / "series.csv"
    first = series.read_bytes()
    manifest = tmp_path / "series.csv.manifest.json"
    series.unlink()
    assert main(["rerun", str(manifest)]) == 0
    assert series.read_bytes() == first


def test_evolve_bad_init(tmp_path):
    code = run(tmp_path, "evolve", "--d", "0.1", "--f", "1.6", "--zeta", "2", "--init", "bogus")
    assert code == 2
    assert list(tmp_path.iterdir()) == []


def test_soliton_rejects_normal_dispersion(tmp_path):
    assert run(tmp_path, "soliton", "--d", "-0.1") == 2


@pytest.mark.slow
def test_soliton_command(tmp_path):
    args = ["soliton", "--modes", "256"]
    assert run(tmp_path, *args) == 0
    profile = read_rows(tmp_path / "profile.csv")
    periodic = read_rows(tmp_path / "profile_periodic.csv")
    assert len(profile) == 257
    assert periodic[0]["zeta"] == pytest.approx(10.0)


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "lle_tpa", "critical-kappa", "--f", "2"],
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "0.248"

import json

import pytest

from spmatch.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and out.startswith("spmatch ") and "model format" in out


def test_usage_errors(capsys):
    assert run(capsys)[0] == 1
    assert run(capsys, "audit", "--mech", "nonsense", "--n", "2")[0] == 1
    assert run(capsys, "eval", "--mech", "alg1")[0] == 1
    code, _, err = run(capsys, "audit", "--mech", "alg1", "--n", "2", "--props", "fairness")
    assert code == 1 and "fairness" in err


def test_enumerate(capsys):
    code, out, _ = run(capsys, "enumerate", "--n", "2", "--limit", "3", "--orbits", "--symmetry")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "profiles: 16"
    assert lines[1].startswith("orbit representatives:")
    assert lines[2] == "0\t2 2 | s1:0,1 s2:0,1 | c1:0,1 c2:0,1"
    assert len(lines) == 5
    assert run(capsys, "enumerate", "--n", "9")[0] == 3


def test_eval(capsys):
    code, out, _ = run(capsys, "eval", "--mech", "alg1", "--profile", "2 2 | s1:0,1 s2:0,1 | c1:0,1 c2:0,1")
    assert code == 0 and "stv=0.000000" in out
    code, out, _ = run(capsys, "eval", "--mech", "rsd2", "--profile", "5", "--n", "2")
    assert code == 0 and "waste=0.000000" in out
    code, out, _ = run(capsys, "eval", "--mech", "sd:s1,s2", "--n", "2")
    assert code == 0 and "average_stv=" in out


def test_audit_exit_codes(capsys):
    code, out, _ = run(capsys, "audit", "--mech", "alg1", "--n", "2")
    # a deterministic rule cannot treat the two sides symmetrically at the conflict profile
    assert code == 2 and out.count("PASS") == 3 and "symmetric        FAIL" in out
    assert run(capsys, "audit", "--mech", "sym(alg1)", "--n", "2")[0] == 0
    code, out, _ = run(capsys, "audit", "--mech", "sd:s1,s2", "--n", "2", "--props", "anonymous,strategyproof", "--json")
    assert code == 2
    reports = [json.loads(line) for line in out.splitlines()]
    assert [r["pass"] for r in reports] == [False, True]
    assert reports[0]["witness"]["group"].startswith("pi_s")


def test_audit_size_gate(capsys):
    assert run(capsys, "audit", "--mech", "sd:nat", "--n", "6")[0] == 3
    code, out, _ = run(capsys, "audit", "--mech", "sd:nat", "--n", "6", "--props", "nonwasteful", "--sampled", "5", "--force-sampled")
    assert code == 0 and "sampled 5" in out
    # global flag given before the subcommand works too
    assert run(capsys, "--force-sampled", "audit", "--mech", "sd:nat", "--n", "6", "--props", "nonwasteful", "--sampled", "5")[0] == 0


def test_build_models(capsys, tmp_path):
    code, out, _ = run(capsys, "build-lp", "--n", "2", "--objective", "B", "--out", str(tmp_path / "m.mps"))
    assert code == 0
    summary = json.loads(out)
    assert summary["vars"] == 129 and summary["format_version"] == "1"
    assert json.loads((tmp_path / "m.json").read_text()) == summary
    code, _, _ = run(capsys, "build-ip", "--n", "2", "--out", str(tmp_path / "i.mps"), "--strict")
    assert code == 0 and "MARKER" in (tmp_path / "i.mps").read_text()
    code, _, err = run(capsys, "build-lp", "--n", "3", "--out", str(tmp_path / "big.mps"))
    assert code == 3 and "419904" in err


def test_solve_import_extract(capsys, tmp_path):
    sol = tmp_path / "sol.txt"
    code, out, _ = run(capsys, "solve", "--n", "2", "--nonwasteful", "--anonymity", "--symmetry", "--out", str(sol))
    assert code == 0 and "status=optimal" in out and "average_stv=0.000000" in out
    flags = ["--n", "2", "--nonwasteful", "--anonymity", "--symmetry"]
    code, out, _ = run(capsys, "import-solution", *flags, "--solution", str(sol))
    assert code == 0 and out.startswith("feasible=True")
    tab = tmp_path / "mech.csv"
    code, _, _ = run(capsys, "extract", *flags, "--solution", str(sol), "--out", str(tab))
    assert code == 0 and "profile_index,s,c,prob" in tab.read_text().splitlines()[:2]
    code, out, _ = run(capsys, "audit", "--mech", f"tab:{tab}", "--n", "2")
    assert code == 0 and "FAIL" not in out
    # a solution for a different model is rejected by name
    code, _, err = run(capsys, "import-solution", "--n", "2", "--solution", str(sol))
    assert code == 1 and "misses" in err
    lines = sol.read_text().splitlines()
    sol.write_text("\n".join([lines[0].split()[0] + " 7.5"] + lines[1:]))  # x above its bound
    assert run(capsys, "import-solution", *flags, "--solution", str(sol))[0] == 2


def test_simulate(capsys, tmp_path):
    code, out, _ = run(
        capsys, "simulate", "--n", "2..3", "--reps", "10", "--seed", "1", "--mechs", "alg3:nat,sd:nat",
        "--out", str(tmp_path / "r.csv"), "--aggregate", str(tmp_path / "a.csv"), "--plot-dir", str(tmp_path / "p"),
    )
    assert code == 0 and "alg3:nat - sd:nat" in out
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 1 + 2 * 10 * 2
    assert any((tmp_path / "p").iterdir())
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n = 2\nreps = 4\nmechs = rsd2\n")
    code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--threads", "2")
    assert code == 0 and out.startswith("n=2")
    assert run(capsys, "simulate", "--n", "3", "--reps", "2", "--mechs", "alg1")[0] == 1


def test_tables_small_market(capsys, tmp_path):
    report = tmp_path / "t.txt"
    code, out, _ = run(capsys, "tables", "--n", "2", "--lp", "--reduce", "--report", str(report))
    assert code == 0
    assert "Alg1" in out and "0 row(s) deviate" in out
    assert report.read_text() == out
    assert run(capsys, "tables", "--n", "4")[0] == 1


@pytest.mark.slow
def test_tables_3x3_flags_alg2_prime(capsys):
    code, out, _ = run(capsys, "tables", "--n", "3")
    rows = {line.split()[0]: line for line in out.splitlines()}
    assert code == 0
    assert "*" not in rows["SD"] and "*" not in rows["Alg2"] and "*" not in rows["RSD1"]
    assert "*" in rows["Alg2'"]

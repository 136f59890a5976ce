import json
import shutil

import pytest

from adtfree.cli import main

from conftest import PROBLEMS, stub_solver


def test_sat_and_unsat_exit_zero(z3, capsys):
    assert main(["--input", str(PROBLEMS / "reverse.chc"), "--solver", z3.command]) == 0
    assert capsys.readouterr().out.strip() == "sat"
    assert main(["--input", str(PROBLEMS / "reverse_star.chc"), "--solver", z3.command]) == 0
    assert capsys.readouterr().out.strip() == "unsat"


def test_unknown_exits_two(capsys):
    assert main(["--input", str(PROBLEMS / "reverse.chc"), "--solver", stub_solver("unknown").command]) == 2
    assert capsys.readouterr().out.strip() == "unknown: solver answered unknown"


def test_emit_and_trace_without_solver(tmp_path, capsys):
    smt, trace = tmp_path / "out.smt2", tmp_path / "trace.json"
    code = main(["--input", str(PROBLEMS / "reverse.chc"),
                 "--emit-smtlib", str(smt), "--trace", str(trace)])
    assert code == 2
    assert capsys.readouterr().out.strip() == "unknown: no solver configured"
    text = smt.read_text()
    assert text.startswith("(set-logic HORN)") and "(check-sat)" in text
    ledger = json.loads(trace.read_text())
    assert set(ledger) >= {"clauses", "roots", "steps", "marked"}
    assert ledger["roots"]


def test_bad_arguments_exit_one(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--bogus"])
    assert e.value.code == 1
    assert "usage:" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["--input", "a", "--batch", "b"])
    assert e.value.code == 1


def test_missing_or_broken_input(tmp_path, capsys):
    assert main(["--input", str(tmp_path / "none.chc")]) == 1
    bad = tmp_path / "bad.chc"
    bad.write_text(":- pred p(int).\nfalse :- q(X).\n")
    assert main(["--input", str(bad)]) == 1
    assert "2:10" in capsys.readouterr().err


def test_batch_output(tmp_path, z3, capsys):
    for name in ("reverse.chc", "reverse_star.chc", "len_nonneg.chc"):
        shutil.copy(PROBLEMS / name, tmp_path / name)
    assert main(["--batch", str(tmp_path), "--solver", z3.command, "--workers", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "problem\tverdict\twall-time-ms\titerations\tdefs-introduced\tmarked-clauses"
    rows = {ln.split("\t")[0]: ln.split("\t") for ln in out[1:4]}
    assert rows["reverse.chc"][1] == "sat" and rows["reverse_star.chc"][1] == "unsat"
    assert rows["reverse.chc"][4] == "3"
    table = "\n".join(out[5:])
    assert "valid" in table and "invalid" in table and "total" in table

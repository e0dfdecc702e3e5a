import json

import pytest
from click.testing import CliRunner

from cousinforge.cli import cli

FRAC = "[1 ⊗ dT / (T - u)]#C"
RING = "Q[[u]][[T]]/(u^2 on M)"


@pytest.fixture
def runner():
    return CliRunner()


def test_build_E_example(runner):
    r = runner.invoke(cli, ["build-E", "--ring", "Z", "--module", "Z", "--bound", "5"])
    assert r.exit_code == 0, r.output
    art = json.loads(r.output)
    assert art["schema"] == "v1"
    assert [x["name"] for x in art["complex"]["poset"]["points"]] == ["η", "(2)", "(3)", "(5)"]
    assert art["residual"]["ok"] is True
    assert art["homology"]["0"]["free"] == 1


def test_pseudofunctor_example(runner):
    r = runner.invoke(cli, ["check", "pseudofunctor", "--depth", "3", "--seed", "7"])
    assert r.exit_code == 0, r.output


def test_fraction_example(runner):
    r = runner.invoke(cli, ["fractions", "eval", FRAC, "--ring", RING])
    assert r.exit_code == 0 and r.output.strip() == "[1/T] + [u/T^2]"
    r = runner.invoke(cli, ["fractions", "eval", FRAC, "--ring", RING, "--json"])
    assert json.loads(r.output)["class"] == "[1/T] + [u/T^2]"


def test_check_failure_exits_one(runner, tmp_path):
    out = tmp_path / "report.json"
    r = runner.invoke(cli, ["check", "pseudofunctor", "--drop-twist", "-o", str(out)])
    assert r.exit_code == 1
    rep = json.loads(out.read_text())
    assert rep["schema"] == "v1" and not rep["ok"]


def test_parse_error_exits_two(runner):
    assert runner.invoke(cli, ["fractions", "eval", "[1 ⊗ dT / (T - u)", "--ring", RING]).exit_code == 2
    assert runner.invoke(cli, ["build-E", "--ring", "Z", "--module", "Z^x"]).exit_code == 2
    assert runner.invoke(cli, ["apply-sharp", "--ring", "Z", "--map", "bogus:1"]).exit_code == 2


def test_window_exits_three(runner, monkeypatch):
    assert runner.invoke(cli, ["fractions", "eval", FRAC, "--ring", RING, "--window", "1"]).exit_code == 3
    monkeypatch.setenv("COUSINFORGE_WINDOW", "1")
    assert runner.invoke(cli, ["fractions", "eval", FRAC, "--ring", RING]).exit_code == 3
    monkeypatch.setenv("COUSINFORGE_WINDOW", "6")
    assert runner.invoke(cli, ["fractions", "eval", FRAC, "--ring", RING]).exit_code == 0


def test_deterministic(runner):
    args = ["apply-sharp", "--ring", "Z", "--module", "Z", "--bound", "3", "--map", "smooth-A1:T"]
    a, b = runner.invoke(cli, args), runner.invoke(cli, args)
    assert a.exit_code == 0 and a.output == b.output
    assert json.loads(a.output)["complex"]["meta"]["regime"] == "A1-over-Z"


def test_artifact_roundtrip(runner, tmp_path):
    src = tmp_path / "E.json"
    r = runner.invoke(cli, ["build-E", "--ring", "Q[y]", "--module", "Q[y]", "--bound", "1,1", "-o", str(src)])
    assert r.exit_code == 0, r.output
    direct = runner.invoke(cli, ["homology", "--ring", "Q[y]", "--module", "Q[y]", "--bound", "1,1"])
    via = runner.invoke(cli, ["homology", "--input", str(src)])
    assert via.exit_code == 0 and via.output == direct.output


def test_poset_dot(runner):
    r = runner.invoke(cli, ["poset-dot", "--ring", "Z", "--module", "Z", "--bound", "3"])
    assert r.exit_code == 0 and r.output.startswith("digraph")


def test_dual(runner):
    r = runner.invoke(cli, ["dual", "--ring", "Q[[T1,T2]]/(T1^3)", "--cyclic", "T1^2,T2"])
    assert r.exit_code == 0, r.output
    assert json.loads(r.output)["double_dual"]["is_iso"] is True


def test_run_job(runner, tmp_path):
    out = tmp_path / "out.json"
    job = tmp_path / "job.json"
    job.write_text(json.dumps({"schema": "v1", "command": "build-E", "output": str(out),
                               "parameters": {"ring": "Z", "module": "Z", "bound": "5"}}))
    assert runner.invoke(cli, ["run", str(job)]).exit_code == 0
    direct = runner.invoke(cli, ["build-E", "--ring", "Z", "--module", "Z", "--bound", "5"])
    assert out.read_text() == direct.output
    job.write_text(json.dumps({"command": "build-E"}))
    assert runner.invoke(cli, ["run", str(job)]).exit_code == 2

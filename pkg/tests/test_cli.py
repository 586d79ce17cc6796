from __future__ import annotations

import json

import pytest

from conftest import BOTTOMS, FIXTURES

from realmgraph.cli import main
from realmgraph.workspace import corpus_files, load

GROUPS = [str(p) for p in corpus_files() if p.name == "groups.thy"]

VIEWS = """
view v1 : group1 -> circi2 {
  circ |-> circ_sl;
  e |-> e_sl;
  i |-> i_sl;
}

view v2 : group2 -> slash1 {
  slash |-> slash_circ;
}

discharge v1.* by finite-check 4;
discharge v2.* by finite-check 4;
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


def test_check_corpus(capsys):
    code, out = run(capsys, "check")
    assert code == 0 and out.startswith("ok:")


def test_check_failure_as_json(capsys, tmp_path):
    src = tmp_path / "cyc.thy"
    src.write_text("theory a { sort S; }\ntheory b { sort S; }\nedge a -> b;\nedge b -> a;\n"
                   "view v : a -> zz {}\n")
    code, out = run(capsys, "check", src, "--format", "json")
    assert code == 1
    data = json.loads(out)
    assert [d["code"] for d in data["diagnostics"]] == ["WouldCreateCycle", "UnknownTheory"]
    assert data["diagnostics"][0]["line"] == 4


def test_usage_errors(capsys, tmp_path):
    assert main(["bogus"]) == 2
    assert main(["check", str(tmp_path / "missing.thy")]) == 2
    assert main(["export"]) == 2
    capsys.readouterr()


def test_unknown_realm_is_a_failure(capsys):
    code, _ = run(capsys, "realm-validate", "Nope", *GROUPS)
    assert code == 1


def test_validate_negative_fixture_as_json(capsys):
    code, out = run(capsys, "realm-validate", "R", FIXTURES / "negative" / "face_not_primitive.thy",
                    "--format", "json")
    assert code == 1
    data = json.loads(out)
    assert [r["code"] for r in data["rows"] if r["status"] == "fail"] == ["FaceNotPrimitive"]


def test_countermodel_command(capsys):
    code, out = run(capsys, "countermodel", "group1", "a∘b=b∘a", "--max-size", "6", *GROUPS)
    assert code == 0
    assert "countermodel of size 6" in out and "sort G = {0..5}" in out
    code, out = run(capsys, "countermodel", "group1", "a∘b=b∘a", "--max-size", "3", *GROUPS)
    assert code == 1 and "no countermodel" in out
    code, _ = run(capsys, "countermodel", "group1", "a∘b=b∘a", "--max-size", "6",
                  "--budget", "20", *GROUPS)
    assert code == 3


def test_lift_identity_prints_identity_map(capsys, tmp_path):
    extra = tmp_path / "id.thy"
    extra.write_text("view Id : slash1 -> slash1 {}\n")
    code, out = run(capsys, "lift", "Groups", "Groups", "Id", *GROUPS, extra)
    assert code == 0
    for s in ("u_G", "u_circ", "u_e", "u_i", "u_slash"):
        assert f"{s} |-> {s}" in out
    assert out.rstrip().endswith("total")


def test_export_to_file(capsys, tmp_path):
    out_file = tmp_path / "g.json"
    code, _ = run(capsys, "export", "--json", "-o", out_file, *GROUPS)
    assert code == 0
    assert {r["name"] for r in json.loads(out_file.read_text())["realms"]} == {"Groups"}
    code, out = run(capsys, "export", "--dot", *GROUPS)
    assert code == 0 and out.startswith("digraph")


def test_output_may_not_overwrite_an_input(capsys, tmp_path):
    src = tmp_path / "b.thy"
    src.write_text(BOTTOMS)
    before = src.read_text()
    code, _ = run(capsys, "realm-init", "group1", src, "-o", src)
    assert code == 2 and src.read_text() == before


def test_realm_life_cycle_through_files(capsys, tmp_path):
    b = tmp_path / "bottoms.thy"
    b.write_text(BOTTOMS)
    files = [b]

    def step(*argv, out):
        path = tmp_path / out
        code, text = run(capsys, *argv, *files, "-o", path)
        assert code == 0, text
        files.append(path)

    step("realm-init", "group1", "--name", "G1", out="g1.thy")
    step("realm-init", "group2", "--name", "G2", out="g2.thy")
    step("realm-extend", "G1", "p1", 'def slash_circ : G G -> G infix "/∘" := a /∘ b = a ∘ i(b)',
         "--new-top", "slash1", "--name", "G1x", out="g1x.thy")
    step("realm-extend", "G2", "1", "def e_sl : G := e_sl = b / b", "--name", "G2a", out="g2a.thy")
    step("realm-extend", "G2a", "1", "def i_sl : G -> G := i_sl(a) = e_sl / a",
         "--name", "G2b", out="g2b.thy")
    step("realm-extend", "G2b", "1", 'def circ_sl : G G -> G infix "∘/" := a ∘/ b = a / i_sl(b)',
         "--new-top", "circi2", "--name", "G2c", out="g2c.thy")
    views = tmp_path / "views.thy"
    views.write_text(VIEWS)
    files.append(views)
    assert run(capsys, "check", *files)[0] == 0
    step("realm-merge", "G1x", "G2c", "v1", "v2", "--name", "U", out="merged.thy")
    code, out = run(capsys, "realm-validate", "U", *files)
    assert code == 0 and "realm U: valid" in out
    ws = load(files)
    assert ws.ok
    r = ws.graph.realms["U"]
    assert len(r.pillars) == 2
    assert set(ws.graph.theory(r.face).symbols) == {"u_G", "u_circ", "u_e", "u_i", "u_slash"}
    # inputs are never rewritten
    assert b.read_text() == BOTTOMS


@pytest.mark.parametrize("cmd", [["check"], ["realm-validate", "Groups"], ["export", "--json"]])
def test_commands_are_deterministic(capsys, cmd):
    first = run(capsys, *cmd, *GROUPS)
    second = run(capsys, *cmd, *GROUPS)
    assert first == second

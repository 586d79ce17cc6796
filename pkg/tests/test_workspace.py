from __future__ import annotations

from realmgraph.views import Status
from realmgraph.workspace import corpus_files, load_sources


def codes(ws):
    return [d.code for d in ws.diagnostics]


def test_corpus_files_are_bundled():
    names = {p.name for p in corpus_files()}
    assert {"groups.thy", "lifting.thy", "modular.thy"} <= names


def test_references_cross_files():
    ws = load_sources([
        ("b.thy", "theory b extends a { op c : S; }"),
        ("a.thy", "theory a { sort S; }"),
    ])
    assert ws.ok and ws.graph.edge("a", "b") is not None
    assert ws.origin["b"] == "b.thy"


def test_cycles_and_unknown_targets_are_diagnosed():
    ws = load_sources([("c.thy", """
theory a { sort S; }
theory b { sort S; }
edge a -> b;
edge b -> a;
view v : a -> zz {}
""")])
    assert codes(ws) == ["WouldCreateCycle", "UnknownTheory"]
    d = ws.diagnostics[0]
    assert (d.file, d.line, d.column) == ("c.thy", 5, 1)


def test_extends_cycle_is_diagnosed():
    ws = load_sources([("c.thy", "theory a extends b { }\ntheory b extends a { }")])
    assert "WouldCreateCycle" in codes(ws)


def test_duplicate_names():
    ws = load_sources([("a.thy", "theory a { sort S; }"), ("b.thy", "theory a { sort T; }")])
    assert codes(ws) == ["DuplicateTheoryName"]


def test_refuted_theorem_justification():
    ws = load_sources([("t.thy", """
theory m { sort S; op f : S S -> S; theorem comm: f(a, b) = f(b, a) by finite-check 2; }
""")])
    assert codes(ws) == ["JustificationFailed"]


def test_open_obligations_are_reported_with_countermodels():
    ws = load_sources([("t.thy", """
theory m { sort S; op f : S S -> S; axiom comm: f(a, b) = f(b, a); }
theory n { sort S; op f : S S -> S; }
view v : m -> n {}
discharge v.comm by finite-check 2;
""")])
    assert codes(ws) == ["ObligationOpen"]
    assert "size 2" in ws.diagnostics[0].message
    assert ws.graph.view("v").obligation("comm").status is Status.OPEN


def test_join_adds_an_embedding_view():
    ws = load_sources([("j.thy", """
theory base { sort S; }
theory l extends base { op a : S; }
theory r extends base { op b : S; }
theory lr = join l r;
""")])
    assert ws.ok, codes(ws)
    g = ws.graph
    assert g.theory("lr").symbols == ("S", "a", "b")
    assert g.edge("l", "lr") is not None
    assert g.view("emb_r_lr").discharged


def test_annotations_complete_realm_blocks():
    ws = load_sources([("r.thy", """
theory f in-realm R as face { sort S; }
theory t in-realm R as pillar p bottom { sort T; }
view i : f -> t in-realm R as pillar p interface { S |-> T; }
realm R { pillar p { top t; } }
""")])
    assert ws.ok, codes(ws)
    r = ws.graph.realms["R"]
    assert (r.face, r.pillars[0].bottom, r.pillars[0].top, r.pillars[0].interface) == \
        ("f", "t", "t", "i")


def test_conflicting_annotation_is_an_error():
    ws = load_sources([("r.thy", """
theory f in-realm R as face { sort S; }
theory g { sort S; }
view i : f -> g in-realm R as pillar p interface {}
realm R { face g; pillar p { bottom g; top g; } }
""")])
    assert "ParseError" in codes(ws)


def test_discharge_for_unknown_view():
    ws = load_sources([("d.thy", "discharge nope.* by assumption;")])
    assert codes(ws) == ["UnknownView"]

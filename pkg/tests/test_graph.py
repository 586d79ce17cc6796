from __future__ import annotations

import pytest

from realmgraph.errors import (
    DuplicateTheoryName,
    MultipleSinks,
    NoPath,
    NotAnExtension,
    UnknownTheory,
    WouldCreateCycle,
)
from realmgraph.graph import (
    TheoryGraph,
    Verdict,
    add_extension_edge,
    add_theory,
    classify_edge,
    development,
    fresh_name,
    is_conservative_development,
)
from realmgraph.parser import parse_declaration
from realmgraph.syntax import OpSig, SortSig, Symbol, Theory, theory_cons
from realmgraph.views import View, check_view

S = Theory("S", (Symbol("S", SortSig()),))


def _chain():
    a = theory_cons(S, Symbol("a", OpSig((), "S")), name="A")
    b = theory_cons(a, Symbol("b", OpSig((), "S")), name="B")
    c = theory_cons(a, Symbol("c", OpSig((), "S")), name="C")
    g = TheoryGraph()
    for t in (S, a, b, c):
        g = add_theory(g, t)
    g = add_extension_edge(g, "S", "A")
    g = add_extension_edge(g, "A", "B")
    return add_extension_edge(g, "A", "C")


def test_graph_is_persistent():
    g = _chain()
    g2 = add_theory(g, Theory("X"))
    assert "X" in g2.theories and "X" not in g.theories
    with pytest.raises(DuplicateTheoryName):
        add_theory(g2, Theory("X"))


def test_edges_need_prefix_extensions():
    g = _chain()
    with pytest.raises(NotAnExtension):
        add_extension_edge(g, "B", "C")
    with pytest.raises(UnknownTheory):
        add_extension_edge(g, "A", "Z")
    assert add_extension_edge(g, "A", "B") is g


def test_cycles_are_refused():
    g = add_theory(TheoryGraph(), S)
    g = add_theory(g, S.renamed("S2"))
    g = add_extension_edge(g, "S", "S2")
    with pytest.raises(WouldCreateCycle):
        add_extension_edge(g, "S2", "S")


def test_topological_order_respects_edges():
    g = _chain()
    order = g.topological_order()
    assert order.index("S") < order.index("A") < order.index("B")
    assert g.successors("A") == ["B", "C"] and g.predecessors("B") == ["A"]


def test_development_shapes():
    g = _chain()
    d = development(g, "S", "B")
    assert d.nodes == {"S", "A", "B"} and d.order == ["S", "A", "B"]
    with pytest.raises(NoPath):
        development(g, "B", "S")
    with pytest.raises(MultipleSinks):
        development(g, "A", "B", nodes={"A", "B", "C"})


def test_fresh_names():
    assert fresh_name("x", {"y"}) == "x"
    assert fresh_name("x", {"x", "x_2"}) == "x_3"


def test_definitions_are_syntactically_conservative(groups):
    e = groups.edge("group1", "slash1")
    assert classify_edge(groups, e).verdict is Verdict.SYNTACTIC
    rep = is_conservative_development(groups, development(groups, "group2", "circi2"))
    assert rep.conservative


def test_definition_without_well_definedness_fact():
    g1 = Theory("M", (Symbol("S", SortSig()), Symbol("m", OpSig(("S", "S"), "S"))))
    d = parse_declaration("def k : S := k = m(b, b)", g1)
    g = add_theory(add_theory(TheoryGraph(), g1), theory_cons(g1, d, name="M2"))
    g = add_extension_edge(g, "M", "M2")
    ev = classify_edge(g, g.edge("M", "M2"))
    assert ev.verdict is Verdict.NOT_ESTABLISHED
    assert "well-definedness" in ev.reason


def test_axiom_edge_needs_a_back_view():
    base = Theory("B", (Symbol("S", SortSig()), Symbol("c", OpSig((), "S"))))
    ax = parse_declaration("axiom triv: c = c", base)
    strong = parse_declaration("axiom one: x = y", base)
    g = TheoryGraph()
    for t in (base, theory_cons(base, ax, name="B1"), theory_cons(base, strong, name="B2")):
        g = add_theory(g, t)
    g = add_extension_edge(add_extension_edge(g, "B", "B1"), "B", "B2")
    assert classify_edge(g, g.edge("B", "B1")).verdict is Verdict.NOT_ESTABLISHED
    back = check_view(g, View("back", "B1", "B", {"S": "S", "c": "c"})).view
    g = g.put_view(back)
    ev = classify_edge(g, g.edge("B", "B1"))
    assert ev.verdict is Verdict.BY_BACK_VIEW and ev.via == "back"
    g = g.put_view(check_view(g, View("back2", "B2", "B", {"S": "S", "c": "c"})).view)
    assert classify_edge(g, g.edge("B", "B2")).verdict is Verdict.NOT_ESTABLISHED

from __future__ import annotations

import pytest

from realmgraph.errors import ComposeMismatch, NotAnExtension
from realmgraph.parser import parse_formula
from realmgraph.views import (
    Directive,
    PartialView,
    Status,
    View,
    check_view,
    compose_views,
    faithful_evidence,
    identity_view,
    inclusion_view,
    is_expansive,
    is_interface,
    lookup_fact,
    translate_formula,
    unfold,
)
from realmgraph.workspace import load_sources

SRC = """
theory M {
  sort S;
  op m : S S -> S infix "*";
  op u : S;
  axiom assoc: (a * b) * c = a * (b * c);
  axiom left: u * a = a;
}

theory M2 extends M {
  def sq : S -> S := sq(a) = a * a;
  theorem right: a * u = a;
}

theory N {
  sort T;
  op n : T T -> T;
  op z : T;
  axiom assoc: n(n(a, b), c) = n(a, n(b, c));
  axiom left: n(z, a) = a;
  axiom right: n(a, z) = a;
}
"""


@pytest.fixture(scope="module")
def g():
    ws = load_sources([("m.thy", SRC)], verify=False)
    assert ws.ok, [str(d) for d in ws.diagnostics]
    return ws.graph


def test_structure_errors(g):
    rep = check_view(g, View("bad", "M", "N", {"S": "T", "m": "z"}))
    codes = {e.code for e in rep.errors}
    assert {"SignatureMismatch", "NotTotal"} <= codes
    rep = check_view(g, View("bad2", "M", "N", {"S": "T", "m": "n", "u": "z", "q": "z"}))
    assert [e.code for e in rep.errors] == ["UnknownSymbolInMap"]


def test_axioms_and_theorems_discharge_obligations(g):
    v = check_view(g, View("mn", "M", "N", {"S": "T", "m": "n", "u": "z"})).view
    assert [ob.status for ob in v.obligations] == [Status.AXIOM, Status.AXIOM]
    assert v.discharged and v.obligation("left").by == "left"
    back = check_view(g, View("nm", "N", "M2", {"T": "S", "n": "m", "z": "u"})).view
    assert [ob.status for ob in back.obligations] == [Status.AXIOM, Status.AXIOM, Status.THEOREM]


def test_missing_target_fact_stays_open(g):
    v = check_view(g, View("nm", "N", "M", {"T": "S", "n": "m", "z": "u"})).view
    assert [ob.origin for ob in v.open] == ["right"]
    assert v.open[0].countermodel is None


def test_finite_check_directive_attaches_countermodel(g):
    d = (Directive("right", "finite-check", 3),)
    v = check_view(g, View("nm", "N", "M", {"T": "S", "n": "m", "z": "u"}, directives=d)).view
    ob = v.obligation("right")
    assert ob.status is Status.OPEN and ob.countermodel is not None
    assert ob.countermodel.size == 2


def test_assumption_and_theorem_directives(g):
    v = check_view(g, View("nm", "N", "M", {"T": "S", "n": "m", "z": "u"},
                           directives=(Directive("*", "assumption"),))).view
    assert v.obligation("right").status is Status.ASSUMED and not v.obligation("right").proof_grade
    rep = check_view(g, View("nm", "N", "M", {"T": "S", "n": "m", "z": "u"},
                             directives=(Directive("right", "theorem", "nope"),)))
    assert [e.code for e in rep.errors] == ["DischargeFailed"]


def test_symmetric_equations_are_found(g):
    t = g.theory("M")
    f = parse_formula("a = u * a", t)
    assert lookup_fact(t, f) == (Status.AXIOM, "left")


def test_unfold_and_expand(g):
    t = g.theory("M2")
    f = parse_formula("sq(a) = a", t)
    unfolded = unfold(f, t.definitions)
    assert "sq" not in repr(unfolded)
    v = View("e", "M2", "M", {"S": "S", "m": "m", "u": "u"}, expand={"sq": t.definitions["sq"]})
    out = translate_formula(v, f)
    assert out == parse_formula("a * a = a", g.theory("M"))


def test_identity_inclusion_and_expansive(g):
    idv = identity_view(g, "M")
    assert idv.is_identity and idv.discharged
    inc = inclusion_view(g, "M", "M2")
    assert inc.is_inclusion and inc.discharged
    with pytest.raises(NotAnExtension):
        inclusion_view(g, "M2", "M")
    assert is_interface(inc)
    assert not is_interface(View("x", "M", "M", {"m": "m", "u": "u", "S": "S", "k": "u"}))
    assert is_expansive(idv, idv)


def test_composition_statuses_and_mismatch(g):
    mn = check_view(g, View("mn", "M", "N", {"S": "T", "m": "n", "u": "z"})).view
    nm = check_view(g, View("nm", "N", "M2", {"T": "S", "n": "m", "z": "u"})).view
    c = compose_views(mn, nm, g)
    assert c.source == "M" and c.target == "M2"
    assert dict(c.symbol_map) == {"S": "S", "m": "m", "u": "u"}
    assert c.discharged
    with pytest.raises(ComposeMismatch):
        compose_views(mn, mn)


def test_composition_propagates_partiality(g):
    part = PartialView("p", "M", "N", {"S": "T", "m": "n"}, undefined=("u",))
    nm = View("nm", "N", "M", {"T": "S", "n": "m", "z": "u"})
    c = compose_views(part, nm)
    assert isinstance(c, PartialView) and c.undefined == ("u",)


def test_faithful_evidence(g):
    ev = faithful_evidence(g, check_view(g, View("mn", "M", "N",
                                                 {"S": "T", "m": "n", "u": "z"})).view, 3)
    assert ev.ok and ev.probes

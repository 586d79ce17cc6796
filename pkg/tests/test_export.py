from __future__ import annotations

import json

from realmgraph.export import graph_to_dict, to_dot, to_json


def test_dot_marks_faces_views_and_conservative_edges(groups):
    dot = to_dot(groups)
    assert dot.startswith("digraph theories {")
    assert '"group" [label="group" style="rounded,bold"];' in dot
    assert '"group1" -> "slash1" [color="black:invis:black"];' in dot
    assert '"group2" -> "slash1" [style=dashed label="v2"];' in dot
    assert 'subgraph "cluster_Groups"' in dot


def test_json_is_deterministic_and_complete(groups):
    text = to_json(groups)
    assert text == to_json(groups)
    data = json.loads(text)
    assert [t["name"] for t in data["theories"]] == sorted(groups.theories)
    edge = next(e for e in data["edges"] if e["target"] == "circi2")
    assert edge["conservativity"] == "Syntactic"
    assert edge["suffix"][0].startswith("def e_sl")
    v2 = next(v for v in data["views"] if v["name"] == "v2")
    assert [o["status"] for o in v2["obligations"]] == ["FiniteChecked(4)"] * 4
    assert data["realms"][0]["pillars"][1]["interface"] == "I2"


def test_partial_views_list_undefined_symbols(corpus):
    from realmgraph.realms import lift_view

    pv = lift_view(corpus, corpus.realms["Groups"], corpus.realms["GroupsAlt"], "w_alt")
    data = graph_to_dict(corpus.put_view(pv))
    lifted = next(v for v in data["views"] if v["name"] == pv.name)
    assert lifted["partial"] == ["u_circ"]

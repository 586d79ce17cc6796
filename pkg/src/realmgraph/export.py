"""DOT and JSON renderings of a theory graph."""

from __future__ import annotations

import json

from .graph import TheoryGraph, Verdict, classify_edge
from .printer import format_decl, format_formula
from .syntax import Theory


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: TheoryGraph, unfold_depth: int = 2) -> str:
    """Theories are boxes, extension edges solid (doubled when conservative), views dashed."""
    faces = {r.face for r in g.realms.values()}
    lines = ["digraph theories {", "  rankdir=BT;", "  node [shape=box];"]
    for name in sorted(g.theories):
        style = ' style="rounded,bold"' if name in faces else ""
        lines.append(f"  {_quote(name)} [label={_quote(name)}{style}];")
    for e in sorted(g.edges, key=lambda e: (e.source, e.target)):
        verdict = classify_edge(g, e, unfold_depth).verdict
        attrs = "" if verdict is Verdict.NOT_ESTABLISHED else ' [color="black:invis:black"]'
        lines.append(f"  {_quote(e.source)} -> {_quote(e.target)}{attrs};")
    for name in sorted(g.views):
        v = g.views[name]
        lines.append(f"  {_quote(v.source)} -> {_quote(v.target)} "
                     f"[style=dashed label={_quote(name)}];")
    for name in sorted(g.realms):
        r = g.realms[name]
        members = {r.face}
        for p in r.pillars:
            members |= {p.bottom, p.top}
        lines.append(f"  subgraph {_quote('cluster_' + name)} {{")
        lines.append(f"    label={_quote(name)}; style=dashed;")
        lines.append("    " + " ".join(_quote(m) for m in sorted(members)) + ";")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(g: TheoryGraph, unfold_depth: int = 2) -> dict:
    theories = []
    for name in sorted(g.theories):
        t = g.theories[name]
        theories.append({
            "name": name,
            "primitive": t.primitive,
            "declarations": [format_decl(d, t.prefix(i)) for i, d in enumerate(t.decls)],
        })
    edges = []
    for e in sorted(g.edges, key=lambda e: (e.source, e.target)):
        ctx = g.theories[e.source]
        ev = classify_edge(g, e, unfold_depth)
        suffix = []
        for d in e.suffix:
            suffix.append(format_decl(d, ctx))
            ctx = Theory(ctx.name, ctx.decls + (d,))
        edges.append({"source": e.source, "target": e.target, "suffix": suffix,
                      "conservativity": ev.verdict.value, "via": ev.via})
    views = []
    for name in sorted(g.views):
        v = g.views[name]
        tgt = g.theories.get(v.target)
        views.append({
            "name": name,
            "source": v.source,
            "target": v.target,
            "map": dict(v.symbol_map),
            "expand": sorted(v.expand),
            "partial": list(getattr(v, "undefined", ())),
            "obligations": [{"origin": ob.origin,
                             "statement": format_formula(ob.statement, tgt),
                             "status": ob.describe()} for ob in v.obligations],
        })
    realms = []
    for name in sorted(g.realms):
        r = g.realms[name]
        realms.append({
            "name": name,
            "face": r.face,
            "pillars": [{"name": p.name, "bottom": p.bottom, "top": p.top,
                         "interface": p.interface} for p in r.pillars],
            "equivalences": list(r.equivalences),
        })
    return {"theories": theories, "edges": edges, "views": views, "realms": realms}


def to_json(g: TheoryGraph, unfold_depth: int = 2) -> str:
    return json.dumps(graph_to_dict(g, unfold_depth), indent=2, sort_keys=True,
                      ensure_ascii=False) + "\n"

"""Render terms, formulas and theories back to source syntax."""

from __future__ import annotations

from typing import TYPE_CHECKING, Iterable

from .syntax import (
    App,
    Axiom,
    BINARY,
    Declaration,
    Definition,
    Eq,
    Forall,
    Formula,
    Not,
    OpSig,
    Symbol,
    Term,
    Theorem,
    Theory,
    Var,
    free_vars,
    strip_foralls,
)

if TYPE_CHECKING:
    from .graph import TheoryGraph
    from .realms import Realm
    from .views import View

_CONNECTIVE = {"And": "/\\", "Or": "\\/", "Implies": "->"}


def format_term(t: Term, ctx: Theory | None = None) -> str:
    glyphs = ctx.glyph_of if ctx is not None else {}
    if isinstance(t, Var):
        return t.name
    if not t.args:
        return t.op
    g = glyphs.get(t.op)
    if g is not None and len(t.args) == 2:
        parts = []
        for a in t.args:
            s = format_term(a, ctx)
            if isinstance(a, App) and len(a.args) == 2 and a.op in glyphs:
                s = f"({s})"
            parts.append(s)
        return f"{parts[0]} {g} {parts[1]}"
    return f"{t.op}({', '.join(format_term(a, ctx) for a in t.args)})"


def _format(f: Formula, ctx: Theory | None, top: bool) -> str:
    if isinstance(f, Eq):
        return f"{format_term(f.lhs, ctx)} = {format_term(f.rhs, ctx)}"
    if isinstance(f, Not):
        if isinstance(f.body, Eq):
            return f"~({_format(f.body, ctx, False)})"
        return f"~{_format(f.body, ctx, False)}"
    if isinstance(f, BINARY):
        op = _CONNECTIVE[type(f).__name__]
        s = f"{_format(f.left, ctx, False)} {op} {_format(f.right, ctx, False)}"
        return s if top else f"({s})"
    kw = "forall" if isinstance(f, Forall) else "exists"
    s = f"{kw} {f.var}:{f.sort}. {_format(f.body, ctx, True)}"
    return s if top else f"({s})"


def format_formula(f: Formula, ctx: Theory | None = None, implicit: bool = True) -> str:
    """Print ``f``; a leading universal block is left implicit when re-closing reproduces it."""
    if implicit:
        binders, body = strip_foralls(f)
        fv = [(v.name, v.sort) for v in free_vars(body)]
        ops = set(ctx.ops) if ctx is not None else set()
        if binders and fv == binders and not ops & {n for n, _ in binders}:
            return _format(body, ctx, True)
    return _format(f, ctx, True)


def _sig(sig: OpSig) -> str:
    if not sig.args:
        return sig.result
    return f"{' '.join(sig.args)} -> {sig.result}"


def format_decl(d: Declaration, ctx: Theory) -> str:
    """``ctx`` is the context the declaration is well formed in."""
    if isinstance(d, Symbol):
        if d.is_sort:
            return f"sort {d.name};"
        glyph = f' infix "{d.glyph}"' if d.glyph else ""
        return f"op {d.name} : {_sig(d.sig)}{glyph};"  # type: ignore[arg-type]
    if isinstance(d, Axiom):
        return f"axiom {d.name}: {format_formula(d.formula, ctx)};"
    if isinstance(d, Definition):
        inner = Theory(ctx.name, ctx.decls + (d,))
        glyph = f' infix "{d.glyph}"' if d.glyph else ""
        alias = "" if d.name == f"{d.symbol}_def" else f" as {d.name}"
        return (f"def {d.symbol} : {_sig(d.sig)}{glyph} := "
                f"{format_formula(d.definiens, inner)}{alias};")
    assert isinstance(d, Theorem)
    j = d.justification
    if j.kind == "external":
        by = f' by external "{j.citation or ""}"'
    elif j.kind == "finite-checked":
        by = f" by finite-check {j.max_size}"
    else:
        by = " by assumed"
    return f"theorem {d.name}: {format_formula(d.formula, ctx)}{by};"


def format_theory(t: Theory, base: Theory | None = None, indent: str = "  ") -> str:
    start = len(base.decls) if base is not None else 0
    head = f"theory {t.name}"
    if base is not None:
        head += f" extends {base.name}"
    lines = [head + " {"]
    for i in range(start, len(t.decls)):
        lines.append(indent + format_decl(t.decls[i], t.prefix(i)))
    lines.append("}")
    return "\n".join(lines)


def format_view(v: "View") -> str:
    head = f"view {v.name} : {v.source} -> {v.target} {{"
    lines = [head]
    for s, t in v.symbol_map.items():
        lines.append(f"  {s} |-> {t};")
    if v.expand:
        lines.append(f"  expand {', '.join(v.expand)};")
    lines.append("}")
    return "\n".join(lines)


def _directive_text(view: str, origin: str, method: str, arg) -> str:
    if method == "theorem":
        return f"discharge {view}.{origin} by theorem {arg};"
    if method == "finite-check":
        return f"discharge {view}.{origin} by finite-check {arg};"
    return f"discharge {view}.{origin} by assumption;"


def format_discharges(v: "View", fallback_size: int = 4) -> list[str]:
    """Directives reproducing the view's closed obligations when re-checked.

    Obligations closed by inheritance (composition, merging) have no source
    syntax of their own; they are written as finite checks, which re-checking
    then verifies afresh.
    """
    from .views import PROOF_GRADE, Status, _directive_for

    out = [_directive_text(v.name, d.origin, d.method, d.arg) for d in v.directives]
    for ob in v.obligations:
        if not ob.closed or _directive_for(v, ob.origin) is not None:
            continue
        if ob.status is Status.FINITE:
            out.append(_directive_text(v.name, ob.origin, "finite-check", ob.max_size))
        elif ob.status is Status.ASSUMED:
            out.append(_directive_text(v.name, ob.origin, "assumption", None))
        elif ob.status in PROOF_GRADE and ob.origin in v.inherited:
            out.append(_directive_text(v.name, ob.origin, "finite-check", fallback_size))
    return out


def format_realm(r: "Realm") -> str:
    lines = [f"realm {r.name} {{", f"  face {r.face};"]
    for p in r.pillars:
        lines.append(f"  pillar {p.name} {{ bottom {p.bottom}; top {p.top}; "
                     f"interface {p.interface}; }}")
    if r.equivalences:
        lines.append(f"  equiv {', '.join(r.equivalences)};")
    lines.append("}")
    return "\n".join(lines)


def format_graph(g: "TheoryGraph", theories: Iterable[str] | None = None,
                 views: Iterable[str] | None = None,
                 realms: Iterable[str] | None = None) -> str:
    """Source text for (a part of) a graph.

    Each theory extends its first extension-edge predecessor; further edges
    become ``edge`` items. Theories, views and realms outside the selection
    are assumed to come from other files loaded alongside.
    """
    th = set(g.theories if theories is None else theories)
    vs = set(g.views if views is None else views)
    rs = set(g.realms if realms is None else realms)
    blocks: list[str] = []
    extra_edges: list[str] = []
    for name in g.topological_order():
        if name not in th:
            continue
        t = g.theories[name]
        preds = sorted(g.predecessors(name))
        base = g.theories[preds[0]] if preds else None
        blocks.append(format_theory(t, base))
        extra_edges.extend(f"edge {p} -> {name};" for p in preds[1:])
    if extra_edges:
        blocks.append("\n".join(extra_edges))
    discharges: list[str] = []
    for name in sorted(vs):
        v = g.views[name]
        blocks.append(format_view(v))
        discharges.extend(format_discharges(v))
    if discharges:
        blocks.append("\n".join(discharges))
    for name in sorted(rs):
        blocks.append(format_realm(g.realms[name]))
    return "\n\n".join(blocks) + "\n"

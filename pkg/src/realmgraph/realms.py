"""Realms: a primitive face, conservative pillars, bottom equivalences and interfaces."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import (
    FaceMergeConflict,
    FaceWouldBeNonPrimitive,
    JustificationFailed,
    KernelError,
    MergeError,
    MissingCounterpart,
    NotConservativeDecl,
    NotTotal,
    PillarNotFound,
    UnknownRealm,
)
from .graph import (
    Development,
    TheoryGraph,
    Verdict,
    add_extension_edge,
    add_theory,
    development,
    fresh_name,
    is_conservative_development,
    syntactically_conservative,
)
from .syntax import (
    Axiom,
    Declaration,
    Definition,
    Justification,
    OpSig,
    SortSig,
    Symbol,
    Theorem,
    Theory,
    alpha_key,
    introduced_symbol,
    rename_symbols,
)
from .views import (
    Directive,
    Obligation,
    PartialView,
    Status,
    View,
    _composed_statuses,
    check_view,
    embedding_view,
    faithful_evidence,
    identity_view,
    is_expansive,
    is_interface,
    lookup_fact,
    translate_formula,
)

UNDERLINE = "̲"


@dataclass(frozen=True)
class Pillar:
    name: str
    bottom: str
    top: str
    interface: str


@dataclass(frozen=True)
class Realm:
    name: str
    face: str
    pillars: tuple[Pillar, ...]
    equivalences: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def simple(self) -> bool:
        return len(self.pillars) == 1

    @property
    def proper(self) -> bool:
        return len(self.pillars) > 1

    def index(self, key: int | str) -> int:
        if isinstance(key, int):
            if 0 <= key < len(self.pillars):
                return key
        else:
            for i, p in enumerate(self.pillars):
                if p.name == key:
                    return i
        raise PillarNotFound(f"realm {self.name} has no pillar {key!r}", subject=str(key))

    def pillar(self, key: int | str) -> Pillar:
        return self.pillars[self.index(key)]

    def subset(self, keys: Iterable[int | str]) -> "Realm":
        """The realm formed by some of the pillars with the same face."""
        idx = sorted({self.index(k) for k in keys})
        return replace(self, pillars=tuple(self.pillars[i] for i in idx))


def get_realm(g: TheoryGraph, name: str) -> Realm:
    try:
        return g.realms[name]
    except KeyError:
        raise UnknownRealm(f"unknown realm {name!r}", subject=name) from None


def project_face(g: TheoryGraph, r: Realm) -> Theory:
    return g.theory(r.face)


def _checked(g: TheoryGraph, name_or_view: str | View, unfold_depth: int = 2) -> View:
    v = g.view(name_or_view) if isinstance(name_or_view, str) else name_or_view
    return v if v.checked else check_view(g, v, unfold_depth).view


def _all_names(g: TheoryGraph) -> set[str]:
    out: set[str] = set()
    for t in g.theories.values():
        out |= t.names
    return out


def _all_glyphs(g: TheoryGraph) -> set[str]:
    out: set[str] = set()
    for t in g.theories.values():
        out |= set(t.glyphs)
    return out


# validation


@dataclass(frozen=True)
class Row:
    check: str
    pillar: str | None
    status: str  # pass | fail | unverified
    code: str | None = None
    detail: str = ""


@dataclass(frozen=True)
class RealmReport:
    realm: str
    rows: tuple[Row, ...]

    @property
    def ok(self) -> bool:
        return all(r.status != "fail" for r in self.rows)

    @property
    def failures(self) -> list[Row]:
        return [r for r in self.rows if r.status == "fail"]

    @property
    def codes(self) -> set[str]:
        return {r.code for r in self.failures if r.code}


def _pass(check: str, pillar: str | None, detail: str = "") -> Row:
    return Row(check, pillar, "pass", None, detail)


def _fail(check: str, pillar: str | None, code: str, detail: str) -> Row:
    return Row(check, pillar, "fail", code, detail)


def _interface_conservativity(g: TheoryGraph, v: View, evidence_size: int) -> Row:
    top = g.theory(v.target)
    pillar = None
    if v.expansive_witness:
        expansive = is_expansive(v, _checked(g, v.expansive_witness))
        how = f"witness {v.expansive_witness}"
    else:
        expansive = set(top.symbols) <= v.image
        how = "identity witness"
    evidence = v.faithful
    if evidence is None and evidence_size > 0:
        evidence = faithful_evidence(g, v, evidence_size)
    parts = [f"expansive: {'yes (' + how + ')' if expansive else 'not established'}"]
    if evidence is None:
        parts.append("faithful: no evidence")
    elif evidence.ok:
        parts.append(f"faithful: finite evidence up to size {evidence.max_size} "
                     f"({len(evidence.probes)} probes), not a proof")
    else:
        probe = evidence.violations[0][0]
        return Row("interface conservative", pillar, "fail", "InterfaceNotFaithful",
                   f"probe {probe!r} is refutable in the face but not in {v.target}")
    status = "pass" if expansive and evidence is not None else "unverified"
    return Row("interface conservative", pillar, status, None, "; ".join(parts))


def validate_realm(g: TheoryGraph, r: Realm, unfold_depth: int = 2,
                   evidence_size: int = 3) -> RealmReport:
    """Check every component of a realm; failures are rows of the report, never exceptions."""
    rows: list[Row] = []
    face = g.theories.get(r.face)
    if face is None:
        rows.append(_fail("face is primitive", None, "UnknownTheory", f"no theory {r.face}"))
    elif not face.primitive:
        bad = [d.name for d in face.decls if isinstance(d, (Definition, Theorem))]
        rows.append(_fail("face is primitive", None, "FaceNotPrimitive",
                          f"{r.face} declares {', '.join(bad)}"))
    else:
        rows.append(_pass("face is primitive", None, r.face))
    if not r.pillars:
        rows.append(_fail("pillars", None, "NoPillars", "a realm needs at least one pillar"))

    devs: dict[int, Development] = {}
    back_edges: list[tuple[str, str]] = []
    for i, p in enumerate(r.pillars):
        label = p.name
        try:
            d = development(g, p.bottom, p.top)
        except KernelError as e:
            rows.append(_fail("development conservative", label, "DevelopmentNotConservative",
                              f"{e.code}: {e.message}"))
        else:
            devs[i] = d
            rep = is_conservative_development(g, d, unfold_depth)
            for ev in rep.verdicts:
                if ev.verdict is Verdict.NOT_ESTABLISHED:
                    rows.append(_fail("development conservative", label,
                                      "DevelopmentNotConservative",
                                      f"{ev.edge.source}->{ev.edge.target}: {ev.reason}"))
                else:
                    back_edges.append((ev.edge.target, ev.edge.source))
            if rep.conservative:
                detail = ", ".join(f"{ev.edge.source}->{ev.edge.target}: {ev.verdict.value}"
                                   + (f" via {ev.via}" if ev.via else "")
                                   for ev in rep.verdicts) or f"single node {p.bottom}"
                rows.append(_pass("development conservative", label, detail))
        rows.extend(_interface_rows(g, r, p, unfold_depth, evidence_size))

    # bottoms pairwise equivalent: reachability over views the kernel can exhibit
    adj: dict[str, set[str]] = {}
    for e in g.edges:
        adj.setdefault(e.source, set()).add(e.target)
    for a, b in back_edges:
        adj.setdefault(a, set()).add(b)
    for name in r.equivalences:
        v = g.views.get(name)
        if v is None:
            rows.append(_fail("equivalence view", None, "UnknownView", f"no view {name}"))
            continue
        v = _checked(g, v, unfold_depth)
        if v.open or not set(g.theory(v.source).symbols) <= set(v.symbol_map) | set(v.expand):
            rows.append(Row("equivalence view", None, "unverified", None,
                            f"{name} has open obligations and is not used"))
            continue
        adj.setdefault(v.source, set()).add(v.target)
    for i, pi in enumerate(r.pillars):
        seen = {pi.bottom}
        stack = [pi.bottom]
        while stack:
            n = stack.pop()
            for m in adj.get(n, ()):
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        for j, pj in enumerate(r.pillars):
            if i == j or j not in devs:
                continue
            if seen & devs[j].nodes:
                rows.append(_pass("bottoms equivalent", None,
                                  f"{pi.bottom} -> development of {pj.bottom}"))
            else:
                rows.append(_fail("bottoms equivalent", None, "BottomsNotEquivalent",
                                  f"BottomsNotEquivalent({i + 1},{j + 1}): no view from "
                                  f"{pi.bottom} into the development of {pj.bottom}"))
    return RealmReport(r.name, tuple(rows))


def _interface_rows(g: TheoryGraph, r: Realm, p: Pillar, unfold_depth: int,
                    evidence_size: int) -> list[Row]:
    label = p.name
    rows: list[Row] = []
    v = g.views.get(p.interface)
    if v is None:
        return [_fail("interface", label, "UnknownView", f"no view {p.interface}")]
    if v.source != r.face or v.target != p.top:
        rows.append(_fail("interface endpoints", label, "InterfaceMismatch",
                          f"{v.name} : {v.source} -> {v.target}, expected {r.face} -> {p.top}"))
        return rows
    report = check_view(g, v, unfold_depth) if not v.checked else None
    checked = report.view if report is not None else v
    errors = list(report.errors) if report is not None else []
    face = g.theory(r.face)
    missing = [s for s in face.symbols if s not in v.symbol_map and s not in v.expand]
    if missing:
        for s in missing:
            rows.append(_fail("interface total", label, "InterfaceNotTotal",
                              f"InterfaceNotTotal({s}): {v.name} does not map {s}"))
    else:
        rows.append(_pass("interface total", label, v.name))
    if is_interface(v):
        rows.append(_pass("interface injective", label, v.name))
    else:
        seen: dict[str, str] = {}
        clash = []
        for s, t in v.symbol_map.items():
            if t in seen:
                clash.append(f"{seen[t]}, {s} -> {t}")
            seen[t] = s
        rows.append(_fail("interface injective", label, "InterfaceNotInjective",
                          f"{v.name}: " + "; ".join(clash)))
    other = [e for e in errors if not isinstance(e, NotTotal)]
    for e in other:
        rows.append(_fail("interface is a view", label, e.code, e.message))
    if not errors:
        if checked.open:
            rows.append(_fail("interface is a view", label, "InterfaceObligationsOpen",
                              ", ".join(ob.origin for ob in checked.open)))
        else:
            rows.append(_pass("interface is a view", label, _obligation_summary(checked)))
            row = _interface_conservativity(g, checked, evidence_size)
            rows.append(replace(row, pillar=label))
    return rows


def _obligation_summary(v: View) -> str:
    counts: dict[str, int] = {}
    for ob in v.obligations:
        key = ob.status.value if ob.status is not Status.FINITE else f"FiniteChecked({ob.max_size})"
        counts[key] = counts.get(key, 0) + 1
    return ", ".join(f"{n} {k}" for k, n in counts.items()) or "no obligations"


# trivial and initial realms


def _identity(g: TheoryGraph, theory: str) -> tuple[TheoryGraph, str]:
    name = f"id_{theory}"
    existing = g.views.get(name)
    if existing is not None and existing.is_identity and existing.source == theory:
        return g, name
    name = g.fresh_view_name(name)
    return g.put_view(identity_view(g, theory, name)), name


def trivial_realm(g: TheoryGraph, theory: str, name: str | None = None
                  ) -> tuple[TheoryGraph, Realm]:
    """The simple realm whose face, bottom and top are all ``theory``.

    The realm is built even when ``theory`` is not primitive; validation then
    reports it.
    """
    g.theory(theory)
    g, idv = _identity(g, theory)
    r = Realm(name or fresh_name(f"R_{theory}", g.realms), theory,
              (Pillar("p1", theory, theory, idv),), (idv,))
    return g.put_realm(r), r


def _underline(glyph: str | None, taken: set[str]) -> str | None:
    if not glyph:
        return None
    g = "".join(ch + UNDERLINE for ch in glyph)
    return None if g in taken else g


def _rename_sig(sig, m: Mapping[str, str]):
    if isinstance(sig, SortSig):
        return sig
    return OpSig(tuple(m.get(a, a) for a in sig.args), m.get(sig.result, sig.result))


def initial_realm(g: TheoryGraph, theory: str, name: str | None = None
                  ) -> tuple[TheoryGraph, Realm]:
    """Add a fresh primitive copy of ``theory`` as face with the copying interface.

    Copies are named ``u_<symbol>``, made fresh across the whole graph. For a
    non-primitive theory the face is its primitive reduct: defined symbols
    become plain symbols with their defining equation as an axiom, theorems
    become axioms.
    """
    t = g.theory(theory)
    taken = _all_names(g)
    glyphs = _all_glyphs(g)
    ren: dict[str, str] = {}
    for s in t.symbols:
        ren[s] = fresh_name(f"u_{s}", taken)
        taken.add(ren[s])
    decls: list[Declaration] = []
    notes: list[str] = []
    for d in t.decls:
        if isinstance(d, Symbol):
            decls.append(Symbol(ren[d.name], _rename_sig(d.sig, ren), _underline(d.glyph, glyphs)))
        elif isinstance(d, Axiom):
            decls.append(Axiom(d.name, rename_symbols(d.formula, ren)))
        elif isinstance(d, Definition):
            decls.append(Symbol(ren[d.symbol], _rename_sig(d.sig, ren),
                                _underline(d.glyph, glyphs)))
            decls.append(Axiom(d.name, rename_symbols(d.formula, ren)))
            notes.append(f"definition {d.name} copied as a symbol with its defining axiom")
        else:
            decls.append(Axiom(d.name, rename_symbols(d.formula, ren)))
            notes.append(f"theorem {d.name} copied as an axiom")
    face = Theory(g.fresh_theory_name(f"F_{theory}"), tuple(decls))
    g = add_theory(g, face)
    iota = View(g.fresh_view_name(f"iota_{theory}"), face.name, theory,
                {ren[s]: s for s in t.symbols})
    g = g.put_view(check_view(g, iota).view)
    g, idv = _identity(g, theory)
    r = Realm(name or fresh_name(f"R_{theory}", g.realms), face.name,
              (Pillar("p1", theory, theory, iota.name),), (idv,), tuple(notes))
    return g.put_realm(r), r


# extension


def _decl_label(d: Declaration) -> str:
    return d.symbol if isinstance(d, Definition) else d.name


def _check_conservative_decl(g: TheoryGraph, ctx: Theory, d: Declaration,
                             budget: int | None) -> None:
    if isinstance(d, Axiom):
        raise NotConservativeDecl(f"axiom {d.name} is not a conservative extension",
                                  subject=d.name)
    reason = syntactically_conservative(ctx, (d,))
    if reason is not None:
        raise NotConservativeDecl(f"{reason}", subject=d.name)
    if isinstance(d, Theorem) and d.justification.kind == "finite-checked":
        from .oracle import verify_justification

        cm = verify_justification(ctx, d.formula, d.justification.max_size or 0, budget)
        if cm is not None:
            raise JustificationFailed(
                f"theorem {d.name} fails in a model of size {cm.size}", subject=d.name)


def _extend_pillar(g: TheoryGraph, p: Pillar, d: Declaration, at: str | None,
                   new_top: str | None, budget: int | None) -> tuple[TheoryGraph, str]:
    from .syntax import theory_cons

    dev = development(g, p.bottom, p.top)
    s = at or p.top
    if s not in dev.nodes:
        raise PillarNotFound(f"{s} is not in the development of pillar {p.name}", subject=s)
    _check_conservative_decl(g, g.theory(s), d, budget)
    label = _decl_label(d)
    top2 = theory_cons(g.theory(p.top), d,
                       name=new_top or g.fresh_theory_name(f"{p.top}_{label}"))
    g = add_extension_edge(add_theory(g, top2), p.top, top2.name)
    if s != p.top:
        s2 = theory_cons(g.theory(s), d, name=g.fresh_theory_name(f"{s}_{label}"))
        g = add_extension_edge(add_theory(g, s2), s, s2.name)
        g = g.put_view(embedding_view(g, s2.name, top2.name,
                                      g.fresh_view_name(f"emb_{s2.name}_{top2.name}")))
    return g, top2.name


def extend_realm(g: TheoryGraph, r: Realm, pillar: int | str, decl: Declaration,
                 face_decls: Declaration | Sequence[Declaration] = (),
                 counterparts: Mapping[int | str, Declaration] | None = None,
                 at: str | None = None, new_top: str | None = None,
                 budget: int | None = None) -> tuple[TheoryGraph, Realm]:
    """Grow one pillar by a conservative declaration, optionally exposing it in the face.

    With face declarations every other pillar must supply a counterpart
    declaration so that all interfaces stay total.
    """
    if isinstance(face_decls, (Symbol, Axiom, Definition, Theorem)):
        face_decls = (face_decls,)
    face_decls = tuple(face_decls)
    for fd in face_decls:
        if not isinstance(fd, (Symbol, Axiom)):
            raise FaceWouldBeNonPrimitive(
                f"face declaration {fd.name} must be a symbol or an axiom", subject=fd.name)
    idx = r.index(pillar)
    per_pillar: dict[int, Declaration] = {idx: decl}
    for k, d in (counterparts or {}).items():
        per_pillar[r.index(k)] = d
    if face_decls:
        for j, p in enumerate(r.pillars):
            if j not in per_pillar:
                raise MissingCounterpart(
                    f"pillar {j + 1} ({p.name}) has no counterpart for the face extension",
                    subject=str(j + 1))

    face = g.theory(r.face)
    if face_decls:
        from .syntax import theory_cons

        face2 = theory_cons(face, face_decls, name=g.fresh_theory_name(r.face))
        g = add_theory(g, face2)
    else:
        face2 = face
    face_syms = [s for fd in face_decls if (s := introduced_symbol(fd)) is not None]
    if len(face_syms) > 1:
        raise FaceWouldBeNonPrimitive("at most one face symbol per extension step",
                                      subject=face_syms[1][0])

    pillars = list(r.pillars)
    for j, p in enumerate(r.pillars):
        d = per_pillar.get(j)
        top = p.top
        if d is not None:
            g, top = _extend_pillar(g, p, d, at if j == idx else None,
                                    new_top if j == idx else None, budget)
        if top == p.top and face2 is face:
            continue
        old = _checked(g, p.interface)
        smap = dict(old.symbol_map)
        if face_syms:
            intro = introduced_symbol(d) if d is not None else None
            if intro is None:
                raise MissingCounterpart(
                    f"pillar {j + 1} ({p.name}) declares no symbol for face symbol "
                    f"{face_syms[0][0]}", subject=str(j + 1))
            smap[face_syms[0][0]] = intro[0]
        iv = View(g.fresh_view_name(old.name), face2.name, top, smap, old.expand,
                  directives=old.directives,
                  inherited={ob.origin: ob for ob in old.obligations if ob.closed})
        g = g.put_view(check_view(g, iv).view)
        pillars[j] = replace(p, top=top, interface=iv.name)
    r2 = replace(r, face=face2.name, pillars=tuple(pillars))
    return g.put_realm(r2), r2


# copying along views


def _justification_from(ob: Obligation | None, view: str) -> Justification | None:
    if ob is None or not ob.closed:
        return None
    if ob.proof_grade:
        return Justification("external", citation=f"view {view}, obligation {ob.origin}: "
                                                  f"{ob.describe()}")
    if ob.status is Status.FINITE:
        return Justification("finite-checked", max_size=ob.max_size)
    return Justification("assumed")


class _Copier:
    """Translate development declarations along a view with consistent fresh names."""

    def __init__(self, g: TheoryGraph, v: View, prefix: str):
        self.g = g
        self.v = v
        self.prefix = prefix
        self.source_bottom = g.theory(v.source)
        self.target = g.theory(v.target)
        self.taken = _all_names(g)
        self.glyphs = _all_glyphs(g)
        self.smap = dict(v.symbol_map)
        self.cache: dict[Declaration, tuple[Declaration, ...]] = {}
        self.target_fact_keys = {alpha_key(f.formula) for f in self.target.facts}

    def fresh(self, name: str) -> str:
        n = fresh_name(f"{self.prefix}__{name}", self.taken)
        self.taken.add(n)
        return n

    def glyph(self, glyph: str | None) -> str | None:
        if glyph is None or glyph in self.glyphs:
            return None
        self.glyphs.add(glyph)
        return glyph

    def tr(self, f):
        return translate_formula(View(self.v.name, "", "", self.smap, self.v.expand), f)

    def translate(self, d: Declaration, src_ctx: Theory, out_ctx: Theory) -> tuple[Declaration, ...]:
        if d in self.cache:
            return self.cache[d]
        res = self._translate(d, src_ctx, out_ctx)
        self.cache[d] = res
        return res

    def _translate(self, d: Declaration, src_ctx: Theory, out_ctx: Theory) -> tuple[Declaration, ...]:
        if isinstance(d, Symbol):
            new = self.fresh(d.name)
            sig = _rename_sig(d.sig, self.smap)
            self.smap[d.name] = new
            return (Symbol(new, sig, self.glyph(d.glyph)),)
        if isinstance(d, (Axiom, Theorem)):
            f = self.tr(d.formula)
            if alpha_key(f) in self.target_fact_keys:
                return ()
            if isinstance(d, Axiom):
                return (Axiom(self.fresh(d.name), f),)
            return (Theorem(self.fresh(d.name), f, d.justification),)
        sig = _rename_sig(d.sig, self.smap)
        placeholder = f"{self.prefix}__{d.symbol}__"
        self.smap[d.symbol] = placeholder
        body = self.tr(d.definiens)
        for td in self.target.definitions.values():
            if td.sig == sig and alpha_key(rename_symbols(body, {placeholder: td.symbol})) \
                    == alpha_key(td.definiens):
                self.smap[d.symbol] = td.symbol
                return ()
        new = self.fresh(d.symbol)
        self.smap[d.symbol] = new
        body = rename_symbols(body, {placeholder: new})
        out: list[Declaration] = []
        wd = d.well_definedness()
        if wd is not None:
            twd = self.tr(wd)
            if lookup_fact(out_ctx, twd, 0) is None:
                found = lookup_fact(src_ctx, wd, 0)
                just = None
                if found is not None and found[1] in self.source_bottom.names:
                    just = _justification_from(self.v.obligation(found[1]), self.v.name)
                if just is not None:
                    out.append(Theorem(self.fresh(f"{d.symbol}_wd"), twd, just))
        out.append(Definition(self.fresh(d.name), new, sig, body, self.glyph(d.glyph)))
        return tuple(out)


def copy_development_along_view(g: TheoryGraph, d: Development, v: View, prefix: str = "v",
                                unfold_depth: int = 2
                                ) -> tuple[TheoryGraph, Development, dict[str, str]]:
    """Isomorphic copy of ``d`` rooted at ``v``'s target.

    Every declaration beyond the bottom is translated along ``v``; new names
    get the ``<prefix>__`` prefix. Declarations whose translation is already
    a definition or fact of the target are merged away. Returns the new graph,
    the copied development and, per original node, the view into its copy.
    """
    v = _checked(g, v, unfold_depth)
    if v.source != d.bottom:
        raise MergeError(f"view {v.name} starts at {v.source}, not at {d.bottom}",
                         subject=v.name)
    copier = _Copier(g, v, prefix)
    bottom = g.theory(d.bottom)
    copies = {d.bottom: v.target}
    family = {d.bottom: v.name}
    for node in d.order:
        if node == d.bottom:
            continue
        t = g.theory(node)
        out = Theory("", copier.target.decls)
        for i in range(len(bottom.decls), len(t.decls)):
            new = copier.translate(t.decls[i], t.prefix(i), out)
            out = Theory("", out.decls + new)
        name = g.fresh_theory_name(f"{prefix}__{node}")
        g = add_theory(g, out.renamed(name))
        copies[node] = name
    for e in d.edges:
        g = add_extension_edge(g, copies[e.source], copies[e.target])
    inherited = {ob.origin: ob for ob in v.obligations if ob.closed}
    for node in d.order:
        if node == d.bottom:
            continue
        t = g.theory(node)
        fv = View(g.fresh_view_name(f"{prefix}_{node}"), node, copies[node],
                  {s: copier.smap[s] for s in t.symbols}, v.expand, inherited=inherited)
        g = g.put_view(check_view(g, fv, unfold_depth).view)
        family[node] = fv.name
    dev = development(g, v.target, copies[d.top], nodes=set(copies.values()))
    return g, dev, family


# merging


def _join_top(g: TheoryGraph, top: str, other: str, base: str
              ) -> tuple[TheoryGraph, str, dict[str, str]]:
    """``top ⊕ other`` over ``base``; duplicates of ``top``'s content are merged away.

    Returns the joined node and the renaming of ``other``'s symbols into it.
    Only ``top -> join`` is an extension edge; ``other`` reaches the join by a
    registered embedding view.
    """
    t1, t2 = g.theory(top), g.theory(other)
    if t2.is_prefix_of(t1):
        return g, top, {}
    if t1.is_prefix_of(t2):
        return g, other, {}
    b = g.theory(base)
    if not (b.is_prefix_of(t1) and b.is_prefix_of(t2)):
        raise MergeError(f"{top} does not extend {base}, cannot join it with {other}",
                         subject=top)
    ren: dict[str, str] = {}
    taken = _all_names(g)
    glyphs = set(t1.glyphs)
    out = list(t1.decls)

    def fresh(n: str) -> str:
        m = n if n not in taken else fresh_name(n, taken)
        taken.add(m)
        return m

    for d in t2.decls[len(b.decls):]:
        ctx = Theory("", tuple(out))
        keys = {alpha_key(f.formula) for f in ctx.facts}
        if isinstance(d, Symbol):
            name = d.name if d.name not in ctx.names else fresh(d.name)
            ren[d.name] = name
            glyph = d.glyph if d.glyph not in glyphs else None
            out.append(Symbol(name, _rename_sig(d.sig, ren), glyph))
        elif isinstance(d, Definition):
            sig = _rename_sig(d.sig, ren)
            body = rename_symbols(d.definiens, ren)
            hit = next((td for td in ctx.definitions.values() if td.sig == sig and
                        alpha_key(rename_symbols(body, {d.symbol: td.symbol}))
                        == alpha_key(td.definiens)), None)
            if hit is not None:
                ren[d.symbol] = hit.symbol
                continue
            sym = d.symbol if d.symbol not in ctx.names else fresh(d.symbol)
            ren[d.symbol] = sym
            body = rename_symbols(d.definiens, ren)
            dname = d.name if d.name not in ctx.names else fresh(d.name)
            glyph = d.glyph if d.glyph not in glyphs else None
            out.append(Definition(dname, sym, sig, body, glyph))
        else:
            f = rename_symbols(d.formula, ren)
            if alpha_key(f) in keys:
                continue
            name = d.name if d.name not in ctx.names else fresh(d.name)
            out.append(Axiom(name, f) if isinstance(d, Axiom)
                       else Theorem(name, f, d.justification))
    if len(out) == len(t1.decls):
        return g, top, ren
    joined = Theory(g.fresh_theory_name(f"{top}_join_{other}"), tuple(out))
    g = add_extension_edge(add_theory(g, joined), top, joined.name)
    emb = View(g.fresh_view_name(f"emb_{other}_{joined.name}"), other, joined.name,
               {s: ren.get(s, s) for s in t2.symbols})
    g = g.put_view(check_view(g, emb).view)
    return g, joined.name, ren


def _minimal_top(g: TheoryGraph, d: Development, needed: set[str]) -> str:
    """Smallest development node containing all ``needed`` symbols."""
    best = d.top
    for n in d.order:
        t = g.theory(n)
        if needed <= set(t.symbols) and len(t.decls) < len(g.theory(best).decls):
            best = n
    return best


def _bottom_pillar(r: Realm, bottom: str, view: str) -> Pillar:
    for p in r.pillars:
        if p.bottom == bottom:
            return p
    raise MergeError(f"view {view} starts at {bottom}, which is no bottom of realm {r.name}",
                     subject=view)


def merge_realms(g: TheoryGraph, r1: Realm, r2: Realm, v: View | str, w: View | str,
                 minimal: bool = False, name: str | None = None, check_size: int = 4,
                 unfold_depth: int = 2, budget: int | None = None
                 ) -> tuple[TheoryGraph, Realm]:
    """The union realm of ``r1`` and ``r2`` along ``v`` (from a bottom of r1) and ``w``.

    ``v`` may land anywhere in a development of ``r2`` and ``w`` anywhere in a
    development of ``r1``. Each pillar of one realm is extended by the copy of
    the other realm's development along the corresponding view and joined with
    it. Face symbols are merged when an extended interface sends them to the
    same symbol.
    """
    v, w = _checked(g, v, unfold_depth), _checked(g, w, unfold_depth)
    a1 = _bottom_pillar(r1, v.source, v.name)
    a2 = _bottom_pillar(r2, w.source, w.name)
    i_a1, i_a2 = _checked(g, a1.interface), _checked(g, a2.interface)

    def copy(gr, pillar, iface, view, prefix):
        d = development(gr, pillar.bottom, pillar.top)
        if minimal:
            d = development(gr, pillar.bottom, _minimal_top(gr, d, set(iface.image)))
        gr, cd, fam = copy_development_along_view(gr, d, view, prefix, unfold_depth)
        return gr, cd.top, _checked(gr, fam[d.top])

    g, w_top, w_fam = copy(g, a2, i_a2, w, "w")
    g, v_top, v_fam = copy(g, a1, i_a1, v, "v")

    # extended tops, one per pillar of each realm
    tops1: list[tuple[Pillar, str, dict[str, str]]] = []
    for p in r1.pillars:
        if w.target not in development(g, p.bottom, p.top).nodes:
            raise MergeError(f"{w.target} is not in the development of pillar {p.name} "
                             f"of {r1.name}", subject=p.name)
        g, top, ren = _join_top(g, p.top, w_top, w.target)
        tops1.append((p, top, ren))
    tops2: list[tuple[Pillar, str, dict[str, str]]] = []
    for p in r2.pillars:
        if v.target not in development(g, p.bottom, p.top).nodes:
            raise MergeError(f"{v.target} is not in the development of pillar {p.name} "
                             f"of {r2.name}", subject=p.name)
        g, top, ren = _join_top(g, p.top, v_top, v.target)
        tops2.append((p, top, ren))

    f1, f2 = g.theory(r1.face), g.theory(r2.face)

    def image_via(iface: View, fam: View, ren: Mapping[str, str], s: str) -> str | None:
        t = iface.symbol_map.get(s)
        u = fam.symbol_map.get(t) if t is not None else None
        return ren.get(u, u) if u is not None else None

    # identification of face symbols in the first pillar of each side
    p1, _, ren1 = tops1[0]
    ip1 = _checked(g, p1.interface)
    inv1 = {t: s for s, t in ip1.symbol_map.items()}
    pairs: dict[str, str] = {}
    for s2 in f2.symbols:
        img = image_via(i_a2, w_fam, ren1, s2)
        if img is not None and img in inv1:
            pairs[s2] = inv1[img]
    p2, _, ren2 = tops2[0]
    ip2 = _checked(g, p2.interface)
    inv2 = {t: s for s, t in ip2.symbol_map.items()}
    for s1 in f1.symbols:
        img = image_via(i_a1, v_fam, ren2, s1)
        if img is not None and img in inv2:
            s2 = inv2[img]
            if pairs.get(s2, s1) != s1 or any(a != s2 and b == s1 for a, b in pairs.items()):
                raise FaceMergeConflict(
                    f"face symbols {s1} and {s2} are identified by one pillar but not "
                    f"consistently by the other", subject=s1)
            pairs[s2] = s1
    for s2, s1 in pairs.items():
        sig1 = f1.signature_of(s1)
        sig2 = _rename_sig(f2.signature_of(s2), pairs)
        if sig1 != sig2:
            raise FaceMergeConflict(f"cannot merge face symbols {s1} and {s2}: "
                                    f"incompatible signatures", subject=s1)

    # merged face: F1 unchanged, F2 renamed into it
    ren_f2: dict[str, str] = dict(pairs)
    taken = set(f1.names)
    glyphs = set(f1.glyphs)
    decls = list(f1.decls)
    fact_names: dict = {alpha_key(f.formula): f.name for f in f1.facts}
    axiom_names: dict[str, str] = {}  # F2 axiom -> merged face axiom (kept or equal)
    for d in f2.decls:
        if isinstance(d, Symbol):
            if d.name in pairs:
                continue
            new = fresh_name(d.name, taken)
            taken.add(new)
            ren_f2[d.name] = new
            glyph = d.glyph if d.glyph not in glyphs else None
            decls.append(Symbol(new, _rename_sig(d.sig, ren_f2), glyph))
            continue
        f = rename_symbols(d.formula, ren_f2)
        key = alpha_key(f)
        if key in fact_names:
            axiom_names[d.name] = fact_names[key]
            continue
        new = fresh_name(d.name, taken)
        taken.add(new)
        fact_names[key] = new
        axiom_names[d.name] = new
        decls.append(Axiom(new, f))
    face = Theory(g.fresh_theory_name(f"{r1.face}_{r2.face}"), tuple(decls))
    g = add_theory(g, face)
    f1_names = {n: n for n in f1.names}

    def interface(gr: TheoryGraph, p: Pillar, top: str, ren: Mapping[str, str],
                  home_ren: Mapping[str, str], home_axioms: Mapping[str, str],
                  other_face: Theory, other_iface: View, other_ren: Mapping[str, str],
                  other_axioms: Mapping[str, str], fam: View, suffix: str):
        home = _checked(gr, p.interface)
        smap = {home_ren.get(s, s): t for s, t in home.symbol_map.items()}
        for s in other_face.symbols:
            key = other_ren.get(s, s)
            img = image_via(other_iface, fam, ren, s)
            if key not in smap and img is not None:
                smap[key] = img
        inherited = {home_axioms[ob.origin]: ob for ob in home.obligations
                     if ob.closed and ob.origin in home_axioms}
        for origin, ob in _composed_statuses(other_iface, fam).items():
            if origin in other_axioms:
                inherited.setdefault(other_axioms[origin], ob)
        iname = gr.fresh_view_name(f"{home.name}_{suffix}")
        iv = View(iname, face.name, top, smap, home.expand, inherited=inherited)
        checked = check_view(gr, iv, unfold_depth).view
        if checked.open and check_size:
            iv = replace(iv, directives=(Directive("*", "finite-check", check_size),))
            checked = check_view(gr, iv, unfold_depth, budget).view
        return gr.put_view(checked), iname

    pillars: list[Pillar] = []
    pnames: set[str] = set()
    for p, top, ren in tops1:
        g, iname = interface(g, p, top, ren, {}, f1_names, f2, i_a2, ren_f2, axiom_names,
                             w_fam, "w")
        pname = fresh_name(p.name, pnames)
        pnames.add(pname)
        pillars.append(Pillar(pname, p.bottom, top, iname))
    for p, top, ren in tops2:
        g, iname = interface(g, p, top, ren, ren_f2, axiom_names, f1, i_a1, {}, f1_names,
                             v_fam, "v")
        pname = fresh_name(p.name, pnames)
        pnames.add(pname)
        pillars.append(Pillar(pname, p.bottom, top, iname))

    equivs = tuple(dict.fromkeys((*r1.equivalences, *r2.equivalences, v.name, w.name)))
    rname = name or fresh_name(f"{r1.name}_{r2.name}", g.realms)
    notes = tuple(f"face symbol {s2} of {r2.face} merged with {s1}" for s2, s1 in pairs.items())
    r = Realm(rname, face.name, tuple(pillars), equivs, notes)
    return g.put_realm(r), r


# lifting


def lift_view(g: TheoryGraph, r1: Realm, r2: Realm, v: View | str,
              name: str | None = None) -> PartialView:
    """Conjugate a top-to-top view with the interfaces: ``I2^-1 ∘ v ∘ I1`` on faces."""
    v = _checked(g, v)
    p1 = next((p for p in r1.pillars if p.top == v.source), None)
    if p1 is None:
        raise PillarNotFound(f"no pillar of {r1.name} has top {v.source}", subject=v.source)
    p2 = next((p for p in r2.pillars if p.top == v.target), None)
    if p2 is None:
        raise PillarNotFound(f"no pillar of {r2.name} has top {v.target}", subject=v.target)
    i1, i2 = _checked(g, p1.interface), _checked(g, p2.interface)
    inv2 = {t: s for s, t in i2.symbol_map.items()}
    smap: dict[str, str] = {}
    undefined: list[str] = []
    for s in g.theory(r1.face).symbols:
        t = i1.symbol_map.get(s)
        u = v.symbol_map.get(t) if t is not None else None
        if u is not None and u in inv2:
            smap[s] = inv2[u]
        else:
            undefined.append(s)
    pv = PartialView(name or f"lift_{v.name}", r1.face, r2.face, smap,
                     undefined=tuple(undefined))
    return check_view(g, pv).view  # type: ignore[return-value]

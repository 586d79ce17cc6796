"""Load source files into a checked theory graph, collecting located diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    BudgetExceeded,
    DuplicateTheoryName,
    DuplicateViewName,
    JustificationFailed,
    KernelError,
    ObligationOpen,
    ParseError,
    UnknownSymbolInMap,
    UnknownTheory,
    UnknownView,
    WouldCreateCycle,
)
from .graph import TheoryGraph, add_extension_edge, add_theory
from .parser import (
    RawDischarge,
    RawEdge,
    RawRealm,
    RawTheory,
    RawView,
    Token,
    elaborate_theory,
    parse_source,
)
from .realms import Pillar, Realm
from .syntax import Theorem, Theory, theory_join
from .views import Directive, View, check_view, embedding_view


@dataclass(frozen=True)
class Workspace:
    files: tuple[str, ...]
    graph: TheoryGraph
    diagnostics: tuple[KernelError, ...] = ()
    origin: Mapping[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    @property
    def budget_exceeded(self) -> bool:
        return any(isinstance(d, BudgetExceeded) for d in self.diagnostics)


def corpus_files() -> list[Path]:
    """The bundled example sources (the groups realm and the modular variant)."""
    root = resources.files("realmgraph") / "corpus"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".thy"))


def _loc(tok: Token | None, file: str | None) -> tuple[str | None, int | None, int | None]:
    return (file, tok.line if tok else None, tok.col if tok else None)


class _Loader:
    def __init__(self, unfold_depth: int, budget: int | None, verify: bool) -> None:
        self.unfold_depth = unfold_depth
        self.budget = budget
        self.verify = verify
        self.g = TheoryGraph()
        self.diags: list[KernelError] = []
        self.origin: dict[str, str] = {}
        self.theories: dict[str, tuple[RawTheory, str]] = {}
        self.views: dict[str, tuple[RawView, str]] = {}
        self.discharges: list[tuple[RawDischarge, str]] = []
        self.realms: list[tuple[RawRealm, str]] = []
        self.edges: list[tuple[RawEdge, str]] = []
        self.state: dict[str, str] = {}  # name -> visiting | done | failed

    def report(self, e: KernelError, tok: Token | None, file: str | None) -> None:
        self.diags.append(e.at(*_loc(tok, file)))

    def collect(self, text: str, file: str) -> None:
        try:
            items = parse_source(text, file)
        except KernelError as e:
            self.diags.append(e.at(file))
            return
        for it in items:
            if isinstance(it, RawTheory):
                if it.name in self.theories:
                    self.report(DuplicateTheoryName(f"theory {it.name!r} is declared twice",
                                                    subject=it.name), it.tok, file)
                    continue
                self.theories[it.name] = (it, file)
            elif isinstance(it, RawView):
                if it.name in self.views:
                    self.report(DuplicateViewName(f"view {it.name!r} is declared twice",
                                                  subject=it.name), it.tok, file)
                    continue
                self.views[it.name] = (it, file)
            elif isinstance(it, RawDischarge):
                self.discharges.append((it, file))
            elif isinstance(it, RawRealm):
                self.realms.append((it, file))
            else:
                self.edges.append((it, file))

    # theories

    def resolve(self, name: str, tok: Token | None, file: str | None) -> Theory | None:
        state = self.state.get(name)
        if state == "done":
            return self.g.theories[name]
        if state == "failed":
            return None
        if state == "visiting":
            self.report(WouldCreateCycle(f"theory {name} depends on itself", subject=name),
                        tok, file)
            return None
        if name not in self.theories:
            self.report(UnknownTheory(f"unknown theory {name!r}", subject=name), tok, file)
            return None
        raw, rfile = self.theories[name]
        self.state[name] = "visiting"
        t = self._build(raw, rfile)
        if self.state[name] == "visiting":
            self.state[name] = "failed" if t is None else "done"
        return t if self.state[name] == "done" else None

    def _build(self, raw: RawTheory, file: str) -> Theory | None:
        try:
            deps = [raw.extends] if raw.extends else list(raw.join or ())
            bases = [self.resolve(d, raw.tok, file) for d in deps]
            if any(b is None for b in bases):
                return None
            if raw.join:
                base = theory_join(bases[0], bases[1], name=raw.name)
            else:
                base = bases[0] if bases else None
            t = elaborate_theory(raw, base, file)
            self.g = add_theory(self.g, t)
            self.origin[t.name] = file
            if deps:
                self.g = add_extension_edge(self.g, deps[0], t.name)
            if raw.join:
                other = raw.join[1]
                self.g = self.g.put_view(embedding_view(
                    self.g, other, t.name, self.g.fresh_view_name(f"emb_{other}_{t.name}")))
            if self.verify:
                self._verify_theorems(t, len(base.decls) if base else 0, raw, file)
            return t
        except KernelError as e:
            self.report(e, raw.tok, file)
            self.state[raw.name] = "failed"
            return None

    def _verify_theorems(self, t: Theory, start: int, raw: RawTheory, file: str) -> None:
        from .oracle import verify_justification

        toks = {rd.name: rd.tok for rd in raw.decls if rd.kind == "theorem"}
        for i in range(start, len(t.decls)):
            d = t.decls[i]
            if not (isinstance(d, Theorem) and d.justification.kind == "finite-checked"):
                continue
            n = d.justification.max_size or 0
            cm = verify_justification(t.prefix(i), d.formula, n, self.budget)
            if cm is not None:
                self.report(JustificationFailed(
                    f"theorem {d.name} of {t.name} fails in a model of size {cm.size}",
                    subject=d.name), toks.get(d.name), file)

    # views

    def _symbol(self, tok: Token, t: Theory) -> str:
        if tok.kind == "op":
            return t.glyphs.get(tok.text, tok.text)
        return tok.text

    def build_view(self, raw: RawView, file: str) -> None:
        src = self.g.theories.get(raw.source)
        tgt = self.g.theories.get(raw.target)
        for n, t in ((raw.source, src), (raw.target, tgt)):
            if t is None:
                if n not in self.theories:
                    self.report(UnknownTheory(f"view {raw.name}: unknown theory {n!r}",
                                              subject=n), raw.tok, file)
                return
        smap: dict[str, str] = {}
        for a, b in raw.maps:
            smap[self._symbol(a, src)] = self._symbol(b, tgt)
        expand = {}
        for s in raw.expand:
            d = src.definitions.get(s)
            if d is None:
                self.report(UnknownSymbolInMap(
                    f"view {raw.name}: {s!r} is not a defined symbol of {raw.source}",
                    subject=s), raw.tok, file)
                return
            expand[s] = d
        for s in src.symbols:
            if s not in smap and s not in expand and s in tgt.symbols:
                smap[s] = s
        directives = tuple(
            Directive(d.origin, d.method, d.arg, _loc(d.tok, dfile))
            for d, dfile in self.discharges if d.view == raw.name)
        v = View(raw.name, raw.source, raw.target, smap, expand, directives=directives)
        try:
            report = check_view(self.g, v, self.unfold_depth, self.budget)
        except KernelError as e:
            self.report(e, raw.tok, file)
            return
        for e in report.errors:
            self.report(e, raw.tok, file)
        for ob in report.view.open:
            extra = ""
            if ob.countermodel is not None:
                extra = f"; countermodel of size {ob.countermodel.size}"
            self.report(ObligationOpen(f"view {raw.name}: obligation {ob.origin} is open"
                                       + extra, subject=f"{raw.name}.{ob.origin}"),
                        raw.tok, file)
        if self.g.views.get(raw.name) is not None:
            self.report(DuplicateViewName(f"view {raw.name!r} clashes with a generated view",
                                          subject=raw.name), raw.tok, file)
            return
        self.g = self.g.put_view(report.view)
        self.origin[raw.name] = file

    # realms

    def build_realms(self) -> None:
        specs: dict[str, dict] = {}

        def spec(name: str, tok: Token | None, file: str) -> dict:
            return specs.setdefault(name, {"face": None, "pillars": {}, "equivs": [],
                                           "loc": (tok, file)})

        def set_field(d: dict, key: str, value: str, what: str, tok, file) -> None:
            if d.get(key) not in (None, value):
                self.report(ParseError(f"{what} is given as both {d[key]} and {value}",
                                       subject=value), tok, file)
            else:
                d[key] = value

        for raw, file in self.realms:
            s = spec(raw.name, raw.tok, file)
            s["loc"] = (raw.tok, file)
            if raw.face:
                set_field(s, "face", raw.face, f"face of realm {raw.name}", raw.tok, file)
            for p in raw.pillars:
                ps = s["pillars"].setdefault(p.name, {})
                for key in ("bottom", "top", "interface"):
                    if getattr(p, key) is None:
                        continue
                    set_field(ps, key, getattr(p, key),
                              f"{key} of pillar {p.name} in {raw.name}", raw.tok, file)
            s["equivs"].extend(raw.equivs)
        annotated = [(raw.annotation, raw.name, raw.tok, f)
                     for raw, f in [*self.theories.values(), *self.views.values()]
                     if raw.annotation is not None]
        for ann, item, tok, file in annotated:
            s = spec(ann.realm, tok, file)
            if ann.role == "face":
                set_field(s, "face", item, f"face of realm {ann.realm}", tok, file)
            elif ann.role == "equiv":
                s["equivs"].append(item)
            else:
                ps = s["pillars"].setdefault(ann.pillar, {})
                set_field(ps, ann.role, item,
                          f"{ann.role} of pillar {ann.pillar} in {ann.realm}", tok, file)

        for name, s in specs.items():
            tok, file = s["loc"]
            ok = True
            if s["face"] is None:
                self.report(ParseError(f"realm {name} has no face", subject=name), tok, file)
                ok = False
            pillars = []
            for pname, ps in s["pillars"].items():
                missing = [k for k in ("bottom", "top", "interface") if k not in ps]
                if missing:
                    self.report(ParseError(f"pillar {pname} of realm {name} lacks "
                                           f"{', '.join(missing)}", subject=pname), tok, file)
                    ok = False
                    continue
                pillars.append(Pillar(pname, ps["bottom"], ps["top"], ps["interface"]))
            refs = [("theory", s["face"])] if s["face"] else []
            for p in pillars:
                refs += [("theory", p.bottom), ("theory", p.top), ("view", p.interface)]
            refs += [("view", e) for e in s["equivs"]]
            for kind, ref in refs:
                if kind == "theory" and ref not in self.g.theories:
                    if ref not in self.theories:
                        self.report(UnknownTheory(f"realm {name}: unknown theory {ref!r}",
                                                  subject=ref), tok, file)
                    ok = False
                elif kind == "view" and ref not in self.g.views:
                    if ref not in self.views:
                        self.report(UnknownView(f"realm {name}: unknown view {ref!r}",
                                                subject=ref), tok, file)
                    ok = False
            if ok:
                equivs = tuple(dict.fromkeys(s["equivs"]))
                self.g = self.g.put_realm(Realm(name, s["face"], tuple(pillars), equivs))
                self.origin[name] = file

    def run(self) -> None:
        for name, (raw, file) in self.theories.items():
            self.resolve(name, raw.tok, file)
        for raw, file in self.edges:
            missing = [n for n in (raw.source, raw.target) if n not in self.g.theories]
            if missing:
                if any(n not in self.theories for n in missing):
                    self.report(UnknownTheory(f"edge mentions unknown theory {missing[0]!r}",
                                              subject=missing[0]), raw.tok, file)
                continue
            try:
                self.g = add_extension_edge(self.g, raw.source, raw.target)
            except KernelError as e:
                self.report(e, raw.tok, file)
        for d, file in self.discharges:
            if d.view not in self.views:
                self.report(UnknownView(f"discharge for unknown view {d.view!r}",
                                        subject=d.view), d.tok, file)
        for raw, file in self.views.values():
            self.build_view(raw, file)
        self.build_realms()


def load_sources(sources: Iterable[tuple[str, str]], unfold_depth: int = 2,
                 budget: int | None = None, verify: bool = True) -> Workspace:
    """Load ``(filename, text)`` pairs; references may cross files freely."""
    loader = _Loader(unfold_depth, budget, verify)
    files = []
    for name, text in sources:
        files.append(name)
        loader.collect(text, name)
    loader.run()
    return Workspace(tuple(files), loader.g, tuple(loader.diags), loader.origin)


def load(paths: Iterable[str | Path], unfold_depth: int = 2, budget: int | None = None,
         verify: bool = True) -> Workspace:
    sources = [(str(p), Path(p).read_text(encoding="utf-8")) for p in paths]
    return load_sources(sources, unfold_depth, budget, verify)


def load_corpus(unfold_depth: int = 2, budget: int | None = None) -> Workspace:
    return load(corpus_files(), unfold_depth, budget)


def with_graph(ws: Workspace, g: TheoryGraph) -> Workspace:
    return replace(ws, graph=g)

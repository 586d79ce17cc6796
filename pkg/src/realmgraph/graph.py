"""Theory graphs: theories, extension edges, developments and conservativity."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from graphlib import CycleError, TopologicalSorter
from typing import TYPE_CHECKING, Mapping

from .errors import (
    DuplicateTheoryName,
    DuplicateViewName,
    MultipleSinks,
    MultipleSources,
    NoPath,
    NotAnExtension,
    UnknownTheory,
    UnknownView,
    WouldCreateCycle,
)
from .syntax import Axiom, Declaration, Definition, Theory

if TYPE_CHECKING:
    from .realms import Realm
    from .views import View


@dataclass(frozen=True)
class ExtensionEdge:
    source: str
    target: str
    suffix: tuple[Declaration, ...]


@dataclass(frozen=True, eq=False)
class TheoryGraph:
    """A persistent theory graph; every mutator returns a new value.

    The mappings are never mutated after construction.
    """

    theories: Mapping[str, Theory] = field(default_factory=dict)
    edges: tuple[ExtensionEdge, ...] = ()
    views: Mapping[str, "View"] = field(default_factory=dict)
    realms: Mapping[str, "Realm"] = field(default_factory=dict)

    def theory(self, name: str) -> Theory:
        try:
            return self.theories[name]
        except KeyError:
            raise UnknownTheory(f"unknown theory {name!r}", subject=name) from None

    def view(self, name: str) -> "View":
        try:
            return self.views[name]
        except KeyError:
            raise UnknownView(f"unknown view {name!r}", subject=name) from None

    def edge(self, source: str, target: str) -> ExtensionEdge | None:
        for e in self.edges:
            if e.source == source and e.target == target:
                return e
        return None

    def successors(self, name: str) -> list[str]:
        return [e.target for e in self.edges if e.source == name]

    def predecessors(self, name: str) -> list[str]:
        return [e.source for e in self.edges if e.target == name]

    def topological_order(self) -> list[str]:
        ts: TopologicalSorter[str] = TopologicalSorter()
        for n in self.theories:
            ts.add(n)
        for e in self.edges:
            ts.add(e.target, e.source)
        return list(ts.static_order())

    # persistent mutators

    def add_theory(self, t: Theory) -> "TheoryGraph":
        return add_theory(self, t)

    def add_edge(self, source: str, target: str) -> "TheoryGraph":
        return add_extension_edge(self, source, target)

    def add_view(self, v: "View") -> "TheoryGraph":
        if v.name in self.views:
            raise DuplicateViewName(f"view {v.name!r} already exists", subject=v.name)
        return self.put_view(v)

    def put_view(self, v: "View") -> "TheoryGraph":
        """Insert or replace a view."""
        views = dict(self.views)
        views[v.name] = v
        return replace(self, views=views)

    def put_realm(self, r: "Realm") -> "TheoryGraph":
        realms = dict(self.realms)
        realms[r.name] = r
        return replace(self, realms=realms)

    def fresh_theory_name(self, base: str) -> str:
        return fresh_name(base, self.theories)

    def fresh_view_name(self, base: str) -> str:
        return fresh_name(base, self.views)


def fresh_name(base: str, taken) -> str:
    if base not in taken:
        return base
    k = 2
    while f"{base}_{k}" in taken:
        k += 1
    return f"{base}_{k}"


def add_theory(g: TheoryGraph, t: Theory) -> TheoryGraph:
    if t.name in g.theories:
        raise DuplicateTheoryName(f"theory {t.name!r} already exists", subject=t.name)
    theories = dict(g.theories)
    theories[t.name] = t
    return replace(g, theories=theories)


def add_extension_edge(g: TheoryGraph, source: str, target: str) -> TheoryGraph:
    a, b = g.theory(source), g.theory(target)
    if g.edge(source, target) is not None:
        return g
    ts: TopologicalSorter[str] = TopologicalSorter()
    for e in g.edges:
        ts.add(e.target, e.source)
    ts.add(target, source)
    try:
        ts.prepare()
    except CycleError as exc:
        raise WouldCreateCycle(
            f"edge {source} -> {target} would close the cycle {' -> '.join(exc.args[1])}",
            subject=f"{source}->{target}") from None
    if not a.is_prefix_of(b):
        raise NotAnExtension(f"{target} does not extend {source}", subject=f"{source}->{target}")
    edge = ExtensionEdge(source, target, b.decls[len(a.decls):])
    return replace(g, edges=g.edges + (edge,))


@dataclass(frozen=True)
class Development:
    nodes: frozenset[str]
    bottom: str
    top: str
    edges: tuple[ExtensionEdge, ...]

    @property
    def order(self) -> list[str]:
        """Nodes in a deterministic topological order (bottom first)."""
        ts: TopologicalSorter[str] = TopologicalSorter()
        for n in sorted(self.nodes):
            ts.add(n)
        for e in self.edges:
            ts.add(e.target, e.source)
        return list(ts.static_order())


def _reachable(g: TheoryGraph, start: str, forward: bool) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        n = stack.pop()
        for m in (g.successors(n) if forward else g.predecessors(n)):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def development(g: TheoryGraph, bottom: str, top: str,
                nodes: frozenset[str] | set[str] | None = None) -> Development:
    """The development from ``bottom`` to ``top``.

    Without ``nodes`` this is the subgraph of all extension paths. With an
    explicit node set, the induced subgraph is checked for a unique source
    and sink instead.
    """
    g.theory(bottom)
    g.theory(top)
    if nodes is None:
        down = _reachable(g, bottom, True)
        if top not in down:
            raise NoPath(f"no extension path from {bottom} to {top}", subject=f"{bottom}->{top}")
        member = frozenset(down & _reachable(g, top, False))
    else:
        member = frozenset(nodes)
        for n in member:
            g.theory(n)
    edges = tuple(e for e in g.edges if e.source in member and e.target in member)
    sources = sorted(n for n in member if not any(e.target == n for e in edges))
    sinks = sorted(n for n in member if not any(e.source == n for e in edges))
    if sources != [bottom]:
        raise MultipleSources(f"development has sources {sources}, expected only {bottom}",
                              subject=",".join(sources))
    if sinks != [top]:
        raise MultipleSinks(f"development has sinks {sinks}, expected only {top}",
                            subject=",".join(sinks))
    if nodes is not None and top not in _reachable(g, bottom, True):
        raise NoPath(f"no extension path from {bottom} to {top}", subject=f"{bottom}->{top}")
    return Development(member, bottom, top, edges)


class Verdict(enum.Enum):
    SYNTACTIC = "Syntactic"
    BY_BACK_VIEW = "ByBackView"
    NOT_ESTABLISHED = "NotEstablished"


@dataclass(frozen=True)
class EdgeVerdict:
    edge: ExtensionEdge
    verdict: Verdict
    via: str | None = None
    reason: str | None = None


@dataclass(frozen=True)
class ConservativityReport:
    development: Development
    verdicts: tuple[EdgeVerdict, ...]

    @property
    def conservative(self) -> bool:
        return all(v.verdict is not Verdict.NOT_ESTABLISHED for v in self.verdicts)

    @property
    def failures(self) -> list[EdgeVerdict]:
        return [v for v in self.verdicts if v.verdict is Verdict.NOT_ESTABLISHED]


def syntactically_conservative(base: Theory, suffix: tuple[Declaration, ...]) -> str | None:
    """None if the suffix is conservative by construction, else the reason it is not.

    Definitions whose right-hand side has extra variables are only accepted when
    their well-definedness condition is already a fact of the context.
    """
    from .views import lookup_fact

    ctx = base
    for d in suffix:
        if isinstance(d, Axiom):
            return f"axiom {d.name}"
        if isinstance(d, Definition):
            wd = d.well_definedness()
            if wd is not None and lookup_fact(ctx, wd, 0) is None:
                return f"definition {d.name} needs its well-definedness condition"
        ctx = Theory(ctx.name, ctx.decls + (d,))
    return None


def classify_edge(g: TheoryGraph, edge: ExtensionEdge, unfold_depth: int = 2) -> EdgeVerdict:
    reason = syntactically_conservative(g.theory(edge.source), edge.suffix)
    if reason is None:
        return EdgeVerdict(edge, Verdict.SYNTACTIC)
    from .views import check_conservative_extension

    for name in sorted(g.views):
        v = g.views[name]
        if v.source == edge.target and v.target == edge.source:
            if check_conservative_extension(g, edge.source, edge.target, v, unfold_depth):
                return EdgeVerdict(edge, Verdict.BY_BACK_VIEW, via=name)
    return EdgeVerdict(edge, Verdict.NOT_ESTABLISHED, reason=reason)


def is_conservative_development(g: TheoryGraph, d: Development,
                                unfold_depth: int = 2) -> ConservativityReport:
    verdicts = tuple(classify_edge(g, e, unfold_depth)
                     for e in sorted(d.edges, key=lambda e: (e.source, e.target)))
    return ConservativityReport(d, verdicts)

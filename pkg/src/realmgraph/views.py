"""Views: symbol maps between theories with generated proof obligations."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Mapping

from .errors import (
    ComposeMismatch,
    DischargeFailed,
    KernelError,
    NotAnExtension,
    NotTotal,
    SignatureMismatch,
    UnknownSymbolInMap,
    UnmappedSymbol,
)
from .syntax import (
    App,
    Axiom,
    BINARY,
    Definition,
    Eq,
    Forall,
    Formula,
    Not,
    OpSig,
    SortSig,
    Term,
    Theorem,
    Theory,
    Var,
    alpha_key,
    formula_ops,
    is_reflexive,
    term_vars,
)

if TYPE_CHECKING:
    from .graph import TheoryGraph
    from .oracle import FiniteStructure


class Status(enum.Enum):
    OPEN = "Open"
    AXIOM = "DischargedByAxiom"
    DEFINITION = "DischargedByDefinition"
    THEOREM = "DischargedByTheorem"
    COMPOSED = "DischargedByComposition"
    ASSUMED = "Assumed"
    FINITE = "FiniteChecked"


PROOF_GRADE = frozenset({Status.AXIOM, Status.DEFINITION, Status.THEOREM, Status.COMPOSED})


@dataclass(frozen=True)
class Obligation:
    origin: str
    statement: Formula
    status: Status = Status.OPEN
    by: str | None = None
    max_size: int | None = None
    countermodel: "FiniteStructure | None" = None

    @property
    def closed(self) -> bool:
        return self.status is not Status.OPEN

    @property
    def proof_grade(self) -> bool:
        return self.status in PROOF_GRADE

    def describe(self) -> str:
        if self.status is Status.FINITE:
            return f"FiniteChecked({self.max_size})"
        if self.status is Status.OPEN:
            if self.countermodel is not None:
                return f"Open(countermodel of size {self.countermodel.size})"
            return "Open"
        if self.by:
            return f"{self.status.value}({self.by})"
        return self.status.value


@dataclass(frozen=True)
class Directive:
    """A user-supplied discharge instruction; ``origin`` may be ``*``."""

    origin: str
    method: str  # "theorem" | "finite-check" | "assumption"
    arg: str | int | None = None
    location: tuple[str | None, int | None, int | None] = (None, None, None)


@dataclass(frozen=True, eq=False)
class View:
    name: str
    source: str
    target: str
    symbol_map: Mapping[str, str]
    expand: Mapping[str, Definition] = field(default_factory=dict)
    obligations: tuple[Obligation, ...] = ()
    directives: tuple[Directive, ...] = ()
    inherited: Mapping[str, Obligation] = field(default_factory=dict)
    is_inclusion: bool = False
    expansive_witness: str | None = None
    faithful: "Evidence | None" = None
    checked: bool = False

    @property
    def is_identity(self) -> bool:
        return (self.source == self.target and not self.expand
                and all(k == v for k, v in self.symbol_map.items()))

    @property
    def injective(self) -> bool:
        return is_interface(self)

    @property
    def image(self) -> frozenset[str]:
        return frozenset(self.symbol_map.values())

    def obligation(self, origin: str) -> Obligation | None:
        for ob in self.obligations:
            if ob.origin == origin:
                return ob
        return None

    @property
    def open(self) -> list[Obligation]:
        return [ob for ob in self.obligations if not ob.closed]

    @property
    def discharged(self) -> bool:
        return self.checked and not self.open

    def apply(self, symbol: str) -> str:
        try:
            return self.symbol_map[symbol]
        except KeyError:
            raise UnmappedSymbol(f"view {self.name} does not map {symbol!r}",
                                 subject=symbol) from None


@dataclass(frozen=True, eq=False)
class PartialView(View):
    undefined: tuple[str, ...] = ()

    @property
    def total(self) -> bool:
        return not self.undefined


@dataclass(frozen=True)
class Evidence:
    """Finite evidence for faithfulness; never a proof."""

    max_size: int
    probes: tuple[str, ...]
    violations: tuple[tuple[str, "FiniteStructure"], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ViewReport:
    view: View
    errors: tuple[KernelError, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def obligations(self) -> tuple[Obligation, ...]:
        return self.view.obligations

    @property
    def open(self) -> list[Obligation]:
        return self.view.open


# unfolding and translation


def _formula_var_names(f: Formula, acc: set[str]) -> set[str]:
    if isinstance(f, Eq):
        acc.update(v.name for v in term_vars(f.lhs))
        acc.update(v.name for v in term_vars(f.rhs))
    elif isinstance(f, Not):
        _formula_var_names(f.body, acc)
    elif isinstance(f, BINARY):
        _formula_var_names(f.left, acc)
        _formula_var_names(f.right, acc)
    else:
        acc.add(f.var)
        _formula_var_names(f.body, acc)
    return acc


def _unfold_term(t: Term, defs: Mapping[str, Definition], taken: set[str],
                 binders: list[tuple[str, str]]) -> Term:
    if isinstance(t, Var):
        return t
    args = tuple(_unfold_term(a, defs, taken, binders) for a in t.args)
    d = defs.get(t.op)
    if d is None:
        return App(t.op, args)
    params, rhs = d.parts()
    sub: dict[str, Term] = {p.name: a for p, a in zip(params, args)}
    for x in d.extra_vars():
        k, name = 0, x.name
        while name in taken:
            k += 1
            name = f"{x.name}{k}"
        taken.add(name)
        sub[x.name] = Var(name, x.sort)
        binders.append((name, x.sort))
    return _subst(rhs, sub)


def _subst(t: Term, sub: Mapping[str, Term]) -> Term:
    if isinstance(t, Var):
        return sub.get(t.name, t)
    return App(t.op, tuple(_subst(a, sub) for a in t.args))


def _unfold_once(f: Formula, defs: Mapping[str, Definition], taken: set[str]) -> Formula:
    if isinstance(f, Eq):
        binders: list[tuple[str, str]] = []
        out: Formula = Eq(_unfold_term(f.lhs, defs, taken, binders),
                          _unfold_term(f.rhs, defs, taken, binders))
        # a definiens with extra variables denotes the same value for every
        # choice of them, so closing the atom over them is sound in any polarity
        for name, sort in reversed(binders):
            out = Forall(name, sort, out)
        return out
    if isinstance(f, Not):
        return Not(_unfold_once(f.body, defs, taken))
    if isinstance(f, BINARY):
        return type(f)(_unfold_once(f.left, defs, taken), _unfold_once(f.right, defs, taken))
    return type(f)(f.var, f.sort, _unfold_once(f.body, defs, taken))


def unfold(f: Formula, defs: Mapping[str, Definition], passes: int | None = None) -> Formula:
    """Replace defined symbols by their definientia.

    One pass replaces every occurrence present at its start; ``passes=None``
    repeats until no symbol of ``defs`` remains.
    """
    taken = _formula_var_names(f, set())
    n = 0
    while passes is None or n < passes:
        if not set(formula_ops(f)) & defs.keys():
            break
        f = _unfold_once(f, defs, taken)
        n += 1
    return f


def _map_term(v: View, t: Term) -> Term:
    if isinstance(t, Var):
        return Var(t.name, v.apply(t.sort))
    return App(v.apply(t.op), tuple(_map_term(v, a) for a in t.args))


def _map_formula(v: View, f: Formula) -> Formula:
    if isinstance(f, Eq):
        return Eq(_map_term(v, f.lhs), _map_term(v, f.rhs))
    if isinstance(f, Not):
        return Not(_map_formula(v, f.body))
    if isinstance(f, BINARY):
        return type(f)(_map_formula(v, f.left), _map_formula(v, f.right))
    return type(f)(f.var, v.apply(f.sort), _map_formula(v, f.body))


def translate_formula(v: View, f: Formula) -> Formula:
    """Homomorphic image of ``f``; expanded symbols are unfolded first."""
    if v.expand:
        f = unfold(f, v.expand)
    return _map_formula(v, f)


def translate_term(v: View, t: Term) -> Term:
    if v.expand:
        taken = {x.name for x in term_vars(t)}
        binders: list[tuple[str, str]] = []
        while set(_ops_of_term(t)) & v.expand.keys():
            t = _unfold_term(t, v.expand, taken, binders)
    return _map_term(v, t)


def _ops_of_term(t: Term):
    if isinstance(t, App):
        yield t.op
        for a in t.args:
            yield from _ops_of_term(a)


# discharge


_FACT_STATUS = {Axiom: Status.AXIOM, Definition: Status.DEFINITION, Theorem: Status.THEOREM}


@lru_cache(maxsize=512)
def _fact_keys(t: Theory, depth: int) -> tuple[tuple[str, Status, frozenset], ...]:
    defs = t.definitions
    out = []
    for fact in t.facts:
        keys = frozenset(alpha_key(unfold(fact.formula, defs, d)) for d in range(depth + 1))
        out.append((fact.name, _FACT_STATUS[type(fact)], keys))
    return tuple(out)


def _flip(f: Formula) -> Formula:
    """Swap the sides of an equation under a leading block of universal quantifiers."""
    if isinstance(f, Forall):
        return Forall(f.var, f.sort, _flip(f.body))
    if isinstance(f, Eq):
        return Eq(f.rhs, f.lhs)
    return f


def lookup_fact(target: Theory, statement: Formula, unfold_depth: int = 2,
                only: str | None = None) -> tuple[Status, str | None] | None:
    """Find a target fact alpha-equivalent to ``statement`` modulo bounded unfolding.

    Equations also match with their sides swapped. Returns the first match in
    declaration order. A statement that becomes
    ``t = t`` after unfolding is discharged by definition.
    """
    defs = target.definitions
    unfolded = [unfold(statement, defs, d) for d in range(unfold_depth + 1)]
    if only is None:
        for d, s in enumerate(unfolded):
            if is_reflexive(s):
                return Status.DEFINITION, (None if d == 0 else "unfolding")
    keys = {alpha_key(s) for s in unfolded} | {alpha_key(_flip(s)) for s in unfolded}
    for name, status, fact_keys in _fact_keys(target, unfold_depth):
        if only is not None and name != only:
            continue
        if fact_keys & keys:
            return status, name
    return None


def _structure_errors(g: "TheoryGraph", v: View, partial: bool) -> list[KernelError]:
    src, tgt = g.theory(v.source), g.theory(v.target)
    errors: list[KernelError] = []
    for s, t in v.symbol_map.items():
        if s not in src.symbols:
            errors.append(UnknownSymbolInMap(
                f"view {v.name}: {s!r} is not a symbol of {v.source}", subject=s))
        if t not in tgt.symbols:
            errors.append(UnknownSymbolInMap(
                f"view {v.name}: {t!r} is not a symbol of {v.target}", subject=t))
    for s, d in v.expand.items():
        if s not in src.definitions or src.definitions[s] != d:
            errors.append(UnknownSymbolInMap(
                f"view {v.name}: {s!r} is not a defined symbol of {v.source}", subject=s))
    if errors:
        return errors
    if not partial:
        for s in src.symbols:
            if s not in v.symbol_map and s not in v.expand:
                errors.append(NotTotal(f"view {v.name} does not map {s!r}", subject=s))
    for s, t in v.symbol_map.items():
        ssig, tsig = src.signature_of(s), tgt.signature_of(t)
        if isinstance(ssig, SortSig) or isinstance(tsig, SortSig):
            if type(ssig) is not type(tsig):
                errors.append(SignatureMismatch(
                    f"view {v.name}: {s} and {t} are not both sorts or both operations",
                    subject=s))
            continue
        if any(a not in v.symbol_map for a in ssig.sorts()):
            continue
        want = OpSig(tuple(v.symbol_map[a] for a in ssig.args), v.symbol_map[ssig.result])
        if want != tsig:
            errors.append(SignatureMismatch(
                f"view {v.name}: {s} : {_sig_text(ssig)} translates to {_sig_text(want)} "
                f"but {t} : {_sig_text(tsig)}", subject=s))
    return errors


def _sig_text(sig: OpSig) -> str:
    return " ".join(sig.args) + (" -> " if sig.args else "") + sig.result


def generate_obligations(g: "TheoryGraph", v: View) -> tuple[Obligation, ...]:
    """One obligation per source fact; a partial view skips facts it cannot translate."""
    src = g.theory(v.source)
    out = []
    for f in src.facts:
        try:
            out.append(Obligation(f.name, translate_formula(v, f.formula)))
        except UnmappedSymbol:
            if not isinstance(v, PartialView):
                raise
    return tuple(out)


def check_view(g: "TheoryGraph", v: View, unfold_depth: int = 2,
               budget: int | None = None) -> ViewReport:
    """Generate and try to discharge the obligations of ``v``.

    Automatic lookup runs first, then statuses inherited from composition,
    then the view's discharge directives (origin-specific before ``*``).
    """
    partial = isinstance(v, PartialView)
    errors = _structure_errors(g, v, partial)
    if errors:
        return ViewReport(replace(v, obligations=(), checked=False), tuple(errors))
    target = g.theory(v.target)
    obligations = []
    for ob in generate_obligations(g, v):
        found = lookup_fact(target, ob.statement, unfold_depth)
        if found is not None:
            ob = replace(ob, status=found[0], by=found[1])
        elif ob.origin in v.inherited and v.inherited[ob.origin].closed:
            inh = v.inherited[ob.origin]
            ob = replace(ob, status=inh.status, by=inh.by, max_size=inh.max_size)
        obligations.append(ob)

    pending_finite: dict[int, list[int]] = {}
    for i, ob in enumerate(obligations):
        if ob.closed:
            continue
        d = _directive_for(v, ob.origin)
        if d is None:
            continue
        if d.method == "assumption":
            obligations[i] = replace(ob, status=Status.ASSUMED)
        elif d.method == "theorem":
            found = lookup_fact(target, ob.statement, unfold_depth, only=str(d.arg))
            if found is None or found[0] is not Status.THEOREM:
                errors.append(DischargeFailed(
                    f"view {v.name}: obligation {ob.origin} is not the statement of "
                    f"theorem {d.arg}", subject=f"{v.name}.{ob.origin}").at(*d.location))
            else:
                obligations[i] = replace(ob, status=Status.THEOREM, by=found[1])
        else:
            pending_finite.setdefault(int(d.arg), []).append(i)  # type: ignore[arg-type]

    if pending_finite:
        from .oracle import finite_check_many

        for n, idxs in sorted(pending_finite.items()):
            results = finite_check_many(target, [obligations[i].statement for i in idxs], n,
                                        budget=budget)
            for i, cm in zip(idxs, results):
                if cm is None:
                    obligations[i] = replace(obligations[i], status=Status.FINITE, max_size=n)
                else:
                    obligations[i] = replace(obligations[i], countermodel=cm)

    checked = replace(v, obligations=tuple(obligations), checked=True)
    return ViewReport(checked, tuple(errors))


def _directive_for(v: View, origin: str) -> Directive | None:
    for d in v.directives:
        if d.origin == origin:
            return d
    for d in v.directives:
        if d.origin == "*":
            return d
    return None


# constructions


def identity_view(g: "TheoryGraph", theory: str, name: str | None = None) -> View:
    t = g.theory(theory)
    v = View(name or f"id_{theory}", theory, theory, {s: s for s in t.symbols})
    return check_view(g, v).view


def inclusion_view(g: "TheoryGraph", source: str, target: str,
                   name: str | None = None) -> View:
    a, b = g.theory(source), g.theory(target)
    if not a.is_prefix_of(b):
        raise NotAnExtension(f"{target} does not extend {source}",
                             subject=f"{source}->{target}")
    v = View(name or f"incl_{source}_{target}", source, target,
             {s: s for s in a.symbols}, is_inclusion=True)
    return check_view(g, v).view


def embedding_view(g: "TheoryGraph", source: str, target: str,
                   name: str | None = None) -> View:
    """Identity-named view into a theory containing all of ``source``'s symbols."""
    a = g.theory(source)
    v = View(name or f"emb_{source}_{target}", source, target, {s: s for s in a.symbols})
    return check_view(g, v).view


def _grade(ob: Obligation) -> tuple[int, int]:
    if ob.proof_grade:
        return (0, 0)
    if ob.status is Status.FINITE:
        return (1, -(ob.max_size or 0))
    return (2, 0)


def _combine(chain: str, legs: Iterable[Obligation]) -> Obligation | None:
    legs = list(legs)
    if any(not ob.closed for ob in legs):
        return None
    worst = max(legs, key=_grade)
    if worst.proof_grade:
        return Obligation(legs[0].origin, legs[0].statement, Status.COMPOSED, by=chain)
    return Obligation(legs[0].origin, legs[0].statement, worst.status, by=chain,
                      max_size=worst.max_size)


def _composed_statuses(v: View, w: View) -> dict[str, Obligation]:
    """Statuses the composite may inherit from the closed obligations of its legs."""
    out: dict[str, Obligation] = {}
    if not (v.checked and w.checked):
        return out
    for ob in v.obligations:
        if not ob.closed:
            continue
        via = w.obligation(ob.by) if ob.by else None
        if ob.proof_grade and via is not None:
            legs = [ob, via]
            chain = f"{v.name}.{ob.origin};{w.name}.{via.origin}"
        else:
            legs = [ob, *w.obligations]
            chain = f"{v.name}.{ob.origin};{w.name}"
        combined = _combine(chain, legs)
        if combined is not None:
            out[ob.origin] = replace(combined, origin=ob.origin)
    return out


def compose_views(v: View, w: View, g: "TheoryGraph | None" = None,
                  name: str | None = None, unfold_depth: int = 2) -> View:
    """The view ``w ∘ v``; with a graph its obligations are regenerated and checked."""
    if v.target != w.source:
        raise ComposeMismatch(f"cannot compose {v.name} : {v.source} -> {v.target} with "
                              f"{w.name} : {w.source} -> {w.target}",
                              subject=f"{v.name};{w.name}")
    smap: dict[str, str] = {}
    expand = dict(v.expand)
    undefined = list(getattr(v, "undefined", ()))
    for s, t in v.symbol_map.items():
        if t in w.symbol_map:
            smap[s] = w.symbol_map[t]
        elif t in w.expand:
            d = g.theory(v.source).definitions.get(s) if g is not None else None
            if d is None:
                raise ComposeMismatch(
                    f"{w.name} expands {t}, so {v.name}({s}) = {t} has no symbol image",
                    subject=s)
            expand[s] = d
        else:
            undefined.append(s)
    cls = PartialView if (undefined or isinstance(v, PartialView)
                          or isinstance(w, PartialView)) else View
    kwargs = {"undefined": tuple(undefined)} if cls is PartialView else {}
    out = cls(name or f"{w.name}_o_{v.name}", v.source, w.target, smap, expand,
              inherited=_composed_statuses(v, w), **kwargs)
    if g is None:
        return out
    return check_view(g, out, unfold_depth).view


def is_interface(v: View) -> bool:
    return len(set(v.symbol_map.values())) == len(v.symbol_map)


def check_conservative_extension(g: "TheoryGraph", source: str, target: str, back: View,
                                 unfold_depth: int = 2) -> bool:
    """True iff ``back ∘ inclusion(source, target)`` is the identity on ``source``."""
    base, ext = g.theory(source), g.theory(target)
    if not base.is_prefix_of(ext):
        raise NotAnExtension(f"{target} does not extend {source}",
                             subject=f"{source}->{target}")
    if back.source != target or back.target != source:
        return False
    report = check_view(g, back, unfold_depth) if not back.checked else ViewReport(back)
    if not report.ok or report.view.open:
        return False
    return all(report.view.symbol_map.get(s) == s for s in base.symbols)


def is_expansive(v: View, witness: View) -> bool:
    if witness.source != v.target or witness.target != v.target:
        return False
    image = v.image
    if not set(witness.symbol_map.values()) <= image:
        return False
    return all(witness.symbol_map.get(s) == s for s in image)


def faithful_evidence(g: "TheoryGraph", v: View, max_size: int,
                      probes: Iterable[Formula] = (), budget: int | None = None) -> Evidence:
    """Check that source-refutable probes stay refutable in the target up to ``max_size``.

    The default probe pool asks, per source sort, whether it is a singleton.
    """
    from .oracle import find_countermodel
    from .printer import format_formula

    src, tgt = g.theory(v.source), g.theory(v.target)
    pool = [Forall("x", s, Forall("y", s, Eq(Var("x", s), Var("y", s)))) for s in src.sorts]
    pool.extend(probes)
    tested, violations = [], []
    for phi in pool:
        text = format_formula(phi, src)
        if find_countermodel(src, phi, max_size, budget=budget) is None:
            continue
        tested.append(text)
        image = translate_formula(v, phi)
        if find_countermodel(tgt, image, max_size, budget=budget) is None:
            m = find_countermodel(src, phi, max_size, budget=budget)
            violations.append((text, m))
    return Evidence(max_size, tuple(tested), tuple(violations))

"""Declaration language: many-sorted first-order logic with equality.

Theories are immutable sequences of declarations.  Formulas are stored closed:
free variables in source text are universally quantified in order of first
occurrence when the formula is elaborated (see :func:`close`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import (
    ArityMismatch,
    BadDefinition,
    DuplicateName,
    KernelError,
    NoCommonPrefix,
    NonDisjoint,
    SortMismatch,
    UnknownSort,
    UnknownSymbol,
)

# --------------------------------------------------------------------------
# terms and formulas


@dataclass(frozen=True)
class Var:
    name: str
    sort: str


@dataclass(frozen=True)
class App:
    op: str
    args: tuple["Term", ...] = ()


Term = Union[Var, App]


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    sort: str
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    sort: str
    body: "Formula"


Formula = Union[Eq, Not, And, Or, Implies, Forall, Exists]
BINARY = (And, Or, Implies)
QUANTIFIERS = (Forall, Exists)


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    else:
        for a in t.args:
            yield from term_vars(a)


def term_ops(t: Term) -> Iterator[str]:
    if isinstance(t, App):
        yield t.op
        for a in t.args:
            yield from term_ops(a)


def free_vars(f: Formula) -> list[Var]:
    """Free variables in order of first occurrence (left to right)."""
    out: dict[str, Var] = {}

    def walk(g: Formula, bound: frozenset[str]) -> None:
        if isinstance(g, Eq):
            for t in (g.lhs, g.rhs):
                for v in term_vars(t):
                    if v.name not in bound and v.name not in out:
                        out[v.name] = v
        elif isinstance(g, Not):
            walk(g.body, bound)
        elif isinstance(g, BINARY):
            walk(g.left, bound)
            walk(g.right, bound)
        else:
            walk(g.body, bound | {g.var})

    walk(f, frozenset())
    return list(out.values())


def formula_ops(f: Formula) -> Iterator[str]:
    if isinstance(f, Eq):
        yield from term_ops(f.lhs)
        yield from term_ops(f.rhs)
    elif isinstance(f, Not):
        yield from formula_ops(f.body)
    elif isinstance(f, BINARY):
        yield from formula_ops(f.left)
        yield from formula_ops(f.right)
    else:
        yield from formula_ops(f.body)


def formula_sorts(f: Formula) -> Iterator[str]:
    """Sorts mentioned by binders and variables."""
    if isinstance(f, Eq):
        for t in (f.lhs, f.rhs):
            for v in term_vars(t):
                yield v.sort
    elif isinstance(f, Not):
        yield from formula_sorts(f.body)
    elif isinstance(f, BINARY):
        yield from formula_sorts(f.left)
        yield from formula_sorts(f.right)
    else:
        yield f.sort
        yield from formula_sorts(f.body)


def close(f: Formula) -> Formula:
    """Universally quantify the free variables of ``f`` (first occurrence outermost)."""
    for v in reversed(free_vars(f)):
        f = Forall(v.name, v.sort, f)
    return f


def strip_foralls(f: Formula) -> tuple[list[tuple[str, str]], Formula]:
    binders = []
    while isinstance(f, Forall):
        binders.append((f.var, f.sort))
        f = f.body
    return binders, f


def map_terms(f: Formula, fn) -> Formula:
    """Rebuild ``f`` with ``fn`` applied to each maximal term."""
    if isinstance(f, Eq):
        return Eq(fn(f.lhs), fn(f.rhs))
    if isinstance(f, Not):
        return Not(map_terms(f.body, fn))
    if isinstance(f, BINARY):
        return type(f)(map_terms(f.left, fn), map_terms(f.right, fn))
    return type(f)(f.var, f.sort, map_terms(f.body, fn))


def rename_term(t: Term, m: Mapping[str, str]) -> Term:
    """Rename operation and sort symbols; unmapped names are kept."""
    if isinstance(t, Var):
        return Var(t.name, m.get(t.sort, t.sort))
    return App(m.get(t.op, t.op), tuple(rename_term(a, m) for a in t.args))


def rename_symbols(f: Formula, m: Mapping[str, str]) -> Formula:
    if isinstance(f, Eq):
        return Eq(rename_term(f.lhs, m), rename_term(f.rhs, m))
    if isinstance(f, Not):
        return Not(rename_symbols(f.body, m))
    if isinstance(f, BINARY):
        return type(f)(rename_symbols(f.left, m), rename_symbols(f.right, m))
    return type(f)(f.var, m.get(f.sort, f.sort), rename_symbols(f.body, m))


def substitute_term(t: Term, sub: dict[str, Term]) -> Term:
    if isinstance(t, Var):
        return sub.get(t.name, t)
    return App(t.op, tuple(substitute_term(a, sub) for a in t.args))


def substitute(f: Formula, sub: dict[str, Term]) -> Formula:
    """Capture-avoiding substitution of terms for free variables."""
    if not sub:
        return f
    if isinstance(f, Eq):
        return Eq(substitute_term(f.lhs, sub), substitute_term(f.rhs, sub))
    if isinstance(f, Not):
        return Not(substitute(f.body, sub))
    if isinstance(f, BINARY):
        return type(f)(substitute(f.left, sub), substitute(f.right, sub))
    inner = {k: v for k, v in sub.items() if k != f.var}
    incoming = {w.name for t in inner.values() for w in term_vars(t)}
    var, body = f.var, f.body
    if var in incoming:
        taken = incoming | {v.name for v in free_vars(body)} | set(inner)
        fresh = fresh_var(var, taken)
        body = substitute(body, {var: Var(fresh, f.sort)})
        var = fresh
    return type(f)(var, f.sort, substitute(body, inner))


def fresh_var(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    if base not in taken:
        return base
    n = 1
    while f"{base}{n}" in taken:
        n += 1
    return f"{base}{n}"


# --------------------------------------------------------------------------
# alpha equivalence


def _db_term(t: Term, env: dict[str, int], depth: int):
    if isinstance(t, Var):
        if t.name in env:
            return ("b", depth - env[t.name], t.sort)
        return ("f", t.name, t.sort)
    return ("a", t.op, tuple(_db_term(a, env, depth) for a in t.args))


def _db(f: Formula, env: dict[str, int], depth: int):
    if isinstance(f, Eq):
        return ("eq", _db_term(f.lhs, env, depth), _db_term(f.rhs, env, depth))
    if isinstance(f, Not):
        return ("not", _db(f.body, env, depth))
    if isinstance(f, BINARY):
        return (type(f).__name__, _db(f.left, env, depth), _db(f.right, env, depth))
    inner = dict(env)
    inner[f.var] = depth + 1
    return (type(f).__name__, f.sort, _db(f.body, inner, depth + 1))


def alpha_key(f: Formula):
    """Hashable nameless form of ``close(f)``; equal keys iff alpha-equivalent."""
    return _db(close(f), {}, 0)


def alpha_eq(f: Formula, g: Formula) -> bool:
    return alpha_key(f) == alpha_key(g)


def is_reflexive(f: Formula) -> bool:
    """True for (closures of) trivial equations ``t = t``."""
    _, body = strip_foralls(f)
    return isinstance(body, Eq) and body.lhs == body.rhs


# --------------------------------------------------------------------------
# declarations


@dataclass(frozen=True)
class SortSig:
    """Signature of a sort declaration (``G : set`` in the figures)."""


@dataclass(frozen=True)
class OpSig:
    args: tuple[str, ...]
    result: str

    def sorts(self) -> tuple[str, ...]:
        return self.args + (self.result,)


Signature = Union[SortSig, OpSig]


@dataclass(frozen=True)
class Justification:
    kind: str = "assumed"  # external | assumed | finite-checked
    citation: str | None = None
    max_size: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("external", "assumed", "finite-checked"):
            raise ValueError(f"unknown justification kind {self.kind!r}")


ASSUMED = Justification()


@dataclass(frozen=True)
class Symbol:
    name: str
    sig: Signature
    glyph: str | None = None

    @property
    def is_sort(self) -> bool:
        return isinstance(self.sig, SortSig)


@dataclass(frozen=True)
class Axiom:
    name: str
    formula: Formula


@dataclass(frozen=True)
class Definition:
    """Explicit definition ``symbol(x1..xn) = rhs`` with ``symbol`` absent from rhs."""

    name: str
    symbol: str
    sig: OpSig
    definiens: Formula
    glyph: str | None = None

    @property
    def formula(self) -> Formula:
        return self.definiens

    def parts(self) -> tuple[tuple[Var, ...], Term]:
        """Return (parameters, right-hand side) of the defining equation."""
        _, body = strip_foralls(self.definiens)
        assert isinstance(body, Eq) and isinstance(body.lhs, App)
        return tuple(body.lhs.args), body.rhs  # type: ignore[arg-type]

    def extra_vars(self) -> list[Var]:
        """Variables of the right-hand side that are not parameters."""
        params, rhs = self.parts()
        names = {p.name for p in params}
        seen: dict[str, Var] = {}
        for v in term_vars(rhs):
            if v.name not in names:
                seen.setdefault(v.name, v)
        return list(seen.values())

    def well_definedness(self) -> Formula | None:
        """Condition under which a definiens with extra variables is independent of them.

        ``e := b/b`` yields ``forall b b'. b/b = b'/b'``.  None when the
        right-hand side only uses parameters.
        """
        extra = self.extra_vars()
        if not extra:
            return None
        _, rhs = self.parts()
        params, _ = self.parts()
        taken = {v.name for v in params} | {v.name for v in term_vars(rhs)}
        ren = {}
        for v in extra:
            name = fresh_var(v.name + "'", taken)
            taken.add(name)
            ren[v.name] = Var(name, v.sort)
        return close(Eq(rhs, substitute_term(rhs, ren)))


@dataclass(frozen=True)
class Theorem:
    name: str
    formula: Formula
    justification: Justification = ASSUMED


Declaration = Union[Symbol, Axiom, Definition, Theorem]


def declared_names(d: Declaration) -> tuple[str, ...]:
    if isinstance(d, Definition):
        return (d.name, d.symbol) if d.name != d.symbol else (d.name,)
    return (d.name,)


def introduced_symbol(d: Declaration) -> tuple[str, Signature, str | None] | None:
    if isinstance(d, Symbol):
        return d.name, d.sig, d.glyph
    if isinstance(d, Definition):
        return d.symbol, d.sig, d.glyph
    return None


# --------------------------------------------------------------------------
# theories


@dataclass(frozen=True)
class Theory:
    name: str
    decls: tuple[Declaration, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.decls, tuple):
            object.__setattr__(self, "decls", tuple(self.decls))

    @cached_property
    def names(self) -> frozenset[str]:
        return frozenset(n for d in self.decls for n in declared_names(d))

    @cached_property
    def sorts(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.decls if isinstance(d, Symbol) and d.is_sort)

    @cached_property
    def ops(self) -> dict[str, OpSig]:
        out: dict[str, OpSig] = {}
        for d in self.decls:
            info = introduced_symbol(d)
            if info and isinstance(info[1], OpSig):
                out[info[0]] = info[1]
        return out

    @cached_property
    def symbols(self) -> tuple[str, ...]:
        """All symbol names (sorts and operators) in declaration order."""
        return tuple(info[0] for d in self.decls if (info := introduced_symbol(d)))

    def signature_of(self, symbol: str) -> Signature:
        if symbol in self.sorts:
            return SortSig()
        try:
            return self.ops[symbol]
        except KeyError:
            raise UnknownSymbol(f"{symbol} not declared in {self.name}",
                                subject=symbol) from None

    @cached_property
    def glyphs(self) -> dict[str, str]:
        """Display glyph -> symbol name."""
        out = {}
        for d in self.decls:
            info = introduced_symbol(d)
            if info and info[2]:
                out[info[2]] = info[0]
        return out

    @cached_property
    def glyph_of(self) -> dict[str, str]:
        return {v: k for k, v in self.glyphs.items()}

    @cached_property
    def definitions(self) -> dict[str, Definition]:
        return {d.symbol: d for d in self.decls if isinstance(d, Definition)}

    @property
    def facts(self) -> tuple[Axiom | Definition | Theorem, ...]:
        return tuple(d for d in self.decls if not isinstance(d, Symbol))

    @property
    def axioms(self) -> tuple[Axiom, ...]:
        return tuple(d for d in self.decls if isinstance(d, Axiom))

    @property
    def primitive(self) -> bool:
        return all(isinstance(d, (Symbol, Axiom)) for d in self.decls)

    def decl(self, name: str) -> Declaration:
        for d in self.decls:
            if name in declared_names(d):
                return d
        raise UnknownSymbol(f"{name} not declared in {self.name}", subject=name)

    def prefix(self, n: int, name: str | None = None) -> Theory:
        return Theory(name or self.name, self.decls[:n])

    def renamed(self, name: str) -> Theory:
        return Theory(name, self.decls)

    def is_prefix_of(self, other: Theory) -> bool:
        n = len(self.decls)
        return other.decls[:n] == self.decls


EMPTY = Theory("empty")


# --------------------------------------------------------------------------
# well-formedness


@dataclass
class WfReport:
    decl: Declaration
    errors: list[KernelError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_first(self) -> None:
        if self.errors:
            raise self.errors[0]


def _check_term(ctx: Theory, t: Term, extra_ops: dict[str, OpSig],
                errors: list[KernelError]) -> str | None:
    if isinstance(t, Var):
        if t.sort not in ctx.sorts:
            errors.append(UnknownSort(f"variable {t.name} has undeclared sort {t.sort}",
                                      subject=t.sort))
            return None
        return t.sort
    sig = extra_ops.get(t.op) or ctx.ops.get(t.op)
    if sig is None:
        errors.append(UnknownSymbol(f"{t.op} is not declared", subject=t.op))
        for a in t.args:
            _check_term(ctx, a, extra_ops, errors)
        return None
    if len(sig.args) != len(t.args):
        errors.append(ArityMismatch(
            f"{t.op} expects {len(sig.args)} arguments, got {len(t.args)}", subject=t.op))
        return sig.result
    for expected, a in zip(sig.args, t.args):
        got = _check_term(ctx, a, extra_ops, errors)
        if got is not None and got != expected:
            errors.append(SortMismatch(
                f"argument of {t.op} has sort {got}, expected {expected}", subject=t.op))
    return sig.result


def check_formula(ctx: Theory, f: Formula, extra_ops: dict[str, OpSig] | None = None
                  ) -> list[KernelError]:
    errors: list[KernelError] = []
    extra_ops = extra_ops or {}

    def walk(g: Formula, bound: dict[str, str]) -> None:
        if isinstance(g, Eq):
            s1 = _check_term(ctx, g.lhs, extra_ops, errors)
            s2 = _check_term(ctx, g.rhs, extra_ops, errors)
            if s1 is not None and s2 is not None and s1 != s2:
                errors.append(SortMismatch(f"equation between sorts {s1} and {s2}"))
            for v in list(term_vars(g.lhs)) + list(term_vars(g.rhs)):
                if v.name in bound and bound[v.name] != v.sort:
                    errors.append(SortMismatch(
                        f"variable {v.name} bound at {bound[v.name]} used at {v.sort}",
                        subject=v.name))
        elif isinstance(g, Not):
            walk(g.body, bound)
        elif isinstance(g, BINARY):
            walk(g.left, bound)
            walk(g.right, bound)
        else:
            if g.sort not in ctx.sorts:
                errors.append(UnknownSort(f"binder {g.var} has undeclared sort {g.sort}",
                                          subject=g.sort))
            walk(g.body, {**bound, g.var: g.sort})

    walk(f, {})
    if free_vars(f):
        errors.append(BadDefinition("stored formulas must be closed"))
    return errors


def check_wf(context: Theory, decl: Declaration) -> WfReport:
    """Check that ``decl`` is well formed in the context of ``context``."""
    report = WfReport(decl)
    errors = report.errors
    for n in declared_names(decl):
        if n in context.names:
            errors.append(DuplicateName(f"{n} already declared in {context.name}", subject=n))
    if isinstance(decl, Symbol):
        if isinstance(decl.sig, OpSig):
            for s in decl.sig.sorts():
                if s not in context.sorts:
                    errors.append(UnknownSort(f"sort {s} of {decl.name} is not declared",
                                              subject=s))
        if decl.glyph and decl.glyph in context.glyphs:
            errors.append(DuplicateName(f"glyph {decl.glyph!r} already bound", subject=decl.glyph))
    elif isinstance(decl, Definition):
        for s in decl.sig.sorts():
            if s not in context.sorts:
                errors.append(UnknownSort(f"sort {s} of {decl.symbol} is not declared", subject=s))
        errors.extend(_check_definition_shape(decl))
        if not errors:
            errors.extend(check_formula(context, decl.definiens, {decl.symbol: decl.sig}))
    else:
        errors.extend(check_formula(context, decl.formula))
    return report


def _check_definition_shape(d: Definition) -> list[KernelError]:
    _, body = strip_foralls(d.definiens)
    bad = BadDefinition(f"definition of {d.symbol} must read {d.symbol}(x1..xn) = rhs",
                        subject=d.symbol)
    if not isinstance(body, Eq) or not isinstance(body.lhs, App) or body.lhs.op != d.symbol:
        return [bad]
    params = body.lhs.args
    if not all(isinstance(p, Var) for p in params):
        return [bad]
    if len({p.name for p in params}) != len(params):  # type: ignore[union-attr]
        return [BadDefinition(f"parameters of {d.symbol} must be distinct", subject=d.symbol)]
    if d.symbol in term_ops(body.rhs):
        return [BadDefinition(f"{d.symbol} may not occur in its own definiens",
                              subject=d.symbol)]
    return []


def check_theory(t: Theory) -> list[KernelError]:
    """Prefix well-formedness of a whole theory."""
    errors: list[KernelError] = []
    for i, d in enumerate(t.decls):
        errors.extend(check_wf(t.prefix(i), d).errors)
    return errors


def theory_cons(t: Theory, a: Declaration | Sequence[Declaration],
                name: str | None = None) -> Theory:
    """``t`` extended by one declaration or a sequence of them (persistent)."""
    decls = [a] if not isinstance(a, (list, tuple)) else list(a)
    cur = Theory(name or t.name, t.decls)
    for d in decls:
        check_wf(cur, d).raise_first()
        cur = Theory(cur.name, cur.decls + (d,))
    return cur


def common_prefix_length(a: Theory, b: Theory) -> int:
    n = 0
    for x, y in zip(a.decls, b.decls):
        if x != y:
            break
        n += 1
    return n


def theory_join(t1: Theory, t2: Theory, base: Theory | None = None,
                name: str | None = None) -> Theory:
    """``T ⋉ A ⋉ B`` for ``t1 = T ⋉ A`` and ``t2 = T ⋉ B`` with disjoint A and B.

    Without ``base`` the longest common declaration prefix is used.
    """
    if base is None:
        n = common_prefix_length(t1, t2)
    else:
        if not (base.is_prefix_of(t1) and base.is_prefix_of(t2)):
            raise NoCommonPrefix(f"{base.name} is not a common prefix of {t1.name} and {t2.name}")
        n = len(base.decls)
    a, b = t1.decls[n:], t2.decls[n:]
    a_names = {x for d in a for x in declared_names(d)}
    clashes = [x for d in b for x in declared_names(d) if x in a_names]
    if clashes:
        raise NonDisjoint(f"join operands both declare {', '.join(clashes)}",
                          subject=clashes[0])
    return theory_cons(t1, list(b), name=name or f"{t1.name}_join_{t2.name}")

"""Finite structures, evaluation, exhaustive model search and transport.

Two evaluators live here on purpose. ``eval_formula`` is a plain recursive
Tarskian evaluator used as the reference. The search uses a separate
vectorized three-valued evaluator (false/unknown/true over partially filled
tables) so that constraints can prune and force table cells; the property
tests cross-check the two.

Enumeration order. Carrier size tuples are tried in ascending order of their
largest component, then lexicographically. Within one size tuple the table
cells of primitive symbols are filled in a fixed static order: by the largest
argument value of the cell (constants first), then by declaration order of
the symbol, then row-major. Values are tried in ascending order. Defined
symbols come last and are normally forced by their defining equations. The
first model reported is therefore the lexicographically least one with
respect to this cell sequence, independent of how propagation prunes.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Iterator, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, MissingTable, ObligationOpen, TransportFailure
from .syntax import (
    And,
    App,
    BINARY,
    Definition,
    Eq,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    SortSig,
    Term,
    Theory,
    Var,
    formula_ops,
    strip_foralls,
)

if TYPE_CHECKING:
    from .graph import TheoryGraph
    from .views import View

DEFAULT_BUDGET = 10**7


@dataclass(frozen=True, eq=False)
class FiniteStructure:
    """Carriers ``0..n-1`` per sort and one lookup table per operation.

    A constant's table is a 0-d array; an n-ary operation's table has one axis
    per argument.
    """

    carriers: Mapping[str, int]
    tables: Mapping[str, np.ndarray] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return max(self.carriers.values(), default=0)

    def table(self, symbol: str) -> np.ndarray:
        try:
            return self.tables[symbol]
        except KeyError:
            raise MissingTable(f"no table for {symbol!r}", subject=symbol) from None

    def _key(self):
        return (tuple(sorted(self.carriers.items())),
                tuple(sorted((k, v.shape, tuple(v.ravel().tolist()))
                             for k, v in self.tables.items())))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FiniteStructure) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def to_json(self) -> dict:
        return {"carriers": dict(sorted(self.carriers.items())),
                "tables": {k: [int(x) for x in v.ravel()] for k, v in sorted(self.tables.items())}}

    @classmethod
    def from_json(cls, data: dict | str, theory: Theory) -> "FiniteStructure":
        if isinstance(data, str):
            data = json.loads(data)
        carriers = {k: int(v) for k, v in data["carriers"].items()}
        tables = {}
        for name, flat in data["tables"].items():
            sig = theory.signature_of(name)
            shape = tuple(carriers[a] for a in sig.args)  # type: ignore[union-attr]
            tables[name] = np.asarray(flat, dtype=np.int64).reshape(shape)
        return cls(carriers, tables)

    def restrict(self, symbols) -> "FiniteStructure":
        keep = set(symbols)
        return FiniteStructure({k: v for k, v in self.carriers.items() if k in keep},
                               {k: v for k, v in self.tables.items() if k in keep})

    def cayley(self, theory: Theory | None = None) -> str:
        glyph = theory.glyph_of if theory is not None else {}
        lines = [f"sort {s} = {{0..{n - 1}}}" for s, n in sorted(self.carriers.items())]
        order = list(theory.ops) if theory is not None else sorted(self.tables)
        for name in order:
            if name not in self.tables:
                continue
            tab = self.tables[name]
            label = glyph.get(name, name)
            if tab.ndim == 0:
                lines.append(f"{name} = {int(tab)}")
            elif tab.ndim == 1:
                lines.append(f"{name}: " + "  ".join(f"{a}->{int(b)}" for a, b in enumerate(tab)))
            elif tab.ndim == 2:
                w = max(len(str(tab.shape[1] - 1)), len(label), 1)
                lines.append(f"{label:>{w}} | " + " ".join(f"{j:>{w}}" for j in range(tab.shape[1])))
                lines.append("-" * (w + 1) + "+" + "-" * ((w + 1) * tab.shape[1]))
                for i in range(tab.shape[0]):
                    lines.append(f"{i:>{w}} | " + " ".join(f"{int(x):>{w}}" for x in tab[i]))
            else:
                for idx in np.ndindex(*tab.shape):
                    lines.append(f"{name}{idx} = {int(tab[idx])}")
        return "\n".join(lines)


# reference evaluator


def eval_term(m: FiniteStructure, t: Term, env: Mapping[str, int]) -> int:
    if isinstance(t, Var):
        return env[t.name]
    tab = m.table(t.op)
    if not t.args:
        return int(tab)
    return int(tab[tuple(eval_term(m, a, env) for a in t.args)])


def eval_formula(m: FiniteStructure, f: Formula, env: Mapping[str, int] | None = None) -> bool:
    env = dict(env or {})
    if isinstance(f, Eq):
        return eval_term(m, f.lhs, env) == eval_term(m, f.rhs, env)
    if isinstance(f, Not):
        return not eval_formula(m, f.body, env)
    if isinstance(f, And):
        return eval_formula(m, f.left, env) and eval_formula(m, f.right, env)
    if isinstance(f, Or):
        return eval_formula(m, f.left, env) or eval_formula(m, f.right, env)
    if isinstance(f, Implies):
        return (not eval_formula(m, f.left, env)) or eval_formula(m, f.right, env)
    n = m.carriers[f.sort]
    results = (eval_formula(m, f.body, {**env, f.var: x}) for x in range(n))
    return all(results) if isinstance(f, Forall) else any(results)


def satisfies(m: FiniteStructure, t: Theory) -> bool:
    return all(holds(m, fact.formula) for fact in t.facts)


# vectorized three-valued evaluator: 0 false, 1 unknown, 2 true; cells -1 unknown


def _depth(f: Formula) -> int:
    if isinstance(f, Eq):
        return 0
    if isinstance(f, Not):
        return _depth(f.body)
    if isinstance(f, BINARY):
        return max(_depth(f.left), _depth(f.right))
    return 1 + _depth(f.body)


class _Evaluator:
    def __init__(self, carriers: Mapping[str, int], ndim: int):
        self.carriers = carriers
        self.ndim = ndim
        self._axes: dict[tuple[str, int], np.ndarray] = {}

    def axis(self, sort: str, k: int) -> np.ndarray:
        key = (sort, k)
        a = self._axes.get(key)
        if a is None:
            shape = [1] * self.ndim
            shape[k] = self.carriers[sort]
            a = np.arange(self.carriers[sort]).reshape(shape)
            self._axes[key] = a
        return a

    def term(self, t: Term, env: Mapping[str, np.ndarray], tables) -> np.ndarray:
        if isinstance(t, Var):
            return env[t.name]
        tab = tables[t.op]
        if not t.args:
            return tab
        return _lookup(tab, tuple(self.term(a, env, tables) for a in t.args))

    def formula(self, f: Formula, env: dict[str, np.ndarray], tables, depth: int = 0):
        if isinstance(f, Eq):
            lhs = self.term(f.lhs, env, tables)
            rhs = self.term(f.rhs, env, tables)
            known = (lhs >= 0) & (rhs >= 0)
            return np.where(known, np.where(lhs == rhs, 2, 0), 1)
        if isinstance(f, Not):
            return 2 - self.formula(f.body, env, tables, depth)
        if isinstance(f, And):
            return np.minimum(self.formula(f.left, env, tables, depth),
                              self.formula(f.right, env, tables, depth))
        if isinstance(f, Or):
            return np.maximum(self.formula(f.left, env, tables, depth),
                              self.formula(f.right, env, tables, depth))
        if isinstance(f, Implies):
            return np.maximum(2 - self.formula(f.left, env, tables, depth),
                              self.formula(f.right, env, tables, depth))
        inner = dict(env)
        inner[f.var] = self.axis(f.sort, depth)
        r = np.asarray(self.formula(f.body, inner, tables, depth + 1))
        if r.ndim > depth and r.shape[depth] > 1:
            r = r.min(axis=depth, keepdims=True) if isinstance(f, Forall) \
                else r.max(axis=depth, keepdims=True)
        return r


def truth(carriers: Mapping[str, int], tables, f: Formula) -> int:
    """Three-valued truth of a closed formula over (possibly partial) tables."""
    ev = _Evaluator(carriers, max(_depth(f), 1))
    return int(np.asarray(ev.formula(f, {}, tables)).min())


def holds(m: FiniteStructure, f: Formula) -> bool:
    """Vectorized evaluation of a closed formula in a complete structure."""
    return truth(m.carriers, m.tables, f) == 2


# search


def _split(f: Formula) -> list[Formula]:
    binders, body = strip_foralls(f)
    parts = [body]
    out: list[Formula] = []
    while parts:
        b = parts.pop(0)
        if isinstance(b, And):
            parts[0:0] = [b.left, b.right]
        else:
            out.append(b)
    result = []
    for b in out:
        for name, sort in reversed(binders):
            b = Forall(name, sort, b)
        result.append(b)
    return result


class _Constraint:
    def __init__(self, f: Formula, carriers: Mapping[str, int]):
        self.formula = f
        self.binders, self.body = strip_foralls(f)
        self.eq = isinstance(self.body, Eq)
        self.ops = frozenset(formula_ops(f))
        ndim = max(len(self.binders) + _depth(self.body), 1)
        self.ev = _Evaluator(carriers, ndim)
        self.env = {name: self.ev.axis(sort, k) for k, (name, sort) in enumerate(self.binders)}
        if not self.eq:
            self.env = {}
        else:
            body: Eq = self.body  # type: ignore[assignment]
            self.sides = (_compile_side(body.lhs, self.env), _compile_side(body.rhs, self.env))
            self.side_ops = tuple(x.op if isinstance(x, App) else None
                                  for x in (body.lhs, body.rhs))

    def value(self, tables) -> int:
        if self.eq:
            return int(np.asarray(self.ev.formula(self.body, self.env, tables)).min())
        return int(np.asarray(self.ev.formula(self.formula, {}, tables)).min())

    def force(self, tables, out: dict[str, list]) -> bool:
        """Evaluate; record cells forced by the equation. False on definite violation."""
        if not self.eq:
            return self.value(tables) != 0
        lhs, largs = self.sides[0](tables)
        rhs, rargs = self.sides[1](tables)
        known_l, known_r = lhs >= 0, rhs >= 0
        if (known_l & known_r & (lhs != rhs)).any():
            return False
        for op, args, vals, other, known in ((self.side_ops[0], largs, known_l, rhs, known_r),
                                             (self.side_ops[1], rargs, known_r, lhs, known_l)):
            if op is None:
                continue
            mask = ~vals & known
            if not mask.any():
                continue
            other = np.broadcast_to(other, mask.shape)
            if not args:
                forced = np.unique(other[mask])
                out.setdefault(op, []).append((np.zeros(len(forced), dtype=np.int64), forced))
                continue
            args = [np.broadcast_to(a, mask.shape) for a in args]
            for a in args:
                mask = mask & (a >= 0)
            if not mask.any():
                continue
            lin = np.ravel_multi_index(tuple(a[mask] for a in args), tables[op].shape)
            out.setdefault(op, []).append((lin, other[mask]))
        return True


def _lookup(tab: np.ndarray, args: tuple[np.ndarray, ...]) -> np.ndarray:
    for a in args:
        if a.min() < 0:
            break
    else:
        return tab[args]
    unknown = args[0] < 0
    for a in args[1:]:
        unknown = unknown | (a < 0)
    return np.where(unknown, -1, tab[tuple(np.maximum(a, 0) for a in args)])


def _compile_term(t: Term, env: Mapping[str, np.ndarray]):
    """A closure evaluating ``t`` over partial tables (-1 marks unknown cells)."""
    if isinstance(t, Var):
        a = env[t.name]
        return lambda tables: a
    op = t.op
    if not t.args:
        return lambda tables: tables[op]
    subs = [_compile_term(a, env) for a in t.args]
    return lambda tables: _lookup(tables[op], tuple(f(tables) for f in subs))


def _compile_side(t: Term, env: Mapping[str, np.ndarray]):
    """Like :func:`_compile_term` but also returns the top-level argument values."""
    if isinstance(t, Var):
        a = env[t.name]
        return lambda tables: (a, ())
    op = t.op
    subs = [_compile_term(a, env) for a in t.args]

    def run(tables):
        args = tuple(f(tables) for f in subs)
        tab = tables[op]
        return (_lookup(tab, args) if args else tab), args
    return run


class _Search:
    def __init__(self, theory: Theory, carriers: Mapping[str, int],
                 goal: Formula | None, counter: list[int], budget: int):
        self.theory = theory
        self.carriers = dict(carriers)
        self.counter = counter
        self.budget = budget
        self.constraints = [_Constraint(part, carriers)
                            for fact in theory.facts for part in _split(fact.formula)]
        self.goal = _Constraint(goal, carriers) if goal is not None else None
        self.result_size = {op: carriers[sig.result] for op, sig in theory.ops.items()}
        defined = set(theory.definitions)
        order = {op: i for i, op in enumerate(theory.ops)}
        cells = []
        for op, sig in theory.ops.items():
            shape = tuple(carriers[a] for a in sig.args)
            for idx in np.ndindex(*shape):
                cells.append(((op in defined), max(idx, default=-1), order[op], idx, op))
        cells.sort()
        self.cells = [(op, idx) for *_, idx, op in cells]

    def empty_tables(self) -> dict[str, np.ndarray]:
        return {op: np.full(tuple(self.carriers[a] for a in sig.args), -1, dtype=np.int64)
                for op, sig in self.theory.ops.items()}

    def propagate(self, tables, dirty: set[str] | None = None) -> bool:
        """Unit propagation; only constraints mentioning a ``dirty`` symbol are re-run."""
        while True:
            forced: dict[str, list] = {}
            for c in self.constraints:
                if dirty is None or c.ops & dirty:
                    if not c.force(tables, forced):
                        return False
            if self.goal is not None and (dirty is None or self.goal.ops & dirty) \
                    and self.goal.value(tables) == 2:
                return False
            if not forced:
                return True
            dirty = set(forced)
            for op, pieces in forced.items():
                lin = np.concatenate([p[0] for p in pieces])
                val = np.concatenate([p[1] for p in pieces])
                order = np.lexsort((val, lin))
                lin, val = lin[order], val[order]
                same = lin[1:] == lin[:-1]
                if (same & (val[1:] != val[:-1])).any():
                    return False
                tab = tables[op]
                flat = tab.reshape(-1)
                if (val >= self.result_size[op]).any():
                    return False
                flat[lin] = val

    def run(self) -> Iterator[FiniteStructure]:
        tables = self.empty_tables()
        if not self.propagate(tables):
            return
        yield from self._dfs(tables, 0)

    def _dfs(self, tables, pos: int) -> Iterator[FiniteStructure]:
        cells = self.cells
        while pos < len(cells) and tables[cells[pos][0]][cells[pos][1]] >= 0:
            pos += 1
        if pos == len(cells):
            if self.goal is None or self.goal.value(tables) == 0:
                yield FiniteStructure(dict(self.carriers),
                                      {k: v.copy() for k, v in tables.items()})
            return
        op, idx = cells[pos]
        for val in range(self.result_size[op]):
            self.counter[0] += 1
            if self.counter[0] > self.budget:
                raise BudgetExceeded(
                    f"model search exceeded its budget of {self.budget} nodes",
                    subject=str(self.budget))
            branch = {k: v.copy() for k, v in tables.items()}
            branch[op][idx] = val
            if self.propagate(branch, {op}):
                yield from self._dfs(branch, pos + 1)


def carrier_assignments(sorts: Sequence[str], max_size: int) -> Iterator[dict[str, int]]:
    sizes = sorted(itertools.product(range(1, max_size + 1), repeat=len(sorts)),
                   key=lambda t: (max(t, default=0), t))
    for t in sizes:
        yield dict(zip(sorts, t))
    if not sorts:
        return


def _search(theory: Theory, max_size: int, goal: Formula | None,
            budget: int | None, min_size: int = 1) -> Iterator[FiniteStructure]:
    counter = [0]
    cap = DEFAULT_BUDGET if budget is None else budget
    seen_empty = False
    for carriers in carrier_assignments(list(theory.sorts), max_size):
        if carriers and max(carriers.values()) < min_size:
            continue
        if not carriers:
            if seen_empty:
                continue
            seen_empty = True
        yield from _Search(theory, carriers, goal, counter, cap).run()


def enumerate_models(theory: Theory, max_size: int, budget: int | None = None,
                     min_size: int = 1) -> Iterator[FiniteStructure]:
    """All models with every carrier of size at most ``max_size``, in enumeration order."""
    return _search(theory, max_size, None, budget, min_size)


@lru_cache(maxsize=64)
def models_up_to(theory: Theory, max_size: int,
                 budget: int | None = None) -> tuple[FiniteStructure, ...]:
    """All models up to ``max_size``, cached per theory.

    A trailing block of definitions is handled by expanding the models of the
    shorter theory: each has at most one expansion, which is a model iff it
    satisfies the defining equations.
    """
    n = len(theory.decls)
    while n > 0 and isinstance(theory.decls[n - 1], Definition):
        n -= 1
    if n == len(theory.decls) or n == 0:
        return tuple(enumerate_models(theory, max_size, budget))
    defs = [d for d in theory.decls[n:] if isinstance(d, Definition)]
    out = []
    for m in models_up_to(theory.prefix(n), max_size, budget):
        mm = expand_definitions(m, theory)
        if all(holds(mm, d.formula) for d in defs):
            out.append(mm)
    return tuple(out)


def find_countermodel(theory: Theory, phi: Formula, max_size: int,
                      budget: int | None = None) -> FiniteStructure | None:
    """The first model of ``theory`` (smallest carriers first) falsifying ``phi``."""
    return next(_search(theory, max_size, phi, budget), None)


def finite_check_many(theory: Theory, statements: Sequence[Formula], max_size: int,
                      budget: int | None = None) -> list[FiniteStructure | None]:
    """For each statement, its first countermodel among all models up to ``max_size``."""
    models = models_up_to(theory, max_size, budget)
    out: list[FiniteStructure | None] = []
    for phi in statements:
        out.append(next((m for m in models if not holds(m, phi)), None))
    return out


# definitions and transport


def _definition_table(m: FiniteStructure, d: Definition) -> np.ndarray:
    params, rhs = d.parts()
    env0 = {x.name: 0 for x in d.extra_vars()}
    shape = tuple(m.carriers[p.sort] for p in params)
    tab = np.zeros(shape, dtype=np.int64)
    for idx in np.ndindex(*shape):
        env = dict(env0)
        env.update({p.name: i for p, i in zip(params, idx)})
        tab[idx] = eval_term(m, rhs, env)
    return tab


def expand_definitions(m: FiniteStructure, theory: Theory) -> FiniteStructure:
    """Add tables for the defined symbols of ``theory`` by evaluating their definientia."""
    tables = dict(m.tables)
    current = FiniteStructure(m.carriers, tables)
    for d in theory.definitions.values():
        if d.symbol not in tables:
            tables[d.symbol] = _definition_table(current, d)
    return FiniteStructure(dict(m.carriers), tables)


def transport_model(g: "TheoryGraph", v: "View", m: FiniteStructure) -> FiniteStructure:
    """The reduct of ``m`` along ``v``: a model of the source theory."""
    from .views import check_view

    if not v.checked:
        v = check_view(g, v).view
    if v.open:
        raise ObligationOpen(f"view {v.name} has open obligations: "
                             + ", ".join(ob.origin for ob in v.open), subject=v.name)
    src = g.theory(v.source)
    carriers: dict[str, int] = {}
    tables: dict[str, np.ndarray] = {}
    for s in src.symbols:
        sig = src.signature_of(s)
        if isinstance(sig, SortSig):
            carriers[s] = m.carriers[v.symbol_map[s]]
        elif s in v.symbol_map:
            tables[s] = m.table(v.symbol_map[s])
    for s in src.symbols:
        if s in v.expand:
            tables[s] = _definition_table(FiniteStructure(carriers, tables), v.expand[s])
    out = FiniteStructure(carriers, tables)
    if not satisfies(out, src):
        failed = [f.name for f in src.facts if not holds(out, f.formula)]
        raise TransportFailure(f"transport along {v.name} violates {', '.join(failed)}",
                               subject=v.name)
    return out


def finite_check_obligation(g: "TheoryGraph", v: "View", origin: str, max_size: int,
                            budget: int | None = None):
    """Finite-check one obligation; closed obligations are returned unchanged."""
    from dataclasses import replace

    from .views import Status, check_view

    if not v.checked:
        v = check_view(g, v).view
    ob = v.obligation(origin)
    if ob is None:
        from .errors import UnknownSymbol

        raise UnknownSymbol(f"view {v.name} has no obligation {origin!r}", subject=origin)
    if ob.closed:
        return ob
    cm = find_countermodel(g.theory(v.target), ob.statement, max_size, budget)
    if cm is None:
        return replace(ob, status=Status.FINITE, max_size=max_size)
    return replace(ob, countermodel=cm)


def verify_justification(context: Theory, phi: Formula, max_size: int,
                         budget: int | None = None) -> FiniteStructure | None:
    """Countermodel refuting a finite-check justification, if any."""
    return find_countermodel(context, phi, max_size, budget)

"""Concrete syntax for theories, views, discharges and realm blocks.

Parsing is two-staged.  :func:`parse_source` produces raw items whose formula
bodies are kept as token lists, because operator glyphs are bound per theory
and can only be split once the declaration context is known.
:func:`elaborate_theory` and :func:`parse_formula` do that second step.

Grammar sketch::

    theory NAME [extends NAME | = join NAME NAME] [annotation] { decl* }
    decl    := sort NAME ;
             | op NAME : SORT* [-> SORT] [infix "g"] ;
             | axiom NAME : formula ;
             | def NAME : SORT* [-> SORT] [infix "g"] := formula [as NAME] ;
             | theorem NAME : formula [by assumed | by external "..." | by finite-check N] ;
    view NAME : SRC -> TGT [annotation] { sym |-> sym ; ... expand NAME, ... ; }
    discharge VIEW.(ORIGIN|*) by (theorem NAME | finite-check N | assumption) ;
    edge NAME -> NAME ;
    realm NAME { face NAME ; pillar NAME { bottom NAME ; top NAME ; interface NAME ; } equiv NAME, ... ; }
    annotation := in-realm NAME as (face | equiv | pillar NAME (bottom | top | interface))
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    ArityMismatch,
    KernelError,
    LexError,
    ParseError,
    SortMismatch,
    UnknownSort,
    UnknownSymbol,
)
from .syntax import (
    And,
    App,
    Axiom,
    Declaration,
    Definition,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Justification,
    Not,
    OpSig,
    Or,
    SortSig,
    Symbol,
    Term,
    Theorem,
    Theory,
    Var,
    check_wf,
    close,
)

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
PUNCT = set("(){},;:.")
HYPHEN_WORDS = {"finite-check", "in-realm"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | string | op | punct | eof
    text: str
    line: int
    col: int


def _is_op_char(ch: str) -> bool:
    if ch.isspace() or ch in PUNCT or ch == '"':
        return False
    return not (ch.isascii() and (ch.isalnum() or ch in "_'"))


def tokenize(src: str, filename: str | None = None) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)

    def adv(k: int) -> None:
        nonlocal i, line, col
        for ch in src[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = src[i]
        if ch.isspace():
            adv(1)
        elif src.startswith("//", i):
            j = src.find("\n", i)
            adv((n if j < 0 else j) - i)
        elif ch == '"':
            j = src.find('"', i + 1)
            if j < 0:
                raise LexError("unterminated string", file=filename, line=line, column=col)
            toks.append(Token("string", src[i + 1:j], line, col))
            adv(j + 1 - i)
        elif ch.isascii() and ch.isdigit():
            m = re.compile(r"\d+").match(src, i)
            toks.append(Token("int", m.group(), line, col))
            adv(m.end() - i)
        elif m := IDENT_RE.match(src, i):
            word = m.group()
            for hw in HYPHEN_WORDS:
                if src.startswith(hw, i) and not IDENT_RE.match(src, i + len(hw)):
                    word = hw
            toks.append(Token("ident", word, line, col))
            adv(len(word))
        elif src.startswith(":=", i):
            toks.append(Token("punct", ":=", line, col))
            adv(2)
        elif ch in PUNCT:
            toks.append(Token("punct", ch, line, col))
            adv(1)
        elif _is_op_char(ch):
            j = i
            while j < n and _is_op_char(src[j]) and not src.startswith("//", j):
                j += 1
            toks.append(Token("op", src[i:j], line, col))
            adv(j - i)
        else:  # pragma: no cover - every char falls in a class above
            raise LexError(f"unexpected character {ch!r}", file=filename, line=line, column=col)
    toks.append(Token("eof", "", line, col))
    return toks


# --------------------------------------------------------------------------
# raw items


@dataclass
class RawDecl:
    kind: str  # sort | op | axiom | def | theorem
    name: str
    sig: tuple[tuple[str, ...], str | None] | None = None
    glyph: str | None = None
    formula: list[Token] = field(default_factory=list)
    decl_name: str | None = None
    justification: Justification | None = None
    tok: Token | None = None


@dataclass
class Annotation:
    realm: str
    role: str  # face | equiv | bottom | top | interface
    pillar: str | None = None


@dataclass
class RawTheory:
    name: str
    decls: list[RawDecl]
    extends: str | None = None
    join: tuple[str, str] | None = None
    annotation: Annotation | None = None
    tok: Token | None = None


@dataclass
class RawView:
    name: str
    source: str
    target: str
    maps: list[tuple[Token, Token]]
    expand: list[str]
    annotation: Annotation | None = None
    tok: Token | None = None


@dataclass
class RawDischarge:
    view: str
    origin: str  # declaration name or "*"
    method: str  # theorem | finite-check | assumption
    arg: str | int | None = None
    tok: Token | None = None


@dataclass
class RawEdge:
    source: str
    target: str
    tok: Token | None = None


@dataclass
class RawPillar:
    """Fields left out here must be supplied by ``in-realm`` annotations."""

    name: str
    bottom: str | None
    top: str | None
    interface: str | None


@dataclass
class RawRealm:
    name: str
    face: str | None
    pillars: list[RawPillar]
    equivs: list[str]
    tok: Token | None = None


RawItem = RawTheory | RawView | RawDischarge | RawRealm | RawEdge


class _Stream:
    def __init__(self, toks: list[Token], filename: str | None) -> None:
        self.toks = toks
        self.i = 0
        self.filename = filename

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.cur
        return ParseError(msg, file=self.filename, line=tok.line, column=tok.col)

    def next(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.cur
        return t.kind == kind and (text is None or t.text == text)

    def at_word(self, word: str) -> bool:
        return self.at("ident", word)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text or kind
            got = self.cur.text or self.cur.kind
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.next()

    def word(self, text: str) -> Token:
        return self.expect("ident", text)

    def ident(self) -> str:
        return self.expect("ident").text


def parse_source(src: str, filename: str | None = None) -> list[RawItem]:
    s = _Stream(tokenize(src, filename), filename)
    items: list[RawItem] = []
    while not s.at("eof"):
        if s.at_word("theory"):
            items.append(_parse_theory(s))
        elif s.at_word("view"):
            items.append(_parse_view(s))
        elif s.at_word("discharge"):
            items.append(_parse_discharge(s))
        elif s.at_word("realm"):
            items.append(_parse_realm(s))
        elif s.at_word("edge"):
            tok = s.next()
            source = s.ident()
            s.expect("op", "->")
            items.append(RawEdge(source, s.ident(), tok))
            s.expect("punct", ";")
        else:
            raise s.error(f"expected theory, view, discharge, realm or edge, "
                          f"found {s.cur.text!r}")
    return items


def _parse_annotation(s: _Stream) -> Annotation | None:
    if not s.accept("ident", "in-realm"):
        return None
    realm = s.ident()
    s.word("as")
    role = s.ident()
    if role in ("face", "equiv"):
        return Annotation(realm, role)
    if role != "pillar":
        raise s.error(f"unknown realm role {role!r}")
    pillar = s.ident()
    part = s.ident()
    if part not in ("bottom", "top", "interface"):
        raise s.error(f"expected bottom, top or interface, found {part!r}")
    return Annotation(realm, part, pillar)


def _parse_theory(s: _Stream) -> RawTheory:
    tok = s.word("theory")
    name = s.ident()
    extends = None
    join = None
    if s.accept("ident", "extends"):
        extends = s.ident()
    elif s.accept("op", "="):
        s.word("join")
        join = (s.ident(), s.ident())
    ann = _parse_annotation(s)
    decls: list[RawDecl] = []
    if join is not None and not s.at("punct", "{"):
        s.expect("punct", ";")
        return RawTheory(name, decls, extends, join, ann, tok)
    s.expect("punct", "{")
    while not s.accept("punct", "}"):
        decls.append(_parse_decl(s))
    return RawTheory(name, decls, extends, join, ann, tok)


def _parse_sig(s: _Stream) -> tuple[tuple[str, ...], str | None]:
    sorts: list[str] = []
    while s.at("ident") and s.cur.text not in ("infix",):
        sorts.append(s.next().text)
    if s.accept("op", "->"):
        return tuple(sorts), s.ident()
    if len(sorts) != 1:
        raise s.error("constant signature must name exactly one sort")
    return (), sorts[0]


def _formula_tokens(s: _Stream, stops: tuple[str, ...] = ()) -> list[Token]:
    out: list[Token] = []
    depth = 0
    while True:
        t = s.cur
        if t.kind == "eof":
            raise s.error("unterminated formula")
        if depth == 0 and (t.kind == "punct" and t.text == ";" or
                           t.kind == "ident" and t.text in stops):
            return out
        if t.kind == "punct" and t.text == "(":
            depth += 1
        elif t.kind == "punct" and t.text == ")":
            depth -= 1
        out.append(s.next())


def _parse_decl(s: _Stream) -> RawDecl:
    tok = s.cur
    kw = s.ident()
    if kw == "sort":
        name = s.ident()
        s.expect("punct", ";")
        return RawDecl("sort", name, tok=tok)
    if kw in ("op", "def"):
        name = s.ident()
        s.expect("punct", ":")
        sig = _parse_sig(s)
        glyph = None
        if s.accept("ident", "infix"):
            glyph = s.expect("string").text
        if kw == "op":
            s.expect("punct", ";")
            return RawDecl("op", name, sig, glyph, tok=tok)
        s.expect("punct", ":=")
        body = _formula_tokens(s, ("as",))
        decl_name = None
        if s.accept("ident", "as"):
            decl_name = s.ident()
        s.expect("punct", ";")
        return RawDecl("def", name, sig, glyph, body, decl_name, tok=tok)
    if kw in ("axiom", "theorem"):
        name = s.ident()
        s.expect("punct", ":")
        body = _formula_tokens(s, ("by",))
        just = None
        if kw == "theorem":
            just = Justification()
            if s.accept("ident", "by"):
                just = _parse_justification(s)
        s.expect("punct", ";")
        return RawDecl(kw, name, formula=body, justification=just, tok=tok)
    raise s.error(f"unknown declaration keyword {kw!r}", tok)


def _parse_justification(s: _Stream) -> Justification:
    if s.accept("ident", "assumed"):
        return Justification("assumed")
    if s.accept("ident", "external"):
        return Justification("external", citation=s.expect("string").text)
    if s.accept("ident", "finite-check"):
        return Justification("finite-checked", max_size=int(s.expect("int").text))
    raise s.error("expected assumed, external \"...\" or finite-check N")


def _split_mapsto(toks: list[Token]) -> list[Token]:
    out = []
    for t in toks:
        if t.kind == "op" and "|->" in t.text and t.text != "|->":
            a, _, b = t.text.partition("|->")
            if a:
                out.append(Token("op", a, t.line, t.col))
            out.append(Token("op", "|->", t.line, t.col + len(a)))
            if b:
                out.append(Token("op", b, t.line, t.col + len(a) + 3))
        else:
            out.append(t)
    return out


def _parse_view(s: _Stream) -> RawView:
    tok = s.word("view")
    name = s.ident()
    s.expect("punct", ":")
    source = s.ident()
    s.expect("op", "->")
    target = s.ident()
    ann = _parse_annotation(s)
    s.expect("punct", "{")
    maps: list[tuple[Token, Token]] = []
    expand: list[str] = []
    while not s.accept("punct", "}"):
        if s.accept("ident", "expand"):
            expand.append(s.ident())
            while s.accept("punct", ","):
                expand.append(s.ident())
            s.expect("punct", ";")
            continue
        line = _split_mapsto(_formula_tokens(s))
        s.expect("punct", ";")
        arrows = [k for k, t in enumerate(line) if t.kind == "op" and t.text == "|->"]
        if len(arrows) != 1 or arrows[0] != 1 or len(line) != 3:
            bad = line[0] if line else s.cur
            raise s.error("expected 'symbol |-> symbol;'", bad)
        maps.append((line[0], line[2]))
    return RawView(name, source, target, maps, expand, ann, tok)


def _parse_discharge(s: _Stream) -> RawDischarge:
    tok = s.word("discharge")
    view = s.ident()
    s.expect("punct", ".")
    if s.accept("op", "*"):
        origin = "*"
    else:
        origin = s.ident()
    s.word("by")
    if s.accept("ident", "theorem"):
        d = RawDischarge(view, origin, "theorem", s.ident(), tok)
    elif s.accept("ident", "finite-check"):
        d = RawDischarge(view, origin, "finite-check", int(s.expect("int").text), tok)
    elif s.accept("ident", "assumption") or s.accept("ident", "assumed"):
        d = RawDischarge(view, origin, "assumption", None, tok)
    else:
        raise s.error("expected theorem NAME, finite-check N or assumption")
    s.expect("punct", ";")
    return d


def _parse_realm(s: _Stream) -> RawRealm:
    tok = s.word("realm")
    name = s.ident()
    s.expect("punct", "{")
    face = None
    pillars: list[RawPillar] = []
    equivs: list[str] = []
    while not s.accept("punct", "}"):
        if s.accept("ident", "face"):
            face = s.ident()
            s.expect("punct", ";")
        elif s.accept("ident", "pillar"):
            pname = s.ident()
            s.expect("punct", "{")
            parts: dict[str, str] = {}
            while not s.accept("punct", "}"):
                key = s.ident()
                if key not in ("bottom", "top", "interface"):
                    raise s.error(f"unknown pillar field {key!r}")
                parts[key] = s.ident()
                s.expect("punct", ";")
            pillars.append(RawPillar(pname, parts.get("bottom"), parts.get("top"),
                                     parts.get("interface")))
        elif s.accept("ident", "equiv"):
            equivs.append(s.ident())
            while s.accept("punct", ","):
                equivs.append(s.ident())
            s.expect("punct", ";")
        else:
            raise s.error(f"unexpected {s.cur.text!r} in realm block")
    return RawRealm(name, face, pillars, equivs, tok)


# --------------------------------------------------------------------------
# formula elaboration

LOGIC = {
    "∀": "forall", "∃": "exists",
    "~": "not", "¬": "not",
    "/\\": "and", "∧": "and", "&": "and",
    "\\/": "or", "∨": "or", "|": "or",
    "->": "implies", "→": "implies", "⇒": "implies", "=>": "implies",
    "<->": "iff", "↔": "iff", "⇔": "iff", "<=>": "iff",
    "=": "eq", "!=": "neq", "≠": "neq",
}
WORDS = {"forall": "forall", "exists": "exists", "not": "not"}


def _split_ops(toks: list[Token], glyphs: dict[str, str], filename: str | None) -> list[Token]:
    """Split operator runs into logical symbols and bound glyphs (longest match)."""
    table = sorted(set(LOGIC) | set(glyphs), key=len, reverse=True)
    out: list[Token] = []
    for t in toks:
        if t.kind != "op":
            out.append(t)
            continue
        i = 0
        while i < len(t.text):
            for g in table:
                if t.text.startswith(g, i):
                    out.append(Token("op", g, t.line, t.col + i))
                    i += len(g)
                    break
            else:
                raise UnknownSymbol(f"unknown operator {t.text[i:]!r}", subject=t.text[i:],
                                    file=filename, line=t.line, column=t.col + i)
    return out


# raw formula tree: tuples tagged by kind; terms are ("id", name, tok) / ("app", name, args, tok)

class _FormulaParser:
    def __init__(self, toks: list[Token], glyphs: dict[str, str], filename: str | None) -> None:
        self.glyphs = glyphs
        self.filename = filename
        self.toks = _split_ops(toks, glyphs, filename)
        self.i = 0

    @property
    def cur(self) -> Token | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, msg: str) -> ParseError:
        t = self.cur or (self.toks[-1] if self.toks else None)
        return ParseError(msg, file=self.filename, line=t.line if t else None,
                          column=t.col if t else None)

    def logic(self) -> str | None:
        t = self.cur
        if t is None:
            return None
        if t.kind == "op":
            return LOGIC.get(t.text)
        if t.kind == "ident":
            return WORDS.get(t.text)
        return None

    def is_punct(self, p: str) -> bool:
        t = self.cur
        return t is not None and t.kind == "punct" and t.text == p

    def expect_punct(self, p: str) -> None:
        if not self.is_punct(p):
            raise self.error(f"expected {p!r}")
        self.i += 1

    def parse(self):
        f = self.formula()
        if self.cur is not None:
            raise self.error(f"unexpected {self.cur.text!r}")
        return f

    def formula(self):
        lg = self.logic()
        if lg in ("forall", "exists"):
            self.i += 1
            binders = self.binders()
            f = self.formula()
            for name, sort, tok in reversed(binders):
                f = (lg, name, sort, f, tok)
            return f
        return self.iff()

    def binders(self):
        out = []
        while True:
            names = []
            while self.cur is not None and self.cur.kind == "ident" and not self.logic():
                names.append(self.cur)
                self.i += 1
            if not names:
                raise self.error("expected bound variable")
            sort = None
            if self.is_punct(":"):
                self.i += 1
                if self.cur is None or self.cur.kind != "ident":
                    raise self.error("expected sort name")
                sort = self.cur.text
                self.i += 1
            out.extend((t.text, sort, t) for t in names)
            if self.is_punct(","):
                self.i += 1
                continue
            self.expect_punct(".")
            return out

    def iff(self):
        left = self.implies()
        if self.logic() == "iff":
            self.i += 1
            right = self.iff()
            return ("and", ("implies", left, right), ("implies", right, left))
        return left

    def implies(self):
        left = self.disj()
        if self.logic() == "implies":
            self.i += 1
            return ("implies", left, self.implies_rhs())
        return left

    def implies_rhs(self):
        if self.logic() in ("forall", "exists"):
            return self.formula()
        return self.implies()

    def disj(self):
        left = self.conj()
        while self.logic() == "or":
            self.i += 1
            left = ("or", left, self.conj_rhs())
        return left

    def conj(self):
        left = self.unary()
        while self.logic() == "and":
            self.i += 1
            left = ("and", left, self.unary_rhs())
        return left

    def conj_rhs(self):
        if self.logic() in ("forall", "exists"):
            return self.formula()
        return self.conj()

    def unary_rhs(self):
        if self.logic() in ("forall", "exists"):
            return self.formula()
        return self.unary()

    def unary(self):
        lg = self.logic()
        if lg == "not":
            self.i += 1
            return ("not", self.unary_rhs())
        if lg in ("forall", "exists"):
            return self.formula()
        save = self.i
        try:
            lhs = self.term()
            lg = self.logic()
            if lg in ("eq", "neq"):
                tok = self.cur
                self.i += 1
                rhs = self.term()
                atom = ("eq", lhs, rhs, tok)
                return ("not", atom) if lg == "neq" else atom
            raise self.error("expected '='")
        except ParseError:
            self.i = save
            if not self.is_punct("("):
                raise
            self.i = save + 1
            f = self.formula()
            self.expect_punct(")")
            return f

    def term(self):
        left = self.primary()
        while self.cur is not None and self.cur.kind == "op" and self.cur.text in self.glyphs:
            tok = self.cur
            self.i += 1
            right = self.primary()
            left = ("app", self.glyphs[tok.text], [left, right], tok)
        return left

    def primary(self):
        t = self.cur
        if t is None:
            raise self.error("unexpected end of formula")
        if t.kind == "punct" and t.text == "(":
            self.i += 1
            inner = self.term()
            self.expect_punct(")")
            return inner
        if t.kind == "ident" and not self.logic():
            self.i += 1
            if self.is_punct("("):
                self.i += 1
                args = []
                if not self.is_punct(")"):
                    args.append(self.term())
                    while self.is_punct(","):
                        self.i += 1
                        args.append(self.term())
                self.expect_punct(")")
                return ("app", t.text, args, t)
            return ("id", t.text, t)
        raise self.error(f"unexpected {t.text!r} in term")


class _Elaborator:
    """Resolve identifiers to variables or operators and infer variable sorts."""

    def __init__(self, ctx: Theory, extra: dict[str, OpSig], filename: str | None) -> None:
        self.ctx = ctx
        self.ops = dict(ctx.ops) | extra
        self.filename = filename
        self.sorts: dict[object, str | None] = {}
        self.free: dict[str, object] = {}
        self.changed = False

    def err(self, cls, msg: str, tok: Token | None, subject: str | None = None) -> KernelError:
        return cls(msg, subject=subject, file=self.filename,
                   line=tok.line if tok else None, column=tok.col if tok else None)

    def var_key(self, name: str, scope: dict[str, object]) -> object | None:
        if name in scope:
            return scope[name]
        if name in self.ops:
            return None
        key = self.free.setdefault(name, ("free", name))
        self.sorts.setdefault(key, None)
        return key

    def assign(self, key: object, sort: str, tok: Token | None, name: str) -> None:
        cur = self.sorts.get(key)
        if cur is None:
            self.sorts[key] = sort
            self.changed = True
        elif cur != sort:
            raise self.err(SortMismatch, f"variable {name} used at sorts {cur} and {sort}",
                           tok, name)

    def term_sort(self, t, scope) -> str | None:
        if t[0] == "id":
            key = self.var_key(t[1], scope)
            if key is None:
                return self.ops[t[1]].result
            return self.sorts.get(key)
        sig = self.ops.get(t[1])
        if sig is None:
            raise self.err(UnknownSymbol, f"{t[1]} is not declared", t[3], t[1])
        if len(sig.args) != len(t[2]):
            raise self.err(ArityMismatch,
                           f"{t[1]} expects {len(sig.args)} arguments, got {len(t[2])}",
                           t[3], t[1])
        for expected, a in zip(sig.args, t[2]):
            self.constrain(a, expected, scope)
        return sig.result

    def constrain(self, t, sort: str, scope) -> None:
        if t[0] == "id":
            key = self.var_key(t[1], scope)
            if key is not None:
                self.assign(key, sort, t[2], t[1])
                return
        got = self.term_sort(t, scope)
        if got is not None and got != sort:
            tok = t[2] if t[0] == "id" else t[3]
            raise self.err(SortMismatch, f"term of sort {got} used where {sort} expected", tok)

    def infer(self, f, scope) -> None:
        kind = f[0]
        if kind == "eq":
            s1 = self.term_sort(f[1], scope)
            s2 = self.term_sort(f[2], scope)
            if s1 is not None:
                self.constrain(f[2], s1, scope)
            if s2 is not None:
                self.constrain(f[1], s2, scope)
        elif kind == "not":
            self.infer(f[1], scope)
        elif kind in ("and", "or", "implies"):
            self.infer(f[1], scope)
            self.infer(f[2], scope)
        else:
            key = ("bound", id(f))
            if f[2] is not None:
                if f[2] not in self.ctx.sorts:
                    raise self.err(UnknownSort, f"sort {f[2]} is not declared", f[4], f[2])
                self.sorts[key] = f[2]
            else:
                self.sorts.setdefault(key, None)
            self.infer(f[3], {**scope, f[1]: key})

    def default_sorts(self) -> None:
        for key, s in self.sorts.items():
            if s is None:
                if len(self.ctx.sorts) == 1:
                    self.sorts[key] = self.ctx.sorts[0]
                else:
                    name = key[1] if key[0] == "free" else "bound variable"
                    raise ParseError(f"cannot infer the sort of {name}", subject=str(name),
                                     file=self.filename)

    def build_term(self, t, scope) -> Term:
        if t[0] == "id":
            key = self.var_key(t[1], scope)
            if key is None:
                if self.ops[t[1]].args:
                    raise self.err(SortMismatch, f"{t[1]} needs arguments", t[2], t[1])
                return App(t[1], ())
            return Var(t[1], self.sorts[key])  # type: ignore[arg-type]
        return App(t[1], tuple(self.build_term(a, scope) for a in t[2]))

    def build(self, f, scope) -> Formula:
        kind = f[0]
        if kind == "eq":
            return Eq(self.build_term(f[1], scope), self.build_term(f[2], scope))
        if kind == "not":
            return Not(self.build(f[1], scope))
        if kind in ("and", "or", "implies"):
            cls = {"and": And, "or": Or, "implies": Implies}[kind]
            return cls(self.build(f[1], scope), self.build(f[2], scope))
        key = ("bound", id(f))
        cls = Forall if kind == "forall" else Exists
        return cls(f[1], self.sorts[key], self.build(f[3], {**scope, f[1]: key}))


def elaborate_formula(toks: list[Token], ctx: Theory, extra: dict[str, OpSig] | None = None,
                      extra_glyphs: dict[str, str] | None = None,
                      filename: str | None = None) -> Formula:
    """Parse formula tokens in ``ctx`` and close over free variables."""
    extra = extra or {}
    p = _FormulaParser(toks, dict(ctx.glyphs) | (extra_glyphs or {}), filename)
    if not p.toks:
        raise ParseError("empty formula", file=filename)
    raw = p.parse()
    el = _Elaborator(ctx, extra, filename)
    el.changed = True
    while el.changed:
        el.changed = False
        el.infer(raw, {})
    el.default_sorts()
    return close(el.build(raw, {}))


def parse_formula(text: str, ctx: Theory, extra: dict[str, OpSig] | None = None) -> Formula:
    toks = tokenize(text)[:-1]
    return elaborate_formula(toks, ctx, extra)


def elaborate_decl(raw: RawDecl, ctx: Theory, filename: str | None = None) -> Declaration:
    loc = dict(file=filename, line=raw.tok.line if raw.tok else None,
               column=raw.tok.col if raw.tok else None)
    try:
        if raw.kind == "sort":
            return Symbol(raw.name, SortSig())
        if raw.kind == "op":
            args, result = raw.sig  # type: ignore[misc]
            return Symbol(raw.name, OpSig(args, result), raw.glyph)  # type: ignore[arg-type]
        if raw.kind == "def":
            args, result = raw.sig  # type: ignore[misc]
            sig = OpSig(args, result)  # type: ignore[arg-type]
            extra_glyphs = {raw.glyph: raw.name} if raw.glyph else {}
            f = elaborate_formula(raw.formula, ctx, {raw.name: sig}, extra_glyphs, filename)
            return Definition(raw.decl_name or f"{raw.name}_def", raw.name, sig, f, raw.glyph)
        f = elaborate_formula(raw.formula, ctx, filename=filename)
        if raw.kind == "axiom":
            return Axiom(raw.name, f)
        return Theorem(raw.name, f, raw.justification or Justification())
    except KernelError as e:
        raise e.at(**loc)


def elaborate_theory(raw: RawTheory, base: Theory | None = None,
                     filename: str | None = None) -> Theory:
    """Build a theory from raw declarations on top of ``base`` (checked prefix-wise)."""
    cur = Theory(raw.name, base.decls if base else ())
    for rd in raw.decls:
        d = elaborate_decl(rd, cur, filename)
        report = check_wf(cur, d)
        if not report.ok:
            e = report.errors[0]
            raise e.at(filename, rd.tok.line if rd.tok else None, rd.tok.col if rd.tok else None)
        cur = Theory(raw.name, cur.decls + (d,))
    return cur


def parse_theory(source: str, filename: str | None = None) -> Theory:
    """Parse a source holding (at most) one self-contained theory block.

    An empty source yields the empty theory.
    """
    items = [it for it in parse_source(source, filename) if isinstance(it, RawTheory)]
    if not items:
        return Theory("empty")
    theories: dict[str, Theory] = {}
    for raw in items:
        base = None
        if raw.extends:
            if raw.extends not in theories:
                raise ParseError(f"unknown base theory {raw.extends}", subject=raw.extends,
                                 file=filename)
            base = theories[raw.extends]
        theories[raw.name] = elaborate_theory(raw, base, filename)
    return theories[items[-1].name]


def parse_declaration(text: str, ctx: Theory, filename: str | None = None) -> Declaration:
    """Parse and check one declaration in the context ``ctx``; the final ``;`` is optional."""
    text = text.strip()
    if not text.endswith(";"):
        text += ";"
    s = _Stream(tokenize(text, filename), filename)
    raw = _parse_decl(s)
    if not s.at("eof"):
        raise s.error("expected a single declaration")
    d = elaborate_decl(raw, ctx, filename)
    check_wf(ctx, d).raise_first()
    return d

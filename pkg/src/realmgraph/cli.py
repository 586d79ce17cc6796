"""Command-line front end.

Every command loads the given source files (the bundled corpus when none are
given), runs one kernel operation and reports. Exit codes: 0 ok, 1 check
failure, 2 usage error, 3 model-search budget exceeded. Commands that build
new realms write the new theories, views and realm blocks to a fresh file and
never touch their inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .errors import BudgetExceeded, KernelError
from .export import to_dot, to_json
from .graph import TheoryGraph, fresh_name
from .oracle import DEFAULT_BUDGET, find_countermodel
from .parser import parse_declaration, parse_formula
from .printer import format_graph
from .realms import (
    extend_realm,
    get_realm,
    initial_realm,
    lift_view,
    merge_realms,
    trivial_realm,
    validate_realm,
)
from .syntax import Theory
from .workspace import Workspace, corpus_files, load

OK, FAILURE, USAGE, BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="output format (default: text)")
    p.add_argument("--max-size", type=int, default=4,
                   help="carrier size bound for finite checks and searches (default: 4)")
    p.add_argument("--unfold-depth", type=int, default=2,
                   help="definition unfolding depth for obligation lookup (default: 2)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                   help=f"model search node budget (default: {DEFAULT_BUDGET})")
    return p


def _paths(p: argparse.ArgumentParser) -> None:
    p.add_argument("paths", nargs="*", type=Path,
                   help="source files (default: the bundled corpus)")


def _out(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", type=Path,
                   help="file for the generated sources (default: <realm>.thy)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    """The top-level parser and one parser per command."""
    common = _common()
    parser = argparse.ArgumentParser(
        prog="realmgraph", description="Theory graphs with realms: check, validate, build.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="parse and check sources")
    _paths(p)

    p = sub.add_parser("realm-validate", parents=[common], help="validate a realm")
    p.add_argument("realm")
    p.add_argument("--evidence-size", type=int, default=3,
                   help="size bound for faithfulness evidence (0 disables it)")
    _paths(p)

    p = sub.add_parser("realm-init", parents=[common], help="initial or trivial realm")
    p.add_argument("theory")
    p.add_argument("--trivial", action="store_true",
                   help="use the theory itself as face (it must be primitive)")
    p.add_argument("--name", help="realm name")
    _out(p)
    _paths(p)

    p = sub.add_parser("realm-extend", parents=[common],
                       help="extend a pillar by a conservative declaration")
    p.add_argument("realm")
    p.add_argument("pillar", help="pillar name or 1-based index")
    p.add_argument("decl", help="declaration source, e.g. 'theorem t: ... by finite-check 4'")
    p.add_argument("--face", action="append", default=[], metavar="DECL",
                   help="symbol or axiom to add to the face (repeatable)")
    p.add_argument("--counterpart", action="append", default=[], metavar="PILLAR=DECL",
                   help="declaration for another pillar (repeatable)")
    p.add_argument("--at", help="development node to extend instead of the top")
    p.add_argument("--new-top", help="name of the new top theory")
    p.add_argument("--name", help="name of the extended realm (default: fresh)")
    _out(p)
    _paths(p)

    p = sub.add_parser("realm-merge", parents=[common], help="union realm along two views")
    p.add_argument("realm1")
    p.add_argument("realm2")
    p.add_argument("v", help="view from a bottom of realm1 into realm2")
    p.add_argument("w", help="view from a bottom of realm2 into realm1")
    p.add_argument("--minimal", action="store_true",
                   help="copy only the part of each development the interface needs")
    p.add_argument("--name", help="merged realm name")
    _out(p)
    _paths(p)

    p = sub.add_parser("lift", parents=[common], help="lift a top-to-top view to the faces")
    p.add_argument("realm1")
    p.add_argument("realm2")
    p.add_argument("view")
    _paths(p)

    p = sub.add_parser("export", parents=[common], help="export the graph")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--dot", action="store_true")
    kind.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", type=Path, help="output file (default: stdout)")
    _paths(p)

    p = sub.add_parser("countermodel", parents=[common],
                       help="smallest model of a theory refuting a formula")
    p.add_argument("theory")
    p.add_argument("formula")
    _paths(p)
    return parser, dict(sub.choices)


# output helpers


def _emit(args, text: str, payload: dict) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    elif text:
        print(text)


def _diag_lines(diags: Sequence[KernelError]) -> str:
    return "\n".join(str(d) for d in diags)


def _load(args) -> Workspace:
    paths = args.paths or corpus_files()
    for p in paths:
        if not Path(p).is_file():
            raise UsageError(f"no such file: {p}")
    return load(paths, args.unfold_depth, args.budget)


def _code_for(diags: Sequence[KernelError]) -> int:
    if any(isinstance(d, BudgetExceeded) for d in diags):
        return BUDGET
    return FAILURE if diags else OK


def _write(args, ws: Workspace, g: TheoryGraph, realm: str) -> Path:
    """Write everything new in ``g`` (relative to the loaded workspace) to a fresh file."""
    out = args.output or Path(f"{realm}.thy")
    inputs = {Path(p).resolve() for p in ws.files}
    if out.resolve() in inputs:
        raise UsageError(f"refusing to overwrite input file {out}")
    old = ws.graph
    theories = [n for n in g.theories if n not in old.theories]
    views = [n for n in g.views if n not in old.views or g.views[n] is not old.views[n]]
    realms = [n for n in g.realms if n not in old.realms]
    out.write_text(format_graph(g, theories, views, realms), encoding="utf-8")
    return out


# commands


def cmd_check(args) -> int:
    ws = _load(args)
    g = ws.graph
    summary = (f"{len(ws.files)} file(s): {len(g.theories)} theories, {len(g.edges)} edges, "
               f"{len(g.views)} views, {len(g.realms)} realms")
    text = _diag_lines(ws.diagnostics) if ws.diagnostics else f"ok: {summary}"
    _emit(args, text, {"ok": ws.ok, "summary": summary,
                       "diagnostics": [d.to_dict() for d in ws.diagnostics]})
    return _code_for(ws.diagnostics)


def cmd_realm_validate(args) -> int:
    ws = _load(args)
    r = get_realm(ws.graph, args.realm)
    rep = validate_realm(ws.graph, r, args.unfold_depth, args.evidence_size)
    lines = [_diag_lines(ws.diagnostics)] if ws.diagnostics else []
    for row in rep.rows:
        where = f" [{row.pillar}]" if row.pillar else ""
        code = f" {row.code}:" if row.code else ""
        lines.append(f"{row.status:10} {row.check}{where}:{code} {row.detail}")
    lines.append(f"realm {r.name}: {'valid' if rep.ok else 'INVALID'}")
    _emit(args, "\n".join(lines), {
        "realm": r.name, "ok": rep.ok and ws.ok,
        "rows": [{"check": row.check, "pillar": row.pillar, "status": row.status,
                  "code": row.code, "detail": row.detail} for row in rep.rows],
        "diagnostics": [d.to_dict() for d in ws.diagnostics]})
    if ws.diagnostics:
        return _code_for(ws.diagnostics)
    return OK if rep.ok else FAILURE


def _require_clean(args, ws: Workspace) -> int | None:
    if ws.diagnostics:
        _emit(args, _diag_lines(ws.diagnostics),
              {"ok": False, "diagnostics": [d.to_dict() for d in ws.diagnostics]})
        return _code_for(ws.diagnostics)
    return None


def _report_realm(args, g: TheoryGraph, name: str, out: Path) -> int:
    r = g.realms[name]
    rep = validate_realm(g, r, args.unfold_depth)
    text = (f"wrote {out}\nrealm {r.name}: face {r.face}, "
            f"{len(r.pillars)} pillar(s), {'valid' if rep.ok else 'INVALID'}")
    for row in rep.failures:
        text += f"\n  {row.code}: {row.detail}"
    _emit(args, text, {"ok": rep.ok, "output": str(out), "realm": r.name, "face": r.face,
                       "face_symbols": list(g.theory(r.face).symbols),
                       "pillars": [p.__dict__ for p in r.pillars], "notes": list(r.notes)})
    return OK if rep.ok else FAILURE


def cmd_realm_init(args) -> int:
    ws = _load(args)
    if (code := _require_clean(args, ws)) is not None:
        return code
    build = trivial_realm if args.trivial else initial_realm
    g, r = build(ws.graph, args.theory, args.name)
    out = _write(args, ws, g, r.name)
    return _report_realm(args, g, r.name, out)


def _pillar_key(text: str) -> int | str:
    return int(text) - 1 if text.isdigit() else text


def cmd_realm_extend(args) -> int:
    ws = _load(args)
    if (code := _require_clean(args, ws)) is not None:
        return code
    g = ws.graph
    r = get_realm(g, args.realm)
    key = _pillar_key(args.pillar)
    p = r.pillar(key)
    decl = parse_declaration(args.decl, g.theory(args.at or p.top))
    face_ctx = g.theory(r.face)
    face_decls = []
    for text in args.face:
        d = parse_declaration(text, face_ctx)
        face_decls.append(d)
        face_ctx = Theory(face_ctx.name, face_ctx.decls + (d,))
    counterparts = {}
    for item in args.counterpart:
        name, sep, text = item.partition("=")
        if not sep:
            raise UsageError(f"--counterpart expects PILLAR=DECL, got {item!r}")
        k = _pillar_key(name.strip())
        counterparts[k] = parse_declaration(text, g.theory(r.pillar(k).top))
    g, r2 = extend_realm(g, r, key, decl, face_decls, counterparts, at=args.at,
                         new_top=args.new_top, budget=args.budget)
    # keep the input realm as loaded; the extension gets its own name
    name = args.name or fresh_name(r.name, g.realms)
    g = g.put_realm(r).put_realm(replace(r2, name=name))
    out = _write(args, ws, g, name)
    return _report_realm(args, g, name, out)


def cmd_realm_merge(args) -> int:
    ws = _load(args)
    if (code := _require_clean(args, ws)) is not None:
        return code
    g = ws.graph
    g, r = merge_realms(g, get_realm(g, args.realm1), get_realm(g, args.realm2), args.v,
                        args.w, minimal=args.minimal, name=args.name,
                        check_size=args.max_size, unfold_depth=args.unfold_depth,
                        budget=args.budget)
    out = _write(args, ws, g, r.name)
    return _report_realm(args, g, r.name, out)


def cmd_lift(args) -> int:
    ws = _load(args)
    if (code := _require_clean(args, ws)) is not None:
        return code
    g = ws.graph
    pv = lift_view(g, get_realm(g, args.realm1), get_realm(g, args.realm2), args.view)
    lines = [f"{s} |-> {t}" for s, t in pv.symbol_map.items()]
    lines += [f"{s} |-> (undefined)" for s in pv.undefined]
    lines.append("total" if pv.total else f"partial: {', '.join(pv.undefined)} undefined")
    if pv.open:
        lines.append("open obligations: " + ", ".join(ob.origin for ob in pv.open))
    _emit(args, "\n".join(lines), {
        "view": pv.name, "source": pv.source, "target": pv.target,
        "map": dict(pv.symbol_map), "undefined": list(pv.undefined), "total": pv.total,
        "obligations": [{"origin": ob.origin, "status": ob.describe()}
                        for ob in pv.obligations]})
    return OK


def cmd_export(args) -> int:
    ws = _load(args)
    text = to_dot(ws.graph, args.unfold_depth) if args.dot else to_json(ws.graph,
                                                                        args.unfold_depth)
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if ws.diagnostics:
        print(_diag_lines(ws.diagnostics), file=sys.stderr)
    return _code_for(ws.diagnostics)


def cmd_countermodel(args) -> int:
    ws = _load(args)
    t = ws.graph.theory(args.theory)
    phi = parse_formula(args.formula, t)
    m = find_countermodel(t, phi, args.max_size, args.budget)
    if m is None:
        _emit(args, f"no countermodel with carriers up to size {args.max_size}",
              {"found": False, "max_size": args.max_size})
        return FAILURE
    _emit(args, f"countermodel of size {m.size}:\n{m.cayley(t)}",
          {"found": True, "size": m.size, "model": m.to_json()})
    return OK


COMMANDS = {
    "check": cmd_check,
    "realm-validate": cmd_realm_validate,
    "realm-init": cmd_realm_init,
    "realm-extend": cmd_realm_extend,
    "realm-merge": cmd_realm_merge,
    "lift": cmd_lift,
    "export": cmd_export,
    "countermodel": cmd_countermodel,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser, commands = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] in commands:
            # file arguments may come before or after options
            args = commands[argv[0]].parse_intermixed_args(argv[1:])
            args.command = argv[0]
        else:
            args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return USAGE
    except BudgetExceeded as e:
        _emit(args, str(e), {"ok": False, "diagnostics": [e.to_dict()]})
        return BUDGET
    except KernelError as e:
        _emit(args, str(e), {"ok": False, "diagnostics": [e.to_dict()]})
        return FAILURE


if __name__ == "__main__":
    raise SystemExit(main())

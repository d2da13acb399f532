"""Command-line front end: ``wl-lab <subcommand> ...``.

Payloads go to stdout (TSV or text, JSON with ``--json``), summaries to
stderr.  Exit codes: 0 ok, 1 integrity error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from pathlib import Path

import numpy as np

from .errors import IntegrityError, ParseError, ResourceError, UnsupportedError, WLLabError


def _load(path: str):
    from .core import read_graph
    try:
        return read_graph(path)
    except OSError as e:
        raise _Usage(f"cannot read {path}: {e.strerror or e}")


class _Usage(Exception):
    pass


def _emit(args, payload, text: str) -> None:
    if args.json:
        sys.stdout.write(json.dumps(payload, sort_keys=True, default=_jsonable) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") or not text else text + "\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset, tuple)):
        return sorted(x) if isinstance(x, (set, frozenset)) else list(x)
    return str(x)


def _note(msg: str) -> None:
    sys.stderr.write(msg.rstrip("\n") + "\n")


# subcommands -------------------------------------------------------------------

def cmd_closure(args) -> int:
    from .core import serialize
    from .refinement import coherent_closure
    c = coherent_closure(_load(args.file))
    _note(f"closure: n={c.n} rank={c.rank} fibers={len(c.fibers)}")
    _emit(args, {"n": c.n, "rank": c.rank, "matrix": c.matrix.tolist(),
                 "fibers": [list(f) for f in c.fibers]},
          serialize(_as_graph(c), [f"rank {c.rank}"]))
    return 0


def _as_graph(c):
    from .core import ColoredDigraph
    return ColoredDigraph(c.matrix)


def cmd_kwl(args) -> int:
    from .core import ColoredDigraph, serialize
    from .refinement import wl_refine
    g = _load(args.file)
    st = wl_refine(g, args.k)
    _note(f"{args.k}-WL: {st.num_classes} classes after {st.rounds} rounds")
    if args.k == 1:
        cols = st.colors.tolist()
        text = f"# rounds {st.rounds}\n" + "".join(f"{v}\t{x}\n" for v, x in enumerate(cols))
    elif args.k == 2:
        text = serialize(st.arcs(), [f"rounds {st.rounds}"])
    else:
        sig = st.signature()
        text = f"# rounds {st.rounds}\n" + "".join(f"{c}\t{m}\n" for c, m in sig.counts)
    _emit(args, {"k": args.k, "rounds": st.rounds, "classes": st.num_classes,
                 "colors": st.colors.tolist() if args.k <= 2 else None}, text)
    return 0


def cmd_distinguish(args) -> int:
    from .refinement import distinguishes
    g, h = _load(args.g), _load(args.h)
    d = distinguishes(g, h, args.k)
    word = "distinguishable" if d else "indistinguishable"
    _emit(args, {"k": args.k, "distinguished": d}, word)
    return 0


def cmd_analyze(args) -> int:
    from .algebra import interspace, quotient_graph
    from .refinement import coherent_closure
    c = coherent_closure(_load(args.file))
    q = quotient_graph(c)
    if args.dot:
        sys.stdout.write(q.to_dot())
        return 0
    rows, lines = [], ["# fibers"]
    for f, vs in enumerate(c.fibers):
        lines.append(f"F{f}\t{len(vs)}\t{q.classes[f]}\t{' '.join(map(str, vs))}")
    lines.append("# interspaces R B relation degree")
    for r in range(len(c.fibers)):
        for b in range(len(c.fibers)):
            if r == b:
                continue
            isp = interspace(c, r, b)
            for a in isp.relations:
                lines.append(f"F{r}\tF{b}\t{a}\t{c.degree(a)}")
                rows.append({"r": r, "b": b, "relation": a, "degree": c.degree(a)})
    lines.append("# quotient edges")
    edges = sorted(tuple(sorted(e)) for e in q.edges)
    lines.extend(f"F{a}\tF{b}" for a, b in edges)
    _emit(args, {"fibers": [list(f) for f in c.fibers], "classes": list(q.classes),
                 "interspaces": rows, "quotient_edges": [list(e) for e in edges]}, "\n".join(lines))
    return 0


def cmd_classify(args) -> int:
    from .algebra import quotient_graph, size_class
    from .patterns import classify_pattern, equivalence_classes, partition_structure
    from .refinement import coherent_closure
    c = coherent_closure(_load(args.file))
    q = quotient_graph(c)
    out, rows = [], []
    for e in sorted(tuple(sorted(e)) for e in q.edges):
        for l, s in (e, e[::-1]):
            if size_class(len(c.fibers[l])) != "large" or len(c.fibers[s]) not in (4, 6):
                continue
            p = classify_pattern(c, l, s)
            cls = equivalence_classes(c, l, [s], [p])
            st = partition_structure(c, l, [s], cls).type()
            stxt = ",".join(st) if isinstance(st, tuple) else str(st)
            out.append(f"{l}\t{s}\t{p.name}\t{len(cls.first)}\t({stxt})")
            rows.append({"L": l, "S": s, "pattern": p.name, "parts": len(cls.first), "structure": st})
    _emit(args, rows, "\n".join(out))
    return 0


def cmd_census(args) -> int:
    from .census import enumerate_homogeneous, enumerate_small_interspaces
    from .core import serialize
    if args.interspace:
        k, l = (int(x) for x in args.interspace.split(","))
        found = enumerate_small_interspaces(k, l, exhaustive=args.exhaustive)
        items = [(k + l, key, cfg) for key, cfg in sorted(found.items())]
    else:
        if args.order is None:
            raise _Usage("census needs --order or --interspace")
        items = [(e.order, e.type, e.representative) for e in enumerate_homogeneous(args.order)]
    lines, rows = [], []
    for i, (n, typ, rep) in enumerate(items):
        path = "-"
        if args.outdir:
            d = Path(args.outdir)
            d.mkdir(parents=True, exist_ok=True)
            path = str(d / f"order{n}_{i}.graph")
            Path(path).write_text(serialize(_as_graph(rep), [f"type {' '.join(map(str, typ))}"]))
        typ_txt = "(" + ",".join(map(str, typ)) + ")"
        lines.append(f"{n}\t{typ_txt}\t{path}")
        rows.append({"order": n, "type": list(typ), "path": path})
    _note(f"census: {len(items)} configurations")
    _emit(args, rows, "\n".join(lines))
    return 0


def cmd_reduce(args) -> int:
    from .critical import reduce_to_core
    from .refinement import coherent_closure
    c = coherent_closure(_load(args.file))
    core, trace = reduce_to_core(c, restorable=not args.no_restorable)
    payload = trace.to_json()
    if args.trace:
        Path(args.trace).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    lines = [f"{s.kind}\t{','.join(map(str, s.fibers))}\t{len(s.removed)}\t{s.cite}" for s in trace.steps]
    lines.append(f"# core: n={core.n} fibers={[len(f) for f in core.fibers]}")
    _emit(args, {"trace": payload, "core_sizes": [len(f) for f in core.fibers]}, "\n".join(lines))
    return 0


def cmd_wldim(args) -> int:
    from .critical import exact_wldim
    if not args.exact:
        raise _Usage("only --exact is supported")
    g = _load(args.file)
    k = exact_wldim(g)
    _emit(args, {"wldim": k}, str(k))
    return 0


def cmd_limit(args) -> int:
    from .bounds import audit_fiber_size, audit_valence, limit_color_valence, limit_fiber_size
    from .refinement import coherent_closure
    c = coherent_closure(_load(args.file))
    if args.cap is None:
        res = limit_color_valence(c, args.valence)
        audit = audit_valence(c, args.valence, res)
    else:
        res = limit_fiber_size(c, args.cap, args.valence)
        audit = audit_fiber_size(c, args.cap, args.valence, res)
    _note(f"limit: |S|={len(res.individualized)} bound={audit.bound} ok={audit.ok}")
    payload = {"individualized": res.individualized, "bound": str(audit.bound), "ok": audit.ok,
               "stages": [list(s) for s in res.stages], "fallback": res.fallback,
               "fibers": [len(f) for f in res.config.fibers]}
    text = " ".join(map(str, res.individualized)) + f"\n# bound {audit.bound} ok {audit.ok}"
    _emit(args, payload, text)
    if not audit.ok:
        raise IntegrityError("limit audit failed", payload)
    return 0


def cmd_bound(args) -> int:
    from .bounds import upper_bound_certificate
    cert = upper_bound_certificate(_load(args.file))
    if args.certificate:
        Path(args.certificate).write_text(json.dumps(cert.to_json(), sort_keys=True, indent=1) + "\n")
    _note(cert.conditional)
    _emit(args, cert.to_json(), f"{cert.total}\t{cert.terminal}\t{len(cert.links)} links")
    return 0


def _parse_twist(text: str) -> list[tuple[int, int]]:
    out = []
    for item in filter(None, text.split(",")):
        try:
            u, v = item.replace(":", "-").split("-")
            out.append((int(u), int(v)))
        except ValueError:
            raise _Usage(f"bad twist edge {item!r}; expected u-v")
    return out


def cmd_cfi(args) -> int:
    from .bounds import cfi, cfi_lower_bound_check
    from .core import serialize, simple_adjacency
    base = simple_adjacency(_load(args.base))
    twist = _parse_twist(args.twist or "")
    inst = cfi(base, twist)
    if args.check_k is not None:
        rep = cfi_lower_bound_check(base, args.check_k, twist[0] if twist else None)
        _emit(args, {"k": rep.k, "distinguished": rep.distinguished, "treewidth": rep.treewidth,
                     "exact_treewidth": rep.exact_tw},
              f"{'distinguishable' if rep.distinguished else 'indistinguishable'}\t"
              f"k={rep.k}\ttw={rep.treewidth}")
        return 0
    _emit(args, {"n": inst.graph.n, "parity": inst.parity, "matrix": inst.graph.arc_color.tolist()},
          serialize(inst.graph, [f"cfi parity {inst.parity}"]))
    return 0


# parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="JSON payload")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized choices")
    common.add_argument("--threads", type=int, default=1, help="worker cap")
    p = argparse.ArgumentParser(prog="wl-lab", parents=[common])
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("closure", parents=[common], help="coherent closure")
    s.add_argument("file")
    s.set_defaults(func=cmd_closure)

    s = sub.add_parser("kwl", parents=[common], help="stable k-WL coloring")
    s.add_argument("file")
    s.add_argument("-k", type=int, default=2)
    s.set_defaults(func=cmd_kwl)

    s = sub.add_parser("distinguish", parents=[common], help="does k-WL separate two graphs")
    s.add_argument("g")
    s.add_argument("h")
    s.add_argument("-k", type=int, default=2)
    s.set_defaults(func=cmd_distinguish)

    s = sub.add_parser("analyze", parents=[common], help="fibers, interspaces, quotient graph")
    s.add_argument("file")
    s.add_argument("--dot", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("classify", parents=[common], help="interspace patterns")
    s.add_argument("file")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("census", parents=[common], help="homogeneous configurations")
    s.add_argument("--order", type=int)
    s.add_argument("--interspace", help="fiber sizes k,l of a two-fiber cell")
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--outdir", help="write representatives here")
    s.set_defaults(func=cmd_census)

    s = sub.add_parser("reduce", parents=[common], help="reduce to a core")
    s.add_argument("file")
    s.add_argument("--trace")
    s.add_argument("--no-restorable", action="store_true")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("wldim", parents=[common], help="exact WL-dimension (n <= 7)")
    s.add_argument("file")
    s.add_argument("--exact", action="store_true")
    s.set_defaults(func=cmd_wldim)

    s = sub.add_parser("limit", parents=[common], help="valence and fiber-size limiting")
    s.add_argument("file")
    s.add_argument("--valence", type=int, required=True)
    s.add_argument("--cap", type=int)
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("bound", parents=[common], help="upper-bound certificate")
    s.add_argument("file")
    s.add_argument("--certificate")
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("cfi", parents=[common], help="CFI graph over a base graph")
    s.add_argument("--base", required=True)
    s.add_argument("--twist", help="comma-separated edges u-v")
    s.add_argument("--check-k", type=int)
    s.set_defaults(func=cmd_cfi)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    random.seed(args.seed)
    np.random.seed(args.seed)
    if args.threads:
        os.environ.setdefault("NUMBA_NUM_THREADS", str(max(1, args.threads)))
    try:
        return args.func(args)
    except _Usage as e:
        _note(f"wl-lab: {e}")
        return 2
    except (ParseError, UnsupportedError, ResourceError) as e:
        _note(f"wl-lab: {type(e).__name__}: {e}")
        return 2
    except IntegrityError as e:
        _note(f"wl-lab: integrity error: {e}")
        if e.witness is not None:
            _note("witness: " + json.dumps(e.witness, sort_keys=True, default=_jsonable))
        return 1
    except WLLabError as e:
        _note(f"wl-lab: {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

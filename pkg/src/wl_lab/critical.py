"""Criticality-style reductions, restorability by automorphism extension, and
exact WL-dimension of tiny graphs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Optional, Sequence

import numpy as np
import pynauty

from .algebra import module_partitions, quotient_graph
from .core import ColoredDigraph, from_adjacency
from .errors import PreconditionMiss, ResourceError, UnsupportedError
from .refinement import CoherentConfiguration, coherent_closure, refine_joint

log = logging.getLogger(__name__)

AUT_VERTEX_LIMIT = 20
EXTENSION_NODE_BUDGET = 200_000
GROUP_ELEMENT_BUDGET = 50_000


# detectors ------------------------------------------------------------------

def detect_tiny(c: CoherentConfiguration) -> list[int]:
    return [f for f, vs in enumerate(c.fibers) if len(vs) <= 3]


def detect_star(c: CoherentConfiguration) -> list[tuple[int, int]]:
    """Ordered pairs (B, R) of quotient-adjacent fibers where some relation
    from B to R has degree 1.  R is the removable side."""
    q = quotient_graph(c)
    out = []
    for e in q.edges:
        for b, r in (tuple(e), tuple(e)[::-1]):
            if any(c.degree(u) == 1 for u in c.relations(b, r)):
                out.append((b, r))
    return sorted(out)


@dataclass(frozen=True)
class AlternatingCycleHit:
    r: int
    b: int
    relation: int                 # a degree-2 relation from R to B
    matching_emerges: bool        # antipodal pairs form a basis relation


def _antipodal_matching(c: CoherentConfiguration, u: int) -> list[tuple[int, int]]:
    m = c.relation_meta[u]
    rs, bs = c.fibers[m.source], c.fibers[m.target]
    nb = {v: set(c.neighbourhood(v, u).tolist()) for v in rs}
    back = {w: set() for w in bs}
    for v in rs:
        for w in nb[v]:
            back[w].add(v)
    pairs = []
    for r in rs:
        # walk the alternating cycle; the vertex at half length is in B
        dist = {r: 0}
        frontier = [r]
        while frontier:
            nxt = []
            for x in frontier:
                ys = nb[x] if x in nb else back[x]
                for y in ys:
                    if y not in dist:
                        dist[y] = dist[x] + 1
                        nxt.append(y)
            frontier = nxt
        far = max(dist.values())
        opp = [y for y, d in dist.items() if d == far]
        if len(opp) != 1 or opp[0] in nb:
            return []
        pairs.append((r, opp[0]))
    return pairs


def detect_alternating_cycle(c: CoherentConfiguration) -> list[AlternatingCycleHit]:
    """Pairs (R, B), |R| = |B| odd, with a degree-2 relation from R to B."""
    out = []
    for r, rs in enumerate(c.fibers):
        for b, bs in enumerate(c.fibers):
            if r == b or len(rs) != len(bs) or len(rs) % 2 == 0:
                continue
            for u in c.relations(r, b):
                if c.degree(u) != 2:
                    continue
                pairs = _antipodal_matching(c, u)
                emerges = False
                if pairs:
                    colors = {int(c.matrix[x, y]) for x, y in pairs}
                    if len(colors) == 1:
                        col = colors.pop()
                        emerges = int((c.matrix == col).sum()) == len(pairs)
                out.append(AlternatingCycleHit(r, b, u, emerges))
                break
    return out


# automorphisms by backtracking ----------------------------------------------

def _search_order(c: CoherentConfiguration, vs: Sequence[int]) -> list[int]:
    fo = c.fiber_of
    sizes = {f: len(c.fibers[f]) for f in set(int(fo[v]) for v in vs)}
    return sorted(vs, key=lambda v: (sizes[int(fo[v])], int(fo[v]), v))


def extensions(c: CoherentConfiguration, domain: Sequence[int], fixed: Optional[dict] = None,
               node_budget: Optional[int] = None) -> Iterator[dict]:
    """All color-preserving bijections of ``domain`` onto itself that agree
    with ``fixed`` and preserve every arc color of c[domain].

    Raises ResourceError once ``node_budget`` search nodes are used.
    """
    mat = c.matrix
    fo = c.fiber_of
    fixed = dict(fixed or {})
    dom = set(domain)
    if not set(fixed) <= dom or not set(fixed.values()) <= dom:
        raise ValueError("fixed map must stay inside the domain")
    src = list(fixed)
    dst = [fixed[v] for v in src]
    s, d = np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)
    if len(src) and not (np.array_equal(mat[np.ix_(s, s)], mat[np.ix_(d, d)])
                         and np.array_equal(fo[s], fo[d])):
        return
    free = _search_order(c, [v for v in domain if v not in fixed])
    used = set(dst)
    by_fiber: dict[int, list[int]] = {}
    for v in domain:
        by_fiber.setdefault(int(fo[v]), []).append(v)
    nodes = [0]

    def rec(i: int):
        if i == len(free):
            yield dict(zip(src, dst))
            return
        v = free[i]
        sv = np.array(src, dtype=np.int64)
        dv = np.array(dst, dtype=np.int64)
        row, col = mat[v, sv], mat[sv, v]
        for w in by_fiber[int(fo[v])]:
            if w in used:
                continue
            nodes[0] += 1
            if node_budget is not None and nodes[0] > node_budget:
                raise ResourceError(f"extension search exceeded {node_budget} nodes")
            if not (np.array_equal(row, mat[w, dv]) and np.array_equal(col, mat[dv, w])):
                continue
            src.append(v)
            dst.append(w)
            used.add(w)
            yield from rec(i + 1)
            src.pop()
            dst.pop()
            used.discard(w)

    yield from rec(0)


def automorphisms(c: CoherentConfiguration, vertices: Sequence[int],
                  limit: int = GROUP_ELEMENT_BUDGET) -> list[dict]:
    """All automorphisms of c[vertices] as dicts.  Hard guard |W| <= 20."""
    vs = sorted(set(int(v) for v in vertices))
    if len(vs) > AUT_VERTEX_LIMIT:
        raise ResourceError(f"automorphism search limited to {AUT_VERTEX_LIMIT} vertices, got {len(vs)}")
    out = []
    for a in extensions(c, vs):
        out.append(a)
        if len(out) > limit:
            raise ResourceError(f"automorphism group larger than {limit} elements")
    return out


def is_automorphism(c: CoherentConfiguration, phi: dict) -> bool:
    s = np.array(list(phi), dtype=np.int64)
    d = np.array([phi[v] for v in s], dtype=np.int64)
    return (sorted(s.tolist()) == sorted(d.tolist())
            and np.array_equal(c.matrix[np.ix_(s, s)], c.matrix[np.ix_(d, d)]))


# restorability ----------------------------------------------------------------

def fiber_vertices(c: CoherentConfiguration, fs: Sequence[int]) -> list[int]:
    return sorted(v for f in fs for v in c.fibers[f])


def neighbour_fibers(c: CoherentConfiguration, fs: Sequence[int]) -> list[int]:
    q = quotient_graph(c)
    return sorted({b for f in fs for b in q.neighbours(f)} - set(fs))


def is_dominating(c: CoherentConfiguration, fs: Sequence[int]) -> bool:
    return len(set(fs)) + len(neighbour_fibers(c, fs)) == len(c.fibers)


@dataclass
class RemovalCertificate:
    fibers: tuple                 # R
    neighbourhood: tuple          # B (fiber ids)
    table: list                   # (phi on B, extension on R ∪ B)
    sufficient_only: bool = False  # extendability to c - R was not decided

    def verify(self, c: CoherentConfiguration) -> bool:
        rb = set(fiber_vertices(c, self.fibers + self.neighbourhood))
        for phi, ext in self.table:
            if set(ext) != rb or any(ext[v] != w for v, w in phi.items()):
                return False
            if not is_automorphism(c, ext):
                return False
        return True


def is_restorable(c: CoherentConfiguration, fibers: Sequence[int],
                  node_budget: int = EXTENSION_NODE_BUDGET) -> tuple[bool, Optional[RemovalCertificate]]:
    """Every automorphism of c[B] that extends to c - R extends to c[R ∪ B]."""
    fs = tuple(sorted(set(fibers)))
    nb = tuple(neighbour_fibers(c, fs))
    rv = fiber_vertices(c, fs)
    bv = fiber_vertices(c, nb)
    if len(rv) + len(bv) > AUT_VERTEX_LIMIT:
        raise ResourceError(f"|R ∪ B| = {len(rv) + len(bv)} exceeds {AUT_VERTEX_LIMIT}")
    rest = sorted(set(range(c.n)) - set(rv))
    projected: dict[tuple, dict] = {}
    for ext in extensions(c, rv + bv):
        key = tuple(ext[v] for v in bv)
        projected.setdefault(key, ext)
    table = []
    sufficient_only = False
    for phi in automorphisms(c, bv):
        key = tuple(phi[v] for v in bv)
        if key in projected:
            table.append((phi, projected[key]))
            continue
        try:
            extends = next(extensions(c, rest, phi, node_budget), None) is not None
        except ResourceError:
            sufficient_only = True
            extends = True
        if extends:
            return False, None
    return True, RemovalCertificate(fs, nb, table, sufficient_only)


def is_taken_care_of(c: CoherentConfiguration, r: int, y: int) -> bool:
    """For all y in Y and U in I[Y,R] some b in another fiber B and some
    U_B in I[B,R] have bU_B ⊆ yU."""
    if r == y:
        raise ValueError("R and Y must be distinct")
    others = [b for b in range(len(c.fibers)) if b not in (r, y)]
    candidates = []
    for b in others:
        for ub in c.relations(b, r):
            for v in c.fibers[b]:
                candidates.append(frozenset(c.neighbourhood(v, ub).tolist()))
    for u in c.relations(y, r):
        for v in c.fibers[y]:
            yu = set(c.neighbourhood(v, u).tolist())
            if not any(s <= yu for s in candidates):
                return False
    return True


# modules ------------------------------------------------------------------------

@dataclass(frozen=True)
class ModuleViolation:
    fiber: int
    partition: tuple
    collapsed: CoherentConfiguration
    kept: tuple                   # vertices of c kept in ``collapsed``


def remove_vertices(c: CoherentConfiguration, vs: Sequence[int]) -> tuple[CoherentConfiguration, list[int]]:
    drop = set(int(v) for v in vs)
    keep = [v for v in range(c.n) if v not in drop]
    sub = c.matrix[np.ix_(keep, keep)]
    return coherent_closure(ColoredDigraph(sub)), keep


def small_module_check(c: CoherentConfiguration, s: int) -> Optional[ModuleViolation]:
    """A partition of the small fiber S into 2 or 3 modules, with the collapse
    to one representative per module."""
    if len(c.fibers) < 2:
        raise PreconditionMiss("module check needs a non-homogeneous configuration")
    if not 4 <= len(c.fibers[s]) <= 7:
        raise PreconditionMiss(f"fiber {s} is not small")
    parts = module_partitions(c, s, 3)
    if not parts:
        return None
    best = min(parts, key=lambda p: (len(p), p))
    drop = [v for blk in best for v in blk[1:]]
    collapsed, keep = remove_vertices(c, drop)
    return ModuleViolation(s, tuple(best), collapsed, tuple(keep))


# reduction driver -----------------------------------------------------------------

@dataclass(frozen=True)
class ReductionStep:
    kind: str
    fibers: tuple                 # fiber ids in the pre-state
    removed: tuple                # original vertex ids removed by this step
    cite: str
    alternative: tuple = ()       # remove-restorable: original ids of R ∪ B


@dataclass
class ReductionTrace:
    steps: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def removed(self) -> list[int]:
        return sorted(v for s in self.steps for v in s.removed)

    def to_json(self) -> dict:
        return {"steps": [{"kind": s.kind, "fibers": list(s.fibers), "removed": list(s.removed),
                           "cite": s.cite, "alternative": list(s.alternative)} for s in self.steps],
                "skipped": list(self.skipped)}


def replay(c: CoherentConfiguration, trace: ReductionTrace) -> tuple[CoherentConfiguration, list[int]]:
    """Apply the removals of a trace to ``c``; returns the result and the
    original ids of its vertices."""
    orig = list(range(c.n))
    for step in trace.steps:
        if not step.removed:
            continue
        pos = {v: i for i, v in enumerate(orig)}
        c, keep = remove_vertices(c, [pos[v] for v in step.removed])
        orig = [orig[i] for i in keep]
    return c, orig


def _restorable_candidates(c: CoherentConfiguration) -> list[tuple[int, ...]]:
    q = quotient_graph(c)
    singles = [(f,) for f in range(len(c.fibers))]
    pairs = sorted(tuple(sorted(e)) for e in q.edges)
    return singles + pairs


def reduce_to_core(c: CoherentConfiguration, restorable: bool = True,
                   node_budget: int = EXTENSION_NODE_BUDGET) -> tuple[CoherentConfiguration, ReductionTrace]:
    """Fixpoint of the removal rules, re-closing after every change."""
    trace = ReductionTrace()
    closed = coherent_closure(c)
    if not closed.same_partition(c):
        trace.steps.append(ReductionStep("re-closure", (), (), "closure"))
    c = closed
    orig = list(range(c.n))

    def drop(kind, fs, vs, cite, alt=()):
        nonlocal c, orig
        c2, keep = remove_vertices(c, vs)
        trace.steps.append(ReductionStep(kind, tuple(fs), tuple(sorted(orig[v] for v in vs)), cite,
                                         tuple(sorted(orig[v] for v in alt))))
        orig = [orig[i] for i in keep]
        c = c2

    while c.n:
        tiny = detect_tiny(c)
        if tiny:
            drop("remove-tiny", tiny, fiber_vertices(c, tiny), "tiny fibers")
            continue
        stars = detect_star(c)
        if stars:
            b, r = stars[0]
            drop("remove-star-center", (r,), fiber_vertices(c, [r]), f"degree-1 relation from {b}")
            continue
        cycles = [h for h in detect_alternating_cycle(c) if h.matching_emerges]
        if cycles:
            h = cycles[0]
            drop("cycle-to-star", (h.r,), fiber_vertices(c, [h.r]), f"odd alternating cycle with {h.b}")
            continue
        if len(c.fibers) > 1:
            hit = None
            for s, vs in enumerate(c.fibers):
                if 4 <= len(vs) <= 7:
                    hit = small_module_check(c, s)
                    if hit:
                        break
            if hit:
                keep = set(hit.kept)
                drop("module-collapse", (hit.fiber,), [v for v in range(c.n) if v not in keep],
                     f"{len(hit.partition)} modules")
                continue
        if restorable:
            done = False
            for fs in _restorable_candidates(c):
                if is_dominating(c, fs):
                    continue
                try:
                    ok, cert = is_restorable(c, fs, node_budget)
                except ResourceError as e:
                    trace.skipped.append({"fibers": list(fs), "reason": str(e)})
                    continue
                if ok:
                    alt = fiber_vertices(c, fs + cert.neighbourhood)
                    drop("remove-restorable", fs, fiber_vertices(c, fs),
                         "non-dominating restorable set" + (" (sufficient check)" if cert.sufficient_only else ""),
                         alt)
                    done = True
                    break
            if done:
                continue
        break
    return c, trace


# graph universes and exact WL-dimension -------------------------------------

UNIVERSE_LIMIT = 7


def _certificate(adj: np.ndarray, colors: Sequence[int]) -> bytes:
    n = adj.shape[0]
    classes = []
    for col in sorted(set(colors)):
        classes.append({v for v in range(n) if colors[v] == col})
    g = pynauty.Graph(n, directed=False,
                      adjacency_dict={v: np.flatnonzero(adj[v]).tolist() for v in range(n)},
                      vertex_coloring=classes)
    return pynauty.certificate(g) + repr([len(x) for x in classes]).encode()


def certificate(adj: np.ndarray, colors: Optional[Sequence[int]] = None) -> bytes:
    """Canonical isomorphism certificate of a vertex-colored simple graph."""
    adj = np.asarray(adj, dtype=bool)
    colors = [0] * adj.shape[0] if colors is None else list(colors)
    if adj.shape[0] == 0:
        return b"empty"
    return _certificate(adj, colors)


@lru_cache(maxsize=None)
def _universe(colors: tuple) -> tuple:
    level = [np.zeros((0, 0), dtype=bool)]
    for i in range(len(colors)):
        seen = {}
        for adj in level:
            for mask in range(1 << i):
                new = np.zeros((i + 1, i + 1), dtype=bool)
                new[:i, :i] = adj
                nb = [j for j in range(i) if mask >> j & 1]
                new[i, nb] = new[nb, i] = True
                key = certificate(new, colors[:i + 1])
                if key not in seen:
                    seen[key] = new
        level = list(seen.values())
    for a in level:
        a.setflags(write=False)
    return tuple(level)


GRAPH_MASK_LIMIT = 9


@lru_cache(maxsize=None)
def graph_masks(n: int) -> tuple:
    """One neighbourhood-bitmask tuple per isomorphism class of simple
    graphs on n vertices, by vertex augmentation; extensions are pruned to
    one neighbour set per orbit of the automorphism group."""
    if n > GRAPH_MASK_LIMIT:
        raise UnsupportedError(f"graph enumeration limited to {GRAPH_MASK_LIMIT} vertices")
    if n == 0:
        return ((),)
    prev = graph_masks(n - 1)
    i = n - 1
    subsets = np.arange(1 << i)
    seen: dict = {}
    for g in prev:
        adj = {v: [w for w in range(i) if g[v] >> w & 1] for v in range(i)}
        reps = subsets
        if i > 1:
            gens = pynauty.autgrp(pynauty.Graph(i, adjacency_dict=adj))[0]
            label = subsets.copy()
            changed = bool(gens)
            while changed:
                changed = False
                for p in gens:
                    img = np.zeros_like(subsets)
                    for v in range(i):
                        img |= ((subsets >> v) & 1) << p[v]
                    low = np.minimum(label, label[img])
                    low = np.minimum(low, _scatter_min(label, img))
                    if (low != label).any():
                        label = low
                        changed = True
            reps = np.flatnonzero(label == subsets)
        for m in reps.tolist():
            new = tuple(g[v] | ((m >> v & 1) << i) for v in range(i)) + (m,)
            key = pynauty.certificate(pynauty.Graph(n, adjacency_dict={
                v: [w for w in range(n) if new[v] >> w & 1] for v in range(n)}))
            seen.setdefault(key, new)
    return tuple(seen.values())


def _scatter_min(label: np.ndarray, img: np.ndarray) -> np.ndarray:
    out = label.copy()
    np.minimum.at(out, img, label)
    return out


def graph_universe(n: int, vertex_colors: Optional[Sequence[int]] = None) -> list[np.ndarray]:
    """One adjacency matrix per isomorphism class of (vertex-colored) simple
    graphs on n vertices, with colors assigned as in ``vertex_colors`` sorted."""
    if n > UNIVERSE_LIMIT:
        raise UnsupportedError(f"graph universe limited to {UNIVERSE_LIMIT} vertices")
    colors = tuple(sorted(vertex_colors)) if vertex_colors is not None else (0,) * n
    if len(colors) != n:
        raise ValueError("one color per vertex required")
    return list(_universe(colors))


def graph_parts(g: ColoredDigraph) -> tuple[np.ndarray, list[int]]:
    """Adjacency and vertex colors of a vertex-colored simple graph."""
    names = g.color_names
    mat = g.arc_color
    if not np.array_equal(mat, mat.T):
        raise UnsupportedError("exact WL-dimension needs an undirected simple graph")
    loops = np.diagonal(mat)
    off = ~np.eye(g.n, dtype=bool)
    off_colors = set(mat[off].tolist())
    if names is not None:
        bad = [names[x] for x in off_colors if names[x] not in ("edge", "nonarc")]
        if bad:
            raise UnsupportedError(f"arc colors {bad} are not plain edges")
        adj = np.zeros_like(off)
        if "edge" in names:
            adj = (mat == names.index("edge")) & off
        colors = [int(names[x][1:]) if names[x].startswith("v") else int(x) for x in loops]
    else:
        if len(off_colors) > 1:
            raise UnsupportedError("unnamed colors: cannot tell edges from non-edges")
        adj = np.zeros_like(off)
        colors = loops.tolist()
    return adj, colors


def exact_wldim(g: ColoredDigraph, max_k: Optional[int] = None) -> int:
    """Least k such that k-WL separates g from every non-isomorphic graph on
    the same vertex count with the same vertex-color multiset."""
    n = g.n
    if n > UNIVERSE_LIMIT:
        raise UnsupportedError(f"exact WL-dimension limited to n <= {UNIVERSE_LIMIT}")
    if n <= 1:
        return 1
    adj, colors = graph_parts(g)
    key = certificate(adj, colors)
    order = np.argsort(colors, kind="stable")
    scolors = sorted(colors)
    # relabel g so that its colors are sorted like the universe
    g0 = from_adjacency(adj[np.ix_(order, order)], scolors)
    deg = sorted(zip(scolors, adj[np.ix_(order, order)].sum(axis=1).tolist()))
    rivals = []
    for h in graph_universe(n, colors):
        if sorted(zip(scolors, h.sum(axis=1).tolist())) != deg:
            continue                       # 1-WL separates different colored degree sequences
        if certificate(h, scolors) == key:
            continue
        rivals.append(from_adjacency(h, scolors))
    k = 1
    top = max_k or n
    while rivals:
        if k > top:
            raise ResourceError(f"dimension exceeds {top}")
        sigs = refine_joint([g0] + rivals, k)[0]
        counts = [np.unique(s, return_counts=True) for s in sigs]
        ref = counts[0]
        rivals = [h for h, cnt in zip(rivals, counts[1:])
                  if np.array_equal(cnt[0], ref[0]) and np.array_equal(cnt[1], ref[1])]
        if rivals:
            k += 1
    return k

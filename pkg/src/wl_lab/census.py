"""Named special graphs, the census of small homogeneous coherent
configurations and of interspaces between small fibers."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product
from typing import Optional, Sequence, Union

import networkx as nx
import numpy as np

from .algebra import Constituent, constituent, interspace, quotient_graph, ul_classes
from .core import ColoredDigraph
from .errors import UnsupportedError
from .refinement import CoherentConfiguration, coherent_closure, verify_coherence


# constituent types ---------------------------------------------------------

@dataclass(frozen=True, order=True)
class ConstituentType:
    """Name of a special graph, e.g. ``2K3``, ``C6->``, ``I(F)``.

    ``tag`` is the family, ``name`` the rendered label.  Unrecognized graphs
    carry tag ``other`` and a hash in the name.
    """

    tag: str
    name: str

    def __str__(self):
        return self.name


def _t(tag: str, name: str) -> ConstituentType:
    return ConstituentType(tag, name)


def _label(*xs: int) -> str:
    return "".join(str(x) for x in xs) if all(x < 10 for x in xs) else ",".join(str(x) for x in xs)


def _components(adj: np.ndarray) -> list[list[int]]:
    g = nx.from_numpy_array((adj | adj.T).astype(int))
    return sorted((sorted(cc) for cc in nx.connected_components(g)), key=lambda x: x[0])


@lru_cache(maxsize=None)
def _paley_tournament(q: int = 7) -> nx.DiGraph:
    squares = {(x * x) % q for x in range(1, q)}
    g = nx.DiGraph()
    g.add_nodes_from(range(q))
    g.add_edges_from((a, b) for a in range(q) for b in range(q) if a != b and (b - a) % q in squares)
    return g


@lru_cache(maxsize=None)
def _c3_k2() -> nx.DiGraph:
    # each vertex of a directed triangle replaced by two copies
    g = nx.DiGraph()
    g.add_nodes_from(range(6))
    g.add_edges_from((a, b) for a in range(6) for b in range(6) if (b // 2 - a // 2) % 3 == 1)
    return g


def _digraph(adj: np.ndarray) -> nx.DiGraph:
    return nx.from_numpy_array(adj.astype(int), create_using=nx.DiGraph)


def _other(adj: np.ndarray, prefix: str = "") -> ConstituentType:
    g = _digraph(adj)
    h = nx.weisfeiler_lehman_graph_hash(g, iterations=4)
    digest = hashlib.sha1(f"{adj.shape[0]}:{int(adj.sum())}:{h}".encode()).hexdigest()[:10]
    return _t("other", f"{prefix}other({digest})")


def _recognize_symmetric(adj: np.ndarray) -> ConstituentType:
    n = adj.shape[0]
    deg = adj.sum(axis=1)
    if n == 1:
        return _t("K", "K1")
    if adj.sum() == n * (n - 1):
        return _t("K", f"K{n}")
    comps = _components(adj)
    sizes = {len(cc) for cc in comps}
    if len(sizes) == 1:
        m = sizes.pop()
        s = len(comps)
        cliques = all(adj[np.ix_(cc, cc)].sum() == m * (m - 1) for cc in comps)
        if cliques and s > 1:
            return _t("sK", f"{s}K{m}")
        if (deg == 2).all() and m >= 3:
            return _t("C", f"C{m}" if s == 1 else f"{s}C{m}")
    comp_adj = ~adj & ~np.eye(n, dtype=bool)
    co = _components(comp_adj)
    co_sizes = {len(cc) for cc in co}
    if len(co) > 1 and len(co_sizes) == 1:
        m = co_sizes.pop()
        if all(comp_adj[np.ix_(cc, cc)].sum() == m * (m - 1) for cc in co):
            return _t("Kmulti", "K" + _label(*([m] * len(co))))
    g = nx.from_numpy_array(adj.astype(int))
    if n % 2 == 0 and n >= 6 and len(comps) == 1 and (deg == n // 2 - 1).all() and nx.is_bipartite(g):
        m = n // 2
        return _t("Kmm-M", f"K{m}{m}-{m}K2")
    if n == 9 and (deg == 4).all() and nx.is_isomorphic(g, nx.cartesian_product(nx.complete_graph(3), nx.complete_graph(3))):
        return _t("R", "R3")
    return _other(adj)


def _recognize_directed(adj: np.ndarray) -> ConstituentType:
    n = adj.shape[0]
    outd = adj.sum(axis=1)
    ind = adj.sum(axis=0)
    comps = _components(adj)
    sizes = {len(cc) for cc in comps}
    if (outd == 1).all() and (ind == 1).all() and len(sizes) == 1:
        m = sizes.pop()
        s = len(comps)
        return _t("dC", f"C{m}->" if s == 1 else f"{s}C{m}->")
    g = _digraph(adj)
    if n == 7 and (adj | adj.T).sum() == 42 and nx.is_isomorphic(g, _paley_tournament()):
        return _t("PTr", "PTr(7)")
    if n == 6 and (outd == 2).all() and nx.is_isomorphic(g, _c3_k2()):
        return _t("C3[K2]", "C3->[K2]")
    return _other(adj, "d")


def _recognize_bipartite(adj: np.ndarray) -> ConstituentType:
    """``adj`` is |left| x |right|, arcs from left to right."""
    k, l = adj.shape
    if not adj.any():
        return _t("empty", "empty")
    full = np.zeros((k + l, k + l), dtype=bool)
    full[:k, k:] = adj
    comps = _components(full)
    shapes = Counter((sum(1 for x in cc if x < k), sum(1 for x in cc if x >= k)) for cc in comps)
    complete = all(full[np.ix_([x for x in cc if x < k], [x for x in cc if x >= k])].all() for cc in comps)
    if complete and len(shapes) == 1:
        (a, b), s = shapes.popitem()
        if a == b == 1:
            return _t("M", f"M{s}")
        return _t("sKab", ("" if s == 1 else str(s)) + "K" + _label(a, b))
    rdeg = adj.sum(axis=1)
    cdeg = adj.sum(axis=0)
    if k == l and (rdeg == 2).all() and (cdeg == 2).all() and len(comps) == 1:
        return _t("altC", f"C{2 * k}")
    if k == l == 7 and (rdeg == 3).all() and (cdeg == 3).all():
        a = adj.astype(int)
        if ((a @ a.T)[~np.eye(7, dtype=bool)] == 1).all():
            return _t("I(F)", "I(F)")
    for p, q, m in ((k, l, adj), (l, k, adj.T)):
        if p == 4 and q == 6:
            mm = m.astype(int)
            cols = {tuple(np.flatnonzero(mm[:, j])) for j in range(6)}
            if (mm.sum(axis=0) == 2).all() and len(cols) == 6:
                return _t("I(K4,6)", "I(K4,6)")
    if (~adj).any():
        inner = _recognize_bipartite(~adj)
        if inner.tag != "other" and not inner.name.startswith("RxB-"):
            return _t("co", f"RxB-{inner.name}")
    return _other(full, "b")


def recognize_constituent(g: Union[Constituent, np.ndarray], left: Optional[int] = None) -> ConstituentType:
    """Recognize the special graph formed by one constituent.

    ``g`` is a ``Constituent`` or a boolean adjacency matrix; for bipartite
    input pass the number of left vertices (arcs left to right).
    """
    if isinstance(g, Constituent):
        if g.bipartite:
            k = len(g.left)
            return recognize_constituent(g.adj[:k, k:], left=-1)
        g = g.adj
    adj = np.asarray(g, dtype=bool)
    size = adj.shape[0] + (adj.shape[1] if left == -1 else 0)
    if size > 128:
        raise UnsupportedError("constituent recognition is limited to 128 vertices")
    if left == -1:
        return _recognize_bipartite(adj)
    if left is not None:
        return _recognize_bipartite(adj[:left, left:])
    if np.array_equal(adj, adj.T):
        return _recognize_symmetric(adj)
    return _recognize_directed(adj)


# types of configurations ----------------------------------------------------

def cc_type(c: CoherentConfiguration, fiber: int) -> tuple[str, ...]:
    """Type tuple of c[fiber]: one entry per transpose pair, loops omitted,
    entries sorted."""
    if len(c.fibers[fiber]) > 7:
        raise UnsupportedError("type tuples are defined for fibers of size <= 7")
    if len(c.fibers[fiber]) == 1:
        return ("K1",)
    groups = ul_classes(c, fiber)[1:]
    names = [recognize_constituent(constituent(c, grp[0])).name for grp in groups]
    return tuple(sorted(names))


def interspace_type(c: CoherentConfiguration, r: int, b: int) -> tuple[str, ...]:
    return tuple(sorted(recognize_constituent(constituent(c, a)).name for a in c.relations(r, b)))


def contains_type(c: CoherentConfiguration, fiber: int, name: str) -> bool:
    """Some relation of c[fiber], or its symmetrization, has type ``name``."""
    for a in c.relations(fiber, fiber)[1:]:
        con = constituent(c, a)
        if recognize_constituent(con).name == name:
            return True
        if recognize_constituent(con.adj | con.adj.T).name == name:
            return True
    return False


def same_multiset(t1: Sequence[str], t2: Sequence[str]) -> bool:
    return Counter(t1) == Counter(t2)


# isomorphism of small configurations (color-permuting) ---------------------

def _first_appearance(mat: np.ndarray) -> tuple:
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(x, len(seen)) for x in mat.ravel().tolist())


def isomorphic_configurations(m1: np.ndarray, m2: np.ndarray) -> bool:
    """Exhaustive search over vertex bijections; colors may be renamed."""
    n = m1.shape[0]
    if m2.shape[0] != n:
        return False
    if sorted(Counter(m1.ravel().tolist()).values()) != sorted(Counter(m2.ravel().tolist()).values()):
        return False
    target = _first_appearance(m2)
    for p in permutations(range(n)):
        p = list(p)
        if _first_appearance(m1[np.ix_(p, p)]) == target:
            return True
    return False


# enumeration of homogeneous configurations --------------------------------

@dataclass(frozen=True)
class CensusEntry:
    order: int
    type: tuple
    representative: CoherentConfiguration


def _integer_partitions(n: int, largest: Optional[int] = None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _integer_partitions(n - first, first):
            yield (first,) + rest


def _involutions(degrees: Sequence[int]):
    """Transpose maps on colors 1..r pairing colors of equal degree."""
    r = len(degrees)

    def rec(i, t):
        if i > r:
            yield dict(t)
            return
        if i in t:
            yield from rec(i + 1, t)
            return
        t[i] = i
        yield from rec(i + 1, t)
        del t[i]
        for j in range(i + 1, r + 1):
            if j not in t and degrees[j - 1] == degrees[i - 1]:
                t[i], t[j] = j, i
                yield from rec(i + 1, t)
                del t[i], t[j]

    yield from rec(1, {})


def _search_homogeneous(n: int):
    """Yield color matrices of homogeneous coherent configurations of order n.

    Vertex 0's row is fixed to a sorted color sequence (relabel the other
    vertices and colors), the transpose map is chosen up front, and the
    remaining cells are filled row by row.  Whenever a row is finished, the
    intersection counts of every pair among the finished rows are compared
    against the first pair seen in the same color.
    """
    if n == 1:
        yield np.zeros((1, 1), dtype=np.int64)
        return
    for degs in _integer_partitions(n - 1):
        degs = tuple(sorted(degs))
        r = len(degs)
        for tmap in _involutions(degs):
            mat = [[0] * n for _ in range(n)]
            row0 = [c for c in range(1, r + 1) for _ in range(degs[c - 1])]
            for v in range(1, n):
                mat[0][v] = row0[v - 1]
                mat[v][0] = tmap[row0[v - 1]]
            counts = [[0] * (r + 1) for _ in range(n)]
            for v in range(n):
                for u in range(n):
                    if u != v and (v == 0 or u == 0):
                        counts[v][mat[v][u]] += 1
            cells = [(i, j) for i in range(1, n) for j in range(i + 1, n)]
            ref: dict[int, tuple] = {}
            yield from _fill(n, r, degs, tmap, mat, counts, cells, 0, ref)


def _pair_key(mat, n, v, w):
    return tuple(sorted(Counter((mat[v][u], mat[u][w]) for u in range(n)).items()))


def _row_complete_check(mat, n, i, ref):
    added = []
    ok = True
    for v in range(i + 1):
        for (a, b) in ((v, i), (i, v)):
            if a == b and v != i:
                continue
            key = _pair_key(mat, n, a, b)
            col = mat[a][b]
            if col in ref:
                if ref[col] != key:
                    ok = False
                    break
            else:
                ref[col] = key
                added.append(col)
        if not ok:
            break
    return ok, added


def _fill(n, r, degs, tmap, mat, counts, cells, idx, ref):
    if idx == len(cells):
        ok, added = _row_complete_check(mat, n, n - 1, ref)
        if ok:
            yield np.array(mat, dtype=np.int64)
        for col in added:
            del ref[col]
        return
    i, j = cells[idx]
    for a in range(1, r + 1):
        b = tmap[a]
        if counts[i][a] >= degs[a - 1] or counts[j][b] >= degs[b - 1]:
            continue
        mat[i][j], mat[j][i] = a, b
        counts[i][a] += 1
        counts[j][b] += 1
        row_done = j == n - 1
        added = []
        ok = True
        if row_done:
            ok, added = _row_complete_check(mat, n, i, ref)
        if ok:
            yield from _fill(n, r, degs, tmap, mat, counts, cells, idx + 1, ref)
        for col in added:
            del ref[col]
        counts[i][a] -= 1
        counts[j][b] -= 1
    mat[i][j] = mat[j][i] = 0


def _type_of_matrix(mat: np.ndarray) -> tuple:
    c = CoherentConfiguration(ColoredDigraph(mat))
    return cc_type(c, 0), c


def enumerate_homogeneous(n: int) -> list[CensusEntry]:
    """All homogeneous coherent configurations of order n up to isomorphism."""
    if n < 1 or n > 7:
        raise UnsupportedError("census covers orders 1..7")
    reps: list[tuple[tuple, np.ndarray, CoherentConfiguration]] = []
    for mat in _search_homogeneous(n):
        if not verify_coherence(mat).ok:
            continue
        typ, c = _type_of_matrix(mat)
        key = tuple(sorted(Counter(mat.ravel().tolist()).values()))
        dup = False
        for t2, m2, _ in reps:
            if t2 == typ and isomorphic_configurations(c.matrix, m2):
                dup = True
                break
        if not dup:
            reps.append((typ, c.matrix, c))
    reps.sort(key=lambda x: (x[2].rank, x[0]))
    return [CensusEntry(n, t, c) for t, _, c in reps]


# interspaces between small fibers -------------------------------------------

def _two_fiber(inner_r: np.ndarray, inner_b: np.ndarray, link: np.ndarray) -> CoherentConfiguration:
    """Closure of two fibers with given internal colorings and interspace
    coloring ``link`` (|R| x |B| color ids)."""
    k, l = link.shape
    mat = np.zeros((k + l, k + l), dtype=np.int64)
    off = 0
    mat[:k, :k] = inner_r + off
    off += int(inner_r.max()) + 1
    mat[k:, k:] = inner_b + off
    off += int(inner_b.max()) + 1
    mat[:k, k:] = link + off
    off += int(link.max()) + 1
    mat[k:, :k] = link.T + off
    return coherent_closure(ColoredDigraph(mat))


def _fiber_pair(c: CoherentConfiguration, k: int) -> tuple[int, int]:
    r = int(c.fiber_of[0])
    b = int(c.fiber_of[k])
    return r, b


def _zero(n):
    return np.zeros((n, n), dtype=np.int64)


def small_interspace_instances() -> dict[tuple[int, int], list[CoherentConfiguration]]:
    """Explicit two-fiber configurations for the interspace types between
    small fibers that survive in critical configurations."""
    out: dict[tuple[int, int], list[CoherentConfiguration]] = {}

    def add(key, link):
        c = _two_fiber(_zero(link.shape[0]), _zero(link.shape[1]), link)
        out.setdefault(key, []).append(c)

    z4 = np.arange(4)
    add((4, 4), ((z4[None, :] - z4[:, None]) % 4 < 2).astype(np.int64))          # C8
    add((4, 4), ((z4[None, :] % 2) == (z4[:, None] % 2)).astype(np.int64))        # 2K22
    pairs = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    add((4, 6), np.array([[int(p in e) for e in pairs] for p in range(4)]))       # I(K4,6)
    add((4, 6), np.array([[int(p // 2 == q // 3) for q in range(6)] for p in range(4)]))  # 2K23
    z6 = np.arange(6)
    diff = (z6[None, :] - z6[:, None]) % 6
    link = np.select([np.isin(diff, [0, 3]), np.isin(diff, [1, 2])], [0, 1], 2)
    add((6, 6), link)                                                              # C12, C12, 3K22
    add((6, 6), (z6[:, None] // 3 == z6[None, :] // 3).astype(np.int64))          # 2K33
    add((6, 6), ((z6[None, :] - z6[:, None]) % 3).astype(np.int64))               # 3 x 3K22
    add((6, 6), ((z6[None, :] - z6[:, None]) % 3 == 0).astype(np.int64))          # 3K22 + rest
    z7 = np.arange(7)
    add((7, 7), np.isin((z7[:, None] - z7[None, :]) % 7, [0, 1, 3]).astype(np.int64))  # Fano
    return out


def _critical_survivor(c: CoherentConfiguration, r: int, b: int) -> bool:
    """Interspace filter from the star rule: a degree-1 relation in either
    direction lets one side be dropped.  Module conditions depend on the
    surrounding configuration and are not applied to a two-fiber search."""
    return interspace(c, r, b).d_min > 1 and interspace(c, b, r).d_min > 1


def _regular_links(k: int, l: int):
    """Colorings of a k x l grid where every color has constant row and
    column counts; colors named by first appearance."""
    cells = [(i, j) for i in range(k) for j in range(l)]
    grid = [[-1] * l for _ in range(k)]

    def rec(idx, ncol, rowc, colc, rdeg):
        if idx == len(cells):
            for a in range(ncol):
                if any(rowc[i][a] != rdeg[a] for i in range(k)):
                    return
                cd = colc[0][a]
                if any(colc[j][a] != cd for j in range(l)):
                    return
            yield np.array(grid, dtype=np.int64)
            return
        i, j = cells[idx]
        for a in range(ncol + 1):
            if a == ncol and ncol >= max(k, l):
                break
            if a < ncol and i > 0 and rowc[i][a] >= rdeg[a]:
                continue
            grid[i][j] = a
            new = a == ncol
            if new:
                if i > 0:
                    continue
                for row in rowc:
                    row.append(0)
                for col in colc:
                    col.append(0)
                rdeg.append(0)
            rowc[i][a] += 1
            colc[j][a] += 1
            if i == 0:
                rdeg[a] += 1
            # rows after the first must match row 0's counts; prune overshoot
            yield from rec(idx + 1, ncol + (1 if new else 0), rowc, colc, rdeg)
            rowc[i][a] -= 1
            colc[j][a] -= 1
            if i == 0:
                rdeg[a] -= 1
            if new:
                for row in rowc:
                    row.pop()
                for col in colc:
                    col.pop()
                rdeg.pop()
        grid[i][j] = -1

    yield from rec(0, 0, [[] for _ in range(k)], [[] for _ in range(l)], [])


def exhaustive_interspaces_4_4() -> dict[tuple, CoherentConfiguration]:
    """Every non-homogeneous interspace type between two fibers of size 4 in
    a coherent configuration on 8 points, keyed by type; ``survivors``
    restricts to those compatible with the removal rules."""
    reps = [e.representative.matrix for e in enumerate_homogeneous(4)]
    found: dict[tuple, CoherentConfiguration] = {}
    for link in _regular_links(4, 4):
        if link.max() == 0:
            continue
        for mr, mb in product(reps, reps):
            mat = np.zeros((8, 8), dtype=np.int64)
            mat[:4, :4] = mr
            mat[4:, 4:] = mb + 10
            mat[:4, 4:] = link + 20
            mat[4:, :4] = link.T + 30
            if not verify_coherence(mat).ok:
                continue
            c = CoherentConfiguration(ColoredDigraph(mat))
            r, b = _fiber_pair(c, 4)
            typ = interspace_type(c, r, b)
            found.setdefault(typ, c)
    return found


def enumerate_small_interspaces(k: int, l: int, exhaustive: bool = False) -> dict[tuple, CoherentConfiguration]:
    """Interspace types between small fibers of sizes k and l that can occur
    in a critical configuration, each with a two-fiber representative.

    For (4, 4) with ``exhaustive`` the list is derived from a complete search;
    otherwise it comes from explicit constructions (realizability only).
    """
    if not (4 <= k <= 7 and 4 <= l <= 7):
        raise UnsupportedError("sizes must lie in 4..7")
    out: dict[tuple, CoherentConfiguration] = {}
    if exhaustive and (k, l) == (4, 4):
        for typ, c in exhaustive_interspaces_4_4().items():
            r, b = _fiber_pair(c, 4)
            if _critical_survivor(c, r, b):
                out[typ] = c
        return dict(sorted(out.items()))
    key = (min(k, l), max(k, l))
    for c in small_interspace_instances().get(key, []):
        r, b = _fiber_pair(c, key[0])
        if k > l:
            r, b = b, r
        out[interspace_type(c, r, b)] = c
    return dict(sorted(out.items()))


# implications between interspace and fiber types -----------------------------

@dataclass(frozen=True)
class Implication:
    rule: str
    premise: bool
    conclusion: Optional[bool]

    @property
    def holds(self) -> bool:
        return not self.premise or bool(self.conclusion)


def interspace_implications(c: CoherentConfiguration, r: int, b: int) -> list[Implication]:
    """Evaluate the implications from an interspace type to the types of the
    two fibers (with |R| <= |B|)."""
    if len(c.fibers[r]) > len(c.fibers[b]):
        r, b = b, r
    types = set(interspace_type(c, r, b)) if not interspace(c, r, b).homogeneous else set()

    def has(f, name):
        return contains_type(c, f, name) if len(c.fibers[f]) <= 64 else False

    out = []
    for x in (4, 6):
        p = f"C{2 * x}" in types
        out.append(Implication(f"C{2 * x} => C{x} in R", p, has(r, f"C{x}") if p else None))
    for y in (2, 3):
        p = f"{y}K22" in types
        out.append(Implication(f"{y}K22 => {y}K2 in R", p, has(r, f"{y}K2") if p else None))
    p = "2K23" in types
    out.append(Implication("2K23 => 2K2 in R, 2K3 or 2C3-> in B", p,
                           (has(r, "2K2") and (has(b, "2K3") or has(b, "2C3->"))) if p else None))
    p = "2K33" in types
    out.append(Implication("2K33 => 2K3 in R or 2C3-> in B", p,
                           (has(r, "2K3") or has(b, "2C3->") or has(r, "2C3->")) if p else None))
    p = "I(F)" in types
    out.append(Implication("I(F) => K7 or PTr(7) in R", p,
                           (has(r, "K7") or has(r, "PTr(7)")) if p else None))
    p = "I(K4,6)" in types
    out.append(Implication("I(K4,6) => K4 in R; 3K2 with K222 or C3->[K2] in B", p,
                           (has(r, "K4") and has(b, "3K2") and (has(b, "K222") or has(b, "C3->[K2]")))
                           if p else None))
    return out

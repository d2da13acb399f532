"""Structure of a coherent configuration: fibers, interspaces, constituents,
quotient graph, modules, direct sums and max-modules."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import ColoredDigraph
from .refinement import CoherentConfiguration

TINY, SMALL, LARGE = "tiny", "small", "large"


def size_class(size: int) -> str:
    if size <= 3:
        return TINY
    if size <= 7:
        return SMALL
    return LARGE


def fibers(c: CoherentConfiguration) -> list[tuple[int, ...]]:
    return list(c.fibers)


def fiber_size(c: CoherentConfiguration, f: int) -> int:
    return len(c.fibers[f])


# interspaces and constituents -----------------------------------------------

@dataclass(frozen=True)
class Interspace:
    source: int
    target: int
    relations: tuple
    degrees: tuple

    @property
    def homogeneous(self) -> bool:
        return len(self.relations) == 1

    @property
    def d_min(self) -> int:
        return min(self.degrees)

    @property
    def d_max(self) -> int:
        return max(self.degrees)


def interspace(c: CoherentConfiguration, r: int, b: int) -> Interspace:
    nf = len(c.fibers)
    if not (0 <= r < nf and 0 <= b < nf):
        raise KeyError(f"unknown fiber id ({r}, {b})")
    rels = tuple(c.relations(r, b))
    return Interspace(r, b, rels, tuple(c.degree(a) for a in rels))


@dataclass(frozen=True, eq=False)
class Constituent:
    """Digraph of one basis relation on the vertices it touches.

    For a relation inside a fiber ``left == right``; for an interspace
    relation the vertices are ``left + right`` and arcs go left to right.
    """

    relation: int
    left: tuple
    right: tuple
    adj: np.ndarray

    @property
    def bipartite(self) -> bool:
        return self.left != self.right

    @property
    def vertices(self) -> tuple:
        return self.left if not self.bipartite else self.left + self.right


def constituent(c: CoherentConfiguration, a: int) -> Constituent:
    m = c.relation_meta[a]
    left = c.fibers[m.source]
    right = c.fibers[m.target]
    mat = c.matrix
    if m.source == m.target:
        adj = mat[np.ix_(left, left)] == a
        return Constituent(a, left, left, adj)
    k, l = len(left), len(right)
    adj = np.zeros((k + l, k + l), dtype=bool)
    adj[:k, k:] = mat[np.ix_(left, right)] == a
    return Constituent(a, left, right, adj)


def union_constituent(c: CoherentConfiguration, rels: Sequence[int]) -> Constituent:
    """Constituent of a union of relations sharing source and target fibers."""
    parts = [constituent(c, a) for a in rels]
    adj = np.zeros_like(parts[0].adj)
    for p in parts:
        adj |= p.adj
    return Constituent(-1, parts[0].left, parts[0].right, adj)


# quotient graph -------------------------------------------------------------

@dataclass(frozen=True)
class QuotientGraph:
    sizes: tuple
    edges: frozenset            # frozensets {R, B}
    classes: tuple              # size class per fiber
    relevant: tuple             # relevance flag per fiber

    @property
    def num_fibers(self) -> int:
        return len(self.sizes)

    def neighbours(self, f: int) -> list[int]:
        return sorted(x for e in self.edges if f in e for x in e if x != f)

    def degree(self, f: int) -> int:
        return len(self.neighbours(f))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_fibers,) * 2, dtype=bool)
        for e in self.edges:
            r, b = tuple(e)
            a[r, b] = a[b, r] = True
        return a

    def of_class(self, cls: str) -> list[int]:
        return [f for f, k in enumerate(self.classes) if k == cls]

    def induced(self, fs: Sequence[int]) -> "QuotientGraph":
        keep = list(fs)
        index = {f: i for i, f in enumerate(keep)}
        edges = frozenset(frozenset(index[x] for x in e) for e in self.edges if e <= set(keep))
        return QuotientGraph(tuple(self.sizes[f] for f in keep), edges,
                             tuple(self.classes[f] for f in keep),
                             tuple(self.relevant[f] for f in keep))

    def large_part(self) -> "QuotientGraph":
        return self.induced(self.of_class(LARGE))

    def small_part(self) -> "QuotientGraph":
        return self.induced(self.of_class(SMALL))

    def components(self) -> list[list[int]]:
        if not self.num_fibers:
            return []
        k, lab = connected_components(csr_matrix(self.adjacency()), directed=False)
        return [np.flatnonzero(lab == i).tolist() for i in range(k)]

    def to_dot(self) -> str:
        out = ["graph Q {"]
        for f, s in enumerate(self.sizes):
            out.append(f'  F{f} [label="F{f} |{s}| {self.classes[f]}"];')
        for e in sorted(tuple(sorted(e)) for e in self.edges):
            out.append(f"  F{e[0]} -- F{e[1]};")
        out.append("}")
        return "\n".join(out) + "\n"


def quotient_graph(c: CoherentConfiguration) -> QuotientGraph:
    nf = len(c.fibers)
    counts: dict[tuple, int] = {}
    for m in c.relation_meta:
        counts[(m.source, m.target)] = counts.get((m.source, m.target), 0) + 1
    edges = frozenset(frozenset((r, b)) for (r, b), k in counts.items() if r != b and k > 1)
    sizes = tuple(len(f) for f in c.fibers)
    classes = tuple(size_class(s) for s in sizes)
    relevant = tuple(sizes[f] in (4, 6) and ul_size(c, f) > 2 for f in range(nf))
    return QuotientGraph(sizes, edges, classes, relevant)


# underlying undirected structure ------------------------------------------

def ul_classes(c: CoherentConfiguration, r: int, b: Optional[int] = None) -> list[tuple[int, ...]]:
    """Relations of ``I[r, b]`` (or ``c[r]``) merged with their transposes.

    Each entry lists the merged relation ids in ascending order.  Within a
    fiber the loop relation is its own class.
    """
    b = r if b is None else b
    seen: set[int] = set()
    out = []
    for a in c.relations(r, b):
        if a in seen:
            continue
        t = c.transpose(a)
        grp = (a,) if (t == a or r != b) else tuple(sorted((a, t)))
        seen.update(grp)
        out.append(grp)
    return out


def ul_size(c: CoherentConfiguration, f: int) -> int:
    """|ul(c[f])|, loops included."""
    return len(ul_classes(c, f))


@dataclass(frozen=True)
class UndirectedSystem:
    classes: dict                 # fiber -> list of merged relation groups
    relation_class: dict          # relation id -> merged group

    def size(self, f: int) -> int:
        return len(self.classes[f])


def underlying_undirected(c: CoherentConfiguration) -> UndirectedSystem:
    classes = {}
    rel_class = {}
    for f in range(len(c.fibers)):
        groups = ul_classes(c, f)
        classes[f] = groups
        for g in groups:
            for a in g:
                rel_class[a] = g
    return UndirectedSystem(classes, rel_class)


def ul_adjacency(c: CoherentConfiguration, group: Sequence[int]) -> np.ndarray:
    """Symmetric adjacency on a fiber for a merged relation group."""
    f = c.relation_meta[group[0]].source
    vs = c.fibers[f]
    sub = c.matrix[np.ix_(vs, vs)]
    adj = np.isin(sub, list(group))
    return adj | adj.T


# modules --------------------------------------------------------------------

def is_module(c: CoherentConfiguration, m: Sequence[int]) -> bool:
    """Every outside vertex sees ``m`` through one relation only."""
    m = list(m)
    if len(m) <= 1:
        return True
    outside = np.setdiff1d(np.arange(c.n), m)
    block = c.matrix[np.ix_(outside, m)]
    return bool((block == block[:, :1]).all())


def module_closure(c: CoherentConfiguration, seed: Sequence[int], fiber: int) -> Optional[frozenset]:
    """Smallest module inside ``fiber`` containing ``seed``; None if none exists.

    An outside vertex that sees the current set through two relations must
    belong to every module containing it.
    """
    inside = set(c.fibers[fiber])
    m = set(seed)
    mat = c.matrix
    while True:
        ml = sorted(m)
        outside = np.setdiff1d(np.arange(c.n), ml)
        block = mat[np.ix_(outside, ml)]
        bad = outside[(block != block[:, :1]).any(axis=1)]
        if len(bad) == 0:
            return frozenset(m)
        if not set(bad.tolist()) <= inside:
            return None
        m.update(bad.tolist())


def _set_partitions(items: list, max_blocks: int):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest, max_blocks):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        if len(part) < max_blocks:
            yield [[first]] + part


def module_partitions(c: CoherentConfiguration, fiber: int, max_blocks: int) -> list[list[tuple]]:
    """All partitions of the fiber into 2..max_blocks modules (exhaustive)."""
    vs = list(c.fibers[fiber])
    out = []
    for part in _set_partitions(vs, max_blocks):
        if len(part) < 2:
            continue
        if all(is_module(c, p) for p in part):
            out.append(sorted(tuple(sorted(p)) for p in part))
    return sorted(out)


def find_modules(c: CoherentConfiguration, fiber: int) -> Optional[list[tuple]]:
    """Coarsest proper partition of a fiber into modules, or None.

    Proper means at least two blocks and at least one block with two or more
    vertices.  Blocks are merged greedily: two blocks merge when the smallest
    module containing both is still proper.
    """
    vs = list(c.fibers[fiber])
    if len(vs) < 2:
        return None
    blocks = [frozenset([v]) for v in vs]
    changed = True
    while changed:
        changed = False
        for i, j in combinations(range(len(blocks)), 2):
            m = module_closure(c, blocks[i] | blocks[j], fiber)
            if m is None or len(m) == len(vs):
                continue
            merged = frozenset().union(*[b for b in blocks if b & m])
            blocks = [b for b in blocks if not b & m] + [merged]
            blocks.sort(key=lambda b: min(b))
            changed = True
            break
    if len(blocks) in (1, len(vs)):
        return None
    if not all(is_module(c, b) for b in blocks):
        return None
    return [tuple(sorted(b)) for b in blocks]


# direct sum and max-modules --------------------------------------------------

def direct_sum(c1: CoherentConfiguration, c2: CoherentConfiguration) -> CoherentConfiguration:
    n1, n2 = c1.n, c2.n
    f1, f2 = len(c1.fibers), len(c2.fibers)
    r1 = c1.rank
    mat = np.zeros((n1 + n2, n1 + n2), dtype=np.int64)
    mat[:n1, :n1] = c1.matrix
    mat[n1:, n1:] = c2.matrix + r1
    base = r1 + c2.rank
    fo1 = np.asarray(c1.fiber_of)
    fo2 = np.asarray(c2.fiber_of)
    mat[:n1, n1:] = base + fo1[:, None] * f2 + fo2[None, :]
    mat[n1:, :n1] = base + f1 * f2 + fo2[:, None] * f1 + fo1[None, :]
    return CoherentConfiguration(ColoredDigraph(mat))


def maximal_relations(c: CoherentConfiguration) -> set[int]:
    """Designated maximal relation per fiber and per fiber pair, with its
    transpose: largest degree, lowest canonical id on ties."""
    out: set[int] = set()
    nf = len(c.fibers)
    for r in range(nf):
        for b in range(r, nf):
            rels = c.relations(r, b)
            if r == b:
                rels = [a for a in rels if a != c.matrix[c.fibers[r][0], c.fibers[r][0]]]
            if not rels:
                continue
            best = min(rels, key=lambda a: (-c.degree(a), a))
            out.add(best)
            out.add(c.transpose(best))
    return out


def max_modules(c: CoherentConfiguration) -> list[list[int]]:
    """Connected components of the union of all non-maximal relations."""
    n = c.n
    if n == 0:
        return []
    keep = maximal_relations(c)
    loops = set(np.diagonal(c.matrix).tolist())
    mask = ~np.isin(c.matrix, list(keep | loops))
    k, lab = connected_components(csr_matrix(mask), directed=True, connection="weak")
    comps = [np.flatnonzero(lab == i).tolist() for i in range(k)]
    return sorted(comps, key=lambda x: x[0])


def non_maximal_degree(c: CoherentConfiguration, r: int, b: int) -> int:
    """Largest degree of a non-maximal relation in I[r,b] (0 if none)."""
    keep = maximal_relations(c)
    rels = [a for a in c.relations(r, b) if a not in keep]
    if r == b:
        loop = c.matrix[c.fibers[r][0], c.fibers[r][0]]
        rels = [a for a in rels if a != loop]
    return max((c.degree(a) for a in rels), default=0)


def sub_configuration(c: CoherentConfiguration, fs: Sequence[int]) -> tuple[CoherentConfiguration, list[int]]:
    """c[union of fibers fs] with the vertex list used (ascending)."""
    vs = sorted(v for f in fs for v in c.fibers[f])
    return CoherentConfiguration(ColoredDigraph(c.matrix[np.ix_(vs, vs)])), vs


def remove_fibers(c: CoherentConfiguration, fs: Sequence[int]) -> tuple[CoherentConfiguration, list[int]]:
    keep = [f for f in range(len(c.fibers)) if f not in set(fs)]
    return sub_configuration(c, keep)

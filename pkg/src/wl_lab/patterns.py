"""Interspace patterns between a small fiber (size 4 or 6) and another fiber,
equivalence-class partitions and partition structures."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .algebra import quotient_graph, ul_adjacency, ul_classes
from .census import recognize_constituent
from .core import ColoredDigraph
from .errors import IntegrityError, UnsupportedError
from .refinement import CoherentConfiguration, verify_coherence

DAGGER, DDAGGER = "†", "‡"

# name -> (|S|, groups); a group is (host type, clique sizes with marks)
PATTERNS: dict[str, tuple[int, tuple]] = {
    "(K4,2)": (4, (("K4", ("2",)),)),
    "(2K2,2)": (4, (("2K2", ("2",)),)),
    "(C4,2)": (4, (("C4", ("2",)),)),
    "(K6,2)": (6, (("K6", ("2",)),)),
    "(K6,2,2)": (6, (("K6", ("2", "2")),)),
    "(3K2,2)": (6, (("3K2", ("2",)),)),
    "(3K2,2,2)": (6, (("3K2", ("2", "2")),)),
    "(C6,2;3K2,2)": (6, (("C6", ("2",)), ("3K2", ("2",)))),
    "(3K2,2;3K2,2)": (6, (("3K2", ("2",)), ("3K2", ("2",)))),
    "(K222,2,2)": (6, (("K222", ("2", "2")),)),
    "(K33,2)": (6, (("K33", ("2",)),)),
    "(K33,2,2)": (6, (("K33", ("2", "2")),)),
    "(K6,3†)": (6, (("K6", ("3" + DAGGER,)),)),
    "(K6,3‡)": (6, (("K6", ("3" + DDAGGER,)),)),
    "(2K3,3)": (6, (("2K3", ("3",)),)),
    "(K222,3†)": (6, (("K222", ("3" + DAGGER,)),)),
    "(K222,3‡)": (6, (("K222", ("3" + DDAGGER,)),)),
}

# hosts whose 3-entries carry no mark
_UNMARKED_HOSTS = {"2K3"}


@dataclass(frozen=True)
class PatternGroup:
    host: str                     # type of ul(S, A^i)
    host_relations: tuple         # relation ids merged into ul(A^i)
    entries: tuple                # d^i_j with marks, e.g. ("2", "3†")
    relations: tuple              # U^i_j, aligned with entries


@dataclass(frozen=True)
class InterspacePattern:
    name: str
    large: int                    # fiber L
    small: int                    # fiber S
    groups: tuple
    omitted: int                  # the basis relation left out of the pattern

    @property
    def t_total(self) -> int:
        return sum(len(g.entries) for g in self.groups)

    def u(self, i: int, j: int) -> int:
        """U^i_j, 1-based as in the pattern notation."""
        return self.groups[i - 1].relations[j - 1]

    def a(self, i: int) -> tuple:
        return self.groups[i - 1].host_relations

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class _Hosted:
    relation: int
    host: tuple                   # ul group
    host_type: str
    d: int
    mark: str


def _local(c: CoherentConfiguration, s: int) -> dict[int, int]:
    return {v: i for i, v in enumerate(c.fibers[s])}


def _triangles(adj: np.ndarray) -> list[frozenset]:
    n = adj.shape[0]
    return [frozenset(t) for t in combinations(range(n), 3)
            if adj[t[0], t[1]] and adj[t[0], t[2]] and adj[t[1], t[2]]]


def _host_of(c: CoherentConfiguration, l: int, s: int, u: int, groups, adjs) -> Optional[_Hosted]:
    """The ul group of c[S] in which every neighbourhood ``lU`` is a clique."""
    loc = _local(c, s)
    rows = c.matrix[np.ix_(c.fibers[l], c.fibers[s])] == u
    d = int(rows[0].sum())
    if d not in (2, 3):
        return None
    host = None
    for gi, adj in enumerate(adjs):
        x = np.flatnonzero(rows[0])
        if all(adj[a, b] for a, b in combinations(x, 2)):
            host = gi
            break
    if host is None:
        return None
    adj = adjs[host]
    nbhds = {frozenset(np.flatnonzero(r).tolist()) for r in rows}
    for x in nbhds:
        if not all(adj[a, b] for a, b in combinations(sorted(x), 2)):
            return None
    host_type = recognize_constituent(adj).name
    mark = ""
    if d == 3:
        tri = _triangles(adj)
        size = len(loc)
        if tri and all(t in nbhds for t in tri):
            mark = DAGGER
        else:
            comp_ok = all(frozenset(range(size)) - t in set(tri) for t in tri)
            exactly_one = all((t in nbhds) != ((frozenset(range(size)) - t) in nbhds) for t in tri)
            if tri and comp_ok and exactly_one:
                mark = DDAGGER
        if host_type in _UNMARKED_HOSTS:
            mark = ""
    return _Hosted(u, groups[host], host_type, d, mark)


def pattern_candidates(c: CoherentConfiguration, l: int, s: int) -> list[InterspacePattern]:
    """Every listed pattern that the interspace satisfies, over all choices of
    the omitted relation.  A coherent input from a critical configuration
    yields exactly one name."""
    size = len(c.fibers[s])
    if size not in (4, 6):
        raise UnsupportedError("patterns are defined for small fibers of size 4 or 6")
    rels = c.relations(l, s)
    if len(rels) < 2:
        return []
    groups = ul_classes(c, s)[1:]
    adjs = [ul_adjacency(c, g) for g in groups]
    hosted = {u: _host_of(c, l, s, u, groups, adjs) for u in rels}
    found: dict[str, InterspacePattern] = {}
    for omit in rels:
        rest = [u for u in rels if u != omit]
        if any(hosted[u] is None for u in rest):
            continue
        by_group: dict[tuple, list[_Hosted]] = {}
        for u in rest:
            by_group.setdefault(hosted[u].host, []).append(hosted[u])
        observed = Counter((hs[0].host_type, tuple(sorted(f"{h.d}{h.mark}" for h in hs)))
                           for hs in by_group.values())
        for name, (psize, tmpl) in PATTERNS.items():
            if psize != size or Counter(tmpl) != observed or name in found:
                continue
            found[name] = _witness(name, tmpl, l, s, by_group, omit)
    return [found[k] for k in sorted(found)]


def _witness(name, tmpl, l, s, by_group, omit) -> InterspacePattern:
    pool = sorted(by_group.items(), key=lambda kv: kv[0])
    groups = []
    used = set()
    for host_type, entries in tmpl:
        for key, hs in pool:
            if key in used or hs[0].host_type != host_type:
                continue
            if tuple(sorted(f"{h.d}{h.mark}" for h in hs)) != tuple(sorted(entries)):
                continue
            used.add(key)
            hs = sorted(hs, key=lambda h: h.relation)
            groups.append(PatternGroup(host_type, key, tuple(f"{h.d}{h.mark}" for h in hs),
                                       tuple(h.relation for h in hs)))
            break
    return InterspacePattern(name, l, s, tuple(groups), omit)


def classify_pattern(c: CoherentConfiguration, l: int, s: int) -> InterspacePattern:
    """The unique listed pattern of I[L,S]; IntegrityError if none or several."""
    if l == s or frozenset((l, s)) not in quotient_graph(c).edges:
        raise IntegrityError(f"({l},{s}) is not an edge of the quotient graph")
    cands = pattern_candidates(c, l, s)
    if len(cands) != 1:
        raise IntegrityError(
            f"interspace ({l},{s}) matches {len(cands)} patterns", [p.name for p in cands])
    return cands[0]


# equivalence classes --------------------------------------------------------

def _partition_by(c: CoherentConfiguration, l: int, u: int, s: int) -> list[tuple]:
    rows = c.matrix[np.ix_(c.fibers[l], c.fibers[s])] == u
    parts: dict[bytes, list[int]] = {}
    for v, row in zip(c.fibers[l], rows):
        parts.setdefault(row.tobytes(), []).append(v)
    return sorted(tuple(p) for p in parts.values())


def meet(partitions: Sequence[Sequence[tuple]]) -> list[tuple]:
    label: dict[int, tuple] = {}
    for i, part in enumerate(partitions):
        for j, block in enumerate(part):
            for v in block:
                label[v] = label.get(v, ()) + (j,)
    out: dict[tuple, list[int]] = {}
    for v in sorted(label):
        out.setdefault(label[v], []).append(v)
    return sorted(tuple(p) for p in out.values())


@dataclass(frozen=True)
class EquivalenceClasses:
    large: int
    smalls: tuple
    patterns: tuple
    per_relation: dict = field(default_factory=dict)     # (S, i, j) -> partition
    first: tuple = ()             # Part^1_1 of the first small fiber
    parts: tuple = ()             # meet over everything

    def __len__(self):
        return len(self.parts)


def equivalence_classes(c: CoherentConfiguration, l: int, smalls: Sequence[int],
                        patterns: Optional[Sequence[InterspacePattern]] = None) -> EquivalenceClasses:
    smalls = list(smalls)
    if patterns is None:
        patterns = [classify_pattern(c, l, s) for s in smalls]
    per = {}
    for s, p in zip(smalls, patterns):
        for i, g in enumerate(p.groups, start=1):
            for j, u in enumerate(g.relations, start=1):
                per[(s, i, j)] = tuple(_partition_by(c, l, u, s))
    first = per[(smalls[0], 1, 1)]
    parts = tuple(meet(list(per.values())))
    return EquivalenceClasses(l, tuple(smalls), tuple(patterns), per, first, parts)


def expected_part_count(p: InterspacePattern, c: CoherentConfiguration) -> int:
    """|Part^1_1| predicted from the pattern: edges of the host for d = 2,
    its 3-cliques for †, half of them for ‡."""
    g = p.groups[0]
    adj = ul_adjacency(c, g.host_relations)
    d = g.entries[0]
    if d == "2":
        return int(adj.sum()) // 2
    tri = len(_triangles(adj))
    if d.endswith(DDAGGER):
        return tri // 2
    return tri


# partition structure --------------------------------------------------------

@dataclass(frozen=True)
class PartitionStructure:
    parts: tuple
    config: CoherentConfiguration

    def type(self) -> tuple:
        return structure_type(self.config)


def partition_structure(c: CoherentConfiguration, l: int, smalls: Sequence[int],
                        classes: Optional[EquivalenceClasses] = None) -> PartitionStructure:
    """Configuration on the parts of Part(L, smalls) whose colors are the
    level sets of (P, P') -> (|pU ∩ p'U'|)_{U,U'}."""
    if classes is None:
        classes = equivalence_classes(c, l, smalls)
    parts = classes.parts
    reps = [p[0] for p in parts]
    cols = [v for s in smalls for v in c.fibers[s]]
    rels = sorted({a for s in smalls for a in c.relations(l, s)})
    sub = c.matrix[np.ix_(reps, cols)]
    ind = np.stack([(sub == u) for u in rels]).astype(np.int64)      # U x P x S
    # eta[U, U', P, P'] = |pU ∩ p'U'|
    eta = np.einsum("aps,bqs->pqab", ind, ind)
    k = len(parts)
    keys = eta.reshape(k * k, -1)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    mat = inv.reshape(k, k)
    config = CoherentConfiguration(ColoredDigraph(mat))
    return PartitionStructure(parts, config)


def structure_type(config: CoherentConfiguration) -> tuple:
    """Type tuple of a homogeneous configuration of any small order."""
    if config.n == 1:
        return ("K1",)
    from .algebra import constituent
    names = [recognize_constituent(constituent(config, g[0])).name for g in ul_classes(config, 0)[1:]]
    return tuple(sorted(names))


# fully intersecting partitions and the divisor identity ---------------------

def fully_intersecting(c: CoherentConfiguration, s1: int, l: int, s2: int) -> bool:
    if s1 == s2:
        raise ValueError("distinct small fibers required")
    q = quotient_graph(c)
    if frozenset((l, s1)) not in q.edges or frozenset((l, s2)) not in q.edges:
        raise ValueError("(S1, L, S2) must be a path in the quotient graph")
    p1 = equivalence_classes(c, l, [s1]).first
    p2 = equivalence_classes(c, l, [s2]).first
    return all(set(a) & set(b) for a in p1 for b in p2)


@dataclass(frozen=True)
class DivisorReport:
    path: tuple
    u: int
    u2: int
    d_u: int
    d_u2: int
    size_b: int
    intersection: int

    @property
    def holds(self) -> bool:
        return self.d_u * self.d_u2 == self.size_b * self.intersection


def induced_paths(c: CoherentConfiguration) -> list[tuple[int, int, int]]:
    """All (R, B, Y) with R-B, B-Y quotient edges and I[R,Y] homogeneous."""
    q = quotient_graph(c)
    out = []
    for b in range(q.num_fibers):
        nb = q.neighbours(b)
        for r in nb:
            for y in nb:
                if r != y and frozenset((r, y)) not in q.edges:
                    out.append((r, b, y))
    return out


def divisor_check(c: CoherentConfiguration, path: tuple[int, int, int], u: int, u2: int) -> DivisorReport:
    """d(U) d(U') = |B| |rU ∩ yU'| on an induced quotient path (R, B, Y)."""
    r, b, y = path
    if path not in induced_paths(c):
        raise ValueError(f"{path} is not an induced path of the quotient graph")
    if c.relation_meta[u].source != r or c.relation_meta[u].target != b:
        raise ValueError("U must lie in I[R,B]")
    if c.relation_meta[u2].source != y or c.relation_meta[u2].target != b:
        raise ValueError("U' must lie in I[Y,B]")
    bs = c.fibers[b]
    a1 = (c.matrix[np.ix_(c.fibers[r], bs)] == u).astype(np.int64)
    a2 = (c.matrix[np.ix_(c.fibers[y], bs)] == u2).astype(np.int64)
    inter = a1 @ a2.T
    vals = np.unique(inter)
    if len(vals) != 1:
        raise IntegrityError("intersection sizes vary: input not coherent",
                             {"path": path, "values": vals.tolist()})
    rep = DivisorReport(path, u, u2, c.degree(u), c.degree(u2), len(bs), int(vals[0]))
    if not rep.holds:
        raise IntegrityError("divisor identity violated", rep)
    return rep

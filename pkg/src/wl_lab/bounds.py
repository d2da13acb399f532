"""Potential accounting, fiber-size limiting, treewidth, local reductions,
t-reduced checks, CFI graphs and upper-bound certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional, Sequence, Union

import numpy as np

from .algebra import (LARGE, SMALL, max_modules, maximal_relations, quotient_graph, size_class,
                      ul_size)
from .core import ColoredDigraph, from_adjacency
from .errors import IntegrityError, PreconditionMiss, ResourceError, UnsupportedError
from .refinement import CoherentConfiguration, coherent_closure, distinguishes, individualize

Number = Union[int, Fraction]


# parameters and potential ---------------------------------------------------

@dataclass(frozen=True)
class Parameters:
    n_large: int                  # vertices in large fibers
    k_large: int                  # number of large fibers
    n_small: int                  # vertices in small fibers

    def __add__(self, other: "Parameters") -> "Parameters":
        return Parameters(self.n_large + other.n_large, self.k_large + other.k_large,
                          self.n_small + other.n_small)

    def __sub__(self, other: "Parameters") -> "Parameters":
        return Parameters(self.n_large - other.n_large, self.k_large - other.k_large,
                          self.n_small - other.n_small)


def parameters_of_sizes(sizes: Sequence[int]) -> Parameters:
    nl = sum(s for s in sizes if size_class(s) == LARGE)
    kl = sum(1 for s in sizes if size_class(s) == LARGE)
    ns = sum(s for s in sizes if size_class(s) == SMALL)
    return Parameters(nl, kl, ns)


def parameters(c: Union[CoherentConfiguration, Sequence[int]]) -> Parameters:
    sizes = [len(f) for f in c.fibers] if isinstance(c, CoherentConfiguration) else list(c)
    return parameters_of_sizes(sizes)


def tau(n_large: int, k_large: int, n_small: int) -> Fraction:
    return Fraction(3 * n_large + n_small - 8 * k_large, 20)


def potential(p: Union[Parameters, CoherentConfiguration]) -> Fraction:
    if isinstance(p, CoherentConfiguration):
        p = parameters(p)
    return tau(p.n_large, p.k_large, p.n_small)


def h_function(a: Number) -> Fraction:
    a = Fraction(a)
    if a <= 0:
        raise ValueError("h is defined for positive arguments")
    return max(Fraction(-2, 5), Fraction(-3 * math.ceil(8 * a), 20))


@dataclass(frozen=True)
class ProgressReport:
    before: Fraction
    after: Fraction
    bound: Fraction               # right-hand side of the inequality
    h_terms: tuple

    @property
    def delta(self) -> Fraction:
        return self.after - self.before

    @property
    def holds(self) -> bool:
        return self.after <= self.bound


def progress_for_split(n: int, parts: Sequence[int]) -> ProgressReport:
    """Progress bound for a large fiber of size n split into the given parts."""
    if size_class(n) != LARGE:
        raise PreconditionMiss("the fiber must be large")
    if sum(parts) != n or any(p <= 0 for p in parts):
        raise ValueError("parts must be a partition of n")
    before = potential(parameters_of_sizes([n]))
    after = potential(parameters_of_sizes(parts))
    hs = tuple(h_function(Fraction(p, n)) for p in parts)
    return ProgressReport(before, after, before + sum(hs) + Fraction(2, 5), hs)


def check_progress_in_large(before: CoherentConfiguration, after: CoherentConfiguration) -> ProgressReport:
    if len(before.fibers) != 1 or size_class(before.n) != LARGE:
        raise PreconditionMiss("the first configuration must consist of a single large fiber")
    if after.n != before.n:
        raise PreconditionMiss("configurations must share the vertex set")
    if not _finer(after, before):
        raise PreconditionMiss("the second configuration must be finer")
    return progress_for_split(before.n, [len(f) for f in after.fibers])


def _finer(a: CoherentConfiguration, b: CoherentConfiguration) -> bool:
    pairs = np.stack([a.matrix.ravel(), b.matrix.ravel()], axis=1)
    u = np.unique(pairs, axis=0)
    return len(np.unique(u[:, 0])) == len(u)


# Zemlyachenko-style limiting ---------------------------------------------------

def non_maximal_relations(c: CoherentConfiguration) -> list[int]:
    maxi = maximal_relations(c)
    loops = {int(c.matrix[v, v]) for v in range(c.n)}
    return [a for a in range(c.rank) if a not in maxi and a not in loops]


def max_non_maximal_degree(c: CoherentConfiguration) -> int:
    rels = non_maximal_relations(c)
    return max((c.degree(a) for a in rels), default=0)


@dataclass
class LimitResult:
    individualized: list
    config: CoherentConfiguration
    stages: list = field(default_factory=list)    # (degree bound, vertices used)
    fallback: int = 0                               # picks outside the proof's rule


def limit_color_valence(c: CoherentConfiguration, d: int) -> LimitResult:
    """Individualize until every non-maximal relation has degree <= d,
    halving the degree bound stage by stage."""
    if d < 1:
        raise ValueError("d must be positive")
    cur = coherent_closure(c)
    chosen: list[int] = []
    top = max_non_maximal_degree(cur)
    bounds = []
    b = d
    while b < top:
        bounds.append(b)
        b *= 2
    stages = []
    for bound in reversed(bounds):
        used = 0
        while True:
            rels = [a for a in non_maximal_relations(cur) if cur.degree(a) > bound]
            if not rels:
                break
            a = min(rels, key=lambda x: (-cur.degree(x), x))
            src = cur.fibers[cur.relation_meta[a].source]
            v = next(x for x in src if x not in chosen)
            chosen.append(v)
            cur = individualize(cur, [v])
            used += 1
        stages.append((bound, used))
    return LimitResult(chosen, cur, stages)


def _max_module_fibers(c: CoherentConfiguration) -> list[list[int]]:
    """Fiber pieces of every max-module, as vertex lists."""
    out = []
    for mod in max_modules(c):
        ms = set(mod)
        for f in c.fibers:
            piece = [v for v in f if v in ms]
            if piece:
                out.append(piece)
    return out


def _walk_to_large(c: CoherentConfiguration, r: int, cap: int, d: int, rels_by_pair: dict,
                   state_limit: int = 4000) -> Optional[list]:
    """Sets r U_1 ... U_i, each U a union of non-maximal relations with
    |X U| <= d |X|, until one exceeds ``cap``; the chain or None."""
    start = frozenset([r])
    seen = {start}
    queue = [(start, [start])]
    fo = c.fiber_of
    while queue:
        x, chain = queue.pop(0)
        src = int(fo[next(iter(x))])
        xs = np.array(sorted(x))
        for (s, t), rels in rels_by_pair.items():
            if s != src:
                continue
            options = [[a] for a in rels]
            greedy, acc = [], set()
            for a in sorted(rels, key=lambda a: c.degree(a)):
                nxt = acc | set(np.flatnonzero(np.isin(c.matrix[xs], [a]).any(axis=0)).tolist())
                if len(nxt) <= d * len(x):
                    greedy.append(a)
                    acc = nxt
            if len(greedy) > 1:
                options.append(greedy)
            for u in options:
                y = frozenset(np.flatnonzero(np.isin(c.matrix[xs], u).any(axis=0)).tolist())
                if not y or len(y) > d * len(x) or y in seen:
                    continue
                if len(y) > cap:
                    return chain + [y]
                seen.add(y)
                if len(seen) > state_limit:
                    return None
                queue.append((y, chain + [y]))
    return None


def limit_fiber_size(c: CoherentConfiguration, cap: int, d: int) -> LimitResult:
    """Valence limit, then individualize walk starts until every max-module
    has fibers of size <= cap."""
    if cap < 1 or d < 1:
        raise ValueError("cap and d must be positive")
    if d >= cap:
        cur = coherent_closure(c)
        allv = list(range(cur.n))
        return LimitResult(allv, individualize(cur, allv) if allv else cur, [("all", len(allv))])
    first = limit_color_valence(c, d)
    cur = first.config
    chosen = list(first.individualized)
    used = 0
    fallback = 0
    while True:
        big = [p for p in _max_module_fibers(cur) if len(p) > cap]
        if not big:
            break
        nonmax = non_maximal_relations(cur)
        by_pair: dict = {}
        for a in nonmax:
            m = cur.relation_meta[a]
            by_pair.setdefault((m.source, m.target), []).append(a)
        pick = None
        candidates = sorted({v for mod in max_modules(cur) for v in mod} - set(chosen))
        for r in candidates:
            if _walk_to_large(cur, r, cap, d, by_pair) is not None:
                pick = r
                break
        if pick is None:
            pick = next(v for v in big[0] if v not in chosen)
            fallback += 1
        chosen.append(pick)
        cur = individualize(cur, [pick])
        used += 1
    stages = first.stages + [("fiber-size", used)]
    return LimitResult(chosen, cur, stages, fallback)


@dataclass(frozen=True)
class LimitAudit:
    size_ok: bool
    degree_ok: bool
    fiber_ok: bool
    bound: Fraction
    used: int

    @property
    def ok(self) -> bool:
        return self.size_ok and self.degree_ok and self.fiber_ok


def audit_valence(c: CoherentConfiguration, d: int, res: LimitResult) -> LimitAudit:
    bound = Fraction(2 * c.n, d)
    return LimitAudit(len(res.individualized) <= bound, max_non_maximal_degree(res.config) <= d,
                      True, bound, len(res.individualized))


def audit_fiber_size(c: CoherentConfiguration, cap: int, d: int, res: LimitResult) -> LimitAudit:
    bound = Fraction(2 * c.n, d) + Fraction(d * c.n, cap)
    if d >= cap:
        return LimitAudit(len(res.individualized) == c.n, True, True, bound, len(res.individualized))
    fib = all(len(p) <= cap for p in _max_module_fibers(res.config))
    return LimitAudit(len(res.individualized) <= bound, max_non_maximal_degree(res.config) <= d,
                      fib, bound, len(res.individualized))


# treewidth -----------------------------------------------------------------------

@dataclass
class TreeDecomposition:
    bags: list                    # list of frozensets
    edges: list                   # tree edges between bag indices
    width: int
    exact: bool = True

    def verify(self, adj: np.ndarray) -> bool:
        n = adj.shape[0]
        if n == 0:
            return True
        if set().union(*self.bags) != set(range(n)):
            return False
        for u, v in zip(*np.nonzero(np.triu(adj, 1))):
            if not any(u in b and v in b for b in self.bags):
                return False
        k = len(self.bags)
        if len(self.edges) != k - 1:
            return False
        nb = {i: set() for i in range(k)}
        for a, b in self.edges:
            nb[a].add(b)
            nb[b].add(a)
        seen = {0}
        stack = [0]
        while stack:
            x = stack.pop()
            for y in nb[x] - seen:
                seen.add(y)
                stack.append(y)
        if len(seen) != k:
            return False
        for v in range(n):
            holders = {i for i, b in enumerate(self.bags) if v in b}
            start = next(iter(holders))
            seen = {start}
            stack = [start]
            while stack:
                x = stack.pop()
                for y in nb[x] & holders - seen:
                    seen.add(y)
                    stack.append(y)
            if seen != holders:
                return False
        return max(len(b) for b in self.bags) - 1 == self.width


def _masks(adj: np.ndarray) -> list[int]:
    adj = np.asarray(adj, dtype=bool)
    return [sum(1 << int(j) for j in np.flatnonzero(adj[i]) if j != i) for i in range(adj.shape[0])]


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _eliminate(nb: list[int], v: int) -> list[int]:
    out = list(nb)
    nv = out[v]
    x = nv
    while x:
        low = x & -x
        u = low.bit_length() - 1
        out[u] = (out[u] | nv) & ~(1 << u) & ~(1 << v)
        x ^= low
    out[v] = 0
    return out


def _fill_in(nb: list[int], v: int) -> int:
    nv = nb[v]
    missing = 0
    x = nv
    while x:
        low = x & -x
        u = low.bit_length() - 1
        missing += _popcount(nv & ~nb[u] & ~low)
        x ^= low
    return missing // 2


def _min_fill_order(nb: list[int], alive: int) -> tuple[list[int], int]:
    order, width = [], -1
    nb = list(nb)
    while alive:
        best = None
        x = alive
        while x:
            low = x & -x
            v = low.bit_length() - 1
            key = (_fill_in(nb, v), _popcount(nb[v]), v)
            if best is None or key < best:
                best = key
            x ^= low
        v = best[2]
        width = max(width, _popcount(nb[v]))
        nb = _eliminate(nb, v)
        alive &= ~(1 << v)
        order.append(v)
    return order, width


def _minor_min_width(nb: list[int], alive: int) -> int:
    """Lower bound: contract a min-degree vertex into its min-degree neighbour."""
    nb = list(nb)
    lb = 0
    while _popcount(alive) > 1:
        v = min((i for i in range(len(nb)) if alive >> i & 1), key=lambda i: (_popcount(nb[i]), i))
        dv = _popcount(nb[v])
        lb = max(lb, dv)
        if dv == 0:
            alive &= ~(1 << v)
            continue
        u = min((i for i in range(len(nb)) if nb[v] >> i & 1), key=lambda i: (_popcount(nb[i]), i))
        merged = (nb[u] | nb[v]) & ~(1 << u) & ~(1 << v)
        for w in range(len(nb)):
            if nb[w] >> v & 1:
                nb[w] = (nb[w] & ~(1 << v)) | (1 << u) if w != u else nb[w] & ~(1 << v)
        nb[u] = merged
        nb[v] = 0
        alive &= ~(1 << v)
    return lb


def _is_clique(nb: list[int], s: int) -> bool:
    x = s
    while x:
        low = x & -x
        u = low.bit_length() - 1
        if (s & ~low) & ~nb[u]:
            return False
        x ^= low
    return True


def _treewidth_bb(nb0: list[int]) -> tuple[int, list[int]]:
    n = len(nb0)
    full = (1 << n) - 1
    best_order, best = _min_fill_order(nb0, full)
    best = max(best, 0)
    lb0 = _minor_min_width(nb0, full)
    if lb0 >= best:
        return best, best_order
    memo: dict[int, int] = {}

    def rec(nb, alive, width, order):
        nonlocal best, best_order
        cnt = _popcount(alive)
        if cnt == 0 or cnt - 1 <= width:
            if width < best:
                best, best_order = width, order + _remaining(alive)
            return
        if memo.get(alive, best + 1) <= width:
            return
        memo[alive] = width
        lb = max(width, _minor_min_width(nb, alive))
        if lb >= best:
            return
        # simplicial or almost simplicial vertices of small degree are safe
        x = alive
        while x:
            low = x & -x
            v = low.bit_length() - 1
            x ^= low
            dv = _popcount(nb[v])
            if _is_clique(nb, nb[v]) or (dv <= lb and any(_is_clique(nb, nb[v] & ~(1 << u))
                                                          for u in _bits(nb[v]))):
                rec(_eliminate(nb, v), alive & ~low, max(width, dv), order + [v])
                return
        cands = sorted(_bits(alive), key=lambda v: (_fill_in(nb, v), _popcount(nb[v]), v))
        for v in cands:
            w = max(width, _popcount(nb[v]))
            if w >= best:
                continue
            rec(_eliminate(nb, v), alive & ~(1 << v), w, order + [v])

    rec(list(nb0), full, 0, [])
    return best, best_order


def _bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def _remaining(alive: int) -> list[int]:
    return _bits(alive)


def decomposition_from_order(adj: np.ndarray, order: Sequence[int], exact: bool = True) -> TreeDecomposition:
    n = adj.shape[0]
    if n == 0:
        return TreeDecomposition([frozenset()], [], -1, exact)
    nb = _masks(adj)
    pos = {v: i for i, v in enumerate(order)}
    bags, higher = [], []
    for v in order:
        bags.append(frozenset([v] + _bits(nb[v])))
        higher.append(_bits(nb[v]))
        nb = _eliminate(nb, v)
    edges = []
    roots = []
    for i, v in enumerate(order):
        if higher[i]:
            parent = min(pos[u] for u in higher[i])
            edges.append((i, parent))
        else:
            roots.append(i)
    for a, b in zip(roots, roots[1:]):
        edges.append((a, b))
    width = max(len(b) for b in bags) - 1
    return TreeDecomposition(bags, edges, width, exact)


def treewidth(g, exact_limit: int = 15) -> tuple[int, TreeDecomposition]:
    """Treewidth of a simple graph (adjacency matrix or networkx graph)."""
    adj = _as_adjacency(g)
    n = adj.shape[0]
    if n == 0:
        return -1, TreeDecomposition([frozenset()], [], -1)
    nb = _masks(adj)
    if n <= exact_limit:
        w, order = _treewidth_bb(nb)
        dec = decomposition_from_order(adj, order, True)
    else:
        order, w = _min_fill_order(nb, (1 << n) - 1)
        dec = decomposition_from_order(adj, order, False)
    return dec.width, dec


def _as_adjacency(g) -> np.ndarray:
    if isinstance(g, np.ndarray):
        return g.astype(bool)
    if isinstance(g, ColoredDigraph):
        from .core import simple_adjacency
        return simple_adjacency(g)
    import networkx as nx
    if isinstance(g, nx.Graph):
        return nx.to_numpy_array(g, nodelist=sorted(g.nodes)).astype(bool)
    return np.asarray(g, dtype=bool)


def _dp_python(nb: list[int], n: int) -> int:
    best = [0] * (1 << n)
    best[0] = -1
    for s in range(1, 1 << n):
        val = n
        for v in _bits(s):
            rest = s & ~(1 << v)
            val = min(val, max(best[rest], _q_set(nb, rest, v)))
        best[s] = val
    return best[(1 << n) - 1]


def _q_set(nb: list[int], s: int, v: int) -> int:
    """|{w outside s+v reachable from v through s}|."""
    seen = 1 << v
    frontier = 1 << v
    reach = 0
    while frontier:
        nxt = 0
        for u in _bits(frontier):
            nxt |= nb[u]
        nxt &= ~seen
        seen |= nxt
        reach |= nxt & ~s
        frontier = nxt & s
    return _popcount(reach)


try:
    import numba

    @numba.njit(cache=True)
    def _dp_compiled(nb, n):
        best = np.empty(1 << n, dtype=np.int64)
        best[0] = -1
        for s in range(1, 1 << n):
            val = n
            for v in range(n):
                if not (s >> v) & 1:
                    continue
                rest = s & ~(1 << v)
                seen = 1 << v
                frontier = 1 << v
                reach = 0
                while frontier:
                    nxt = 0
                    for u in range(n):
                        if (frontier >> u) & 1:
                            nxt |= nb[u]
                    nxt &= ~seen
                    seen |= nxt
                    reach |= nxt & ~rest
                    frontier = nxt & rest
                q = 0
                while reach:
                    reach &= reach - 1
                    q += 1
                cand = best[rest] if best[rest] > q else q
                if cand < val:
                    val = cand
            best[s] = val
        return best[(1 << n) - 1]
except ImportError:          # pragma: no cover
    _dp_compiled = None


def treewidth_subset_dp(g) -> int:
    """Reference treewidth: the minimum over elimination orders, by dynamic
    programming over the set of already eliminated vertices."""
    adj = _as_adjacency(g)
    n = adj.shape[0]
    if n == 0:
        return -1
    nb = _masks(adj)
    if n > 20:
        raise ResourceError("subset dynamic programme limited to 20 vertices")
    if _dp_compiled is not None:
        return int(_dp_compiled(np.array(nb, dtype=np.int64), n))
    return _dp_python(nb, n)


def treewidth_of_masks(nb: Sequence[int]) -> int:
    """Exact solver on a tuple of neighbourhood bitmasks."""
    if not nb:
        return -1
    return _treewidth_bb(list(nb))[0]


def masks_to_adjacency(nb: Sequence[int]) -> np.ndarray:
    n = len(nb)
    a = np.zeros((n, n), dtype=bool)
    for v in range(n):
        a[v, _bits(nb[v])] = True
    return a


@dataclass(frozen=True)
class TwBound:
    t: int
    treewidth: int
    stated: int                   # t * tw(Q)
    sound: int                    # t * (tw(Q) + 1) - 1
    exact: bool
    decomposition: TreeDecomposition


def tw_dimension_bound(c: CoherentConfiguration) -> TwBound:
    q = quotient_graph(c)
    t = max(q.sizes, default=0)
    if q.num_fibers == 0:
        return TwBound(0, -1, 0, 0, True, TreeDecomposition([frozenset()], [], -1))
    w, dec = treewidth(q.adjacency())
    w = max(w, 0)
    return TwBound(t, w, t * w, t * (w + 1) - 1, dec.exact, dec)


# local reductions --------------------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    rule_id: str
    claimed: Fraction             # claimed change of tau (negative)
    move: str                     # "l", "s", "l-or-s" or "r"
    pattern: Optional[str] = None


RULES: dict[str, Rule] = {r.rule_id: r for r in [
    Rule("L-S/(K33,2)", Fraction(-11, 10), "l-or-s", "(K33,2)"),
    Rule("L-S/(3K2,2;3K2,2)", Fraction(-11, 10), "s", "(3K2,2;3K2,2)"),
    Rule("L-S/(C6,2;3K2,2)", Fraction(-13, 10), "l", "(C6,2;3K2,2)"),
    Rule("L-S/(3K2,2,2)", Fraction(-11, 10), "l", "(3K2,2,2)"),
    Rule("L-S/(K222,2,2)", Fraction(-13, 10), "l", "(K222,2,2)"),
    Rule("L-S/(K222,3†)", Fraction(-1), "l", "(K222,3†)"),
    Rule("L-S/(K33,2,2)", Fraction(-5, 4), "l", "(K33,2,2)"),
    Rule("3-large-neighbors", Fraction(-1), "r"),
    Rule("S-L-S/(K222,3‡)", Fraction(-11, 10), "l", "(K222,3‡)"),
]}

_SLS_PARTNERS = {"(K222,3‡)", "(C4,2)", "(3K2,2)", "(2K2,2)", "(2K3,3)"}


@dataclass
class LocalReduction:
    rule: Rule
    config: CoherentConfiguration
    delta: Fraction
    individualized: tuple
    site: tuple
    hypotheses: dict              # hypothesis -> verified?

    @property
    def within_claim(self) -> bool:
        return self.delta <= self.rule.claimed


@dataclass(frozen=True)
class RuleMiss:
    rule_id: str
    reason: str


def _ls_sites(c: CoherentConfiguration, pattern: str) -> list[tuple[int, int]]:
    from .patterns import classify_pattern
    q = quotient_graph(c)
    out = []
    for e in sorted(tuple(sorted(e)) for e in q.edges):
        for l, s in (e, e[::-1]):
            if size_class(len(c.fibers[l])) == LARGE and len(c.fibers[s]) in (4, 6):
                try:
                    p = classify_pattern(c, l, s)
                except (IntegrityError, UnsupportedError):
                    continue
                if p.name == pattern:
                    out.append((l, s))
    return out


def apply_local_reduction(c: CoherentConfiguration, rule_id: str, site: Optional[tuple] = None,
                          reduce: bool = True) -> Union[LocalReduction, RuleMiss]:
    """Individualize the rule's vertex, re-close, optionally reduce, and
    measure the change of tau."""
    from .critical import is_dominating, reduce_to_core
    if rule_id not in RULES:
        raise KeyError(f"unknown rule {rule_id!r}")
    rule = RULES[rule_id]
    q = quotient_graph(c)
    hyp: dict = {"critical": "unverified (reduced-core only)"}
    if rule_id == "3-large-neighbors":
        sites = []
        for r in range(q.num_fibers):
            large_nb = [b for b in q.neighbours(r) if q.classes[b] == LARGE]
            if len(large_nb) >= 3 and (q.classes[r] == LARGE or ul_size(c, r) >= 3):
                sites.append((r,))
        if site is not None:
            sites = [s for s in sites if s == tuple(site)]
        if not sites:
            return RuleMiss(rule_id, "no fiber with three large neighbours")
        site = sites[0]
        v = c.fibers[site[0]][0]
    elif rule_id.startswith("S-L-S"):
        cands = []
        for l, s in _ls_sites(c, rule.pattern):
            for s2 in q.neighbours(l):
                if s2 == s or len(c.fibers[s2]) not in (4, 6):
                    continue
                from .patterns import classify_pattern
                try:
                    p2 = classify_pattern(c, l, s2).name
                except (IntegrityError, UnsupportedError):
                    continue
                if p2 in _SLS_PARTNERS:
                    cands.append((s, l, s2))
        if site is not None:
            cands = [x for x in cands if x == tuple(site)]
        if not cands:
            return RuleMiss(rule_id, "no path (S, L, S') with the required patterns")
        site = cands[0]
        v = c.fibers[site[1]][0]
    else:
        cands = _ls_sites(c, rule.pattern)
        if site is not None:
            cands = [x for x in cands if x == tuple(site)]
        if not cands:
            return RuleMiss(rule_id, f"no interspace with pattern {rule.pattern}")
        nd = [x for x in cands if not is_dominating(c, [x[1]])]
        hyp["{S} non-dominating"] = bool(nd)
        if not nd:
            return RuleMiss(rule_id, "the small fiber is dominating")
        site = nd[0]
        l, s = site
        move = rule.move
        if move == "l-or-s":
            move = "s" if len(c.fibers[l]) <= 18 else "l"
        v = c.fibers[l][0] if move == "l" else c.fibers[s][0]
    after = individualize(c, [v])
    if reduce:
        after, _ = reduce_to_core(after, restorable=False)
    delta = potential(after) - potential(c)
    return LocalReduction(rule, after, delta, (v,), tuple(site), hyp)


# t-reduced ---------------------------------------------------------------------------

@dataclass
class TReducedReport:
    properties: dict              # number -> (passed, detail)

    @property
    def ok(self) -> bool:
        return all(p for p, _ in self.properties.values())


def relevant_fibers(c: CoherentConfiguration) -> list[int]:
    return [f for f, rel in enumerate(quotient_graph(c).relevant) if rel]


def is_t_reduced(c: CoherentConfiguration, t: int) -> TReducedReport:
    from .critical import detect_star, detect_tiny, is_dominating
    q = quotient_graph(c)
    rel = set(relevant_fibers(c))
    large = set(q.of_class(LARGE))
    small = set(q.of_class(SMALL))
    props: dict = {}
    fixpoint = not detect_tiny(c) and not detect_star(c)
    props[1] = (fixpoint, "reduced-core fixpoint (criticality itself not decided)")
    big = [f for f in range(q.num_fibers) if len(c.fibers[f]) > t]
    props[2] = (not big, big)
    bad3 = [f for f in large if len(set(q.neighbours(f)) & large) > 2]
    props[3] = (not bad3, sorted(bad3))
    bad4 = [f for f in large if len(set(q.neighbours(f)) & rel) > 1]
    props[4] = (not bad4, sorted(bad4))
    bad5 = [s for s in rel if set(q.neighbours(s)) & large
            and (q.degree(s) > 2 or ul_size(c, s) != 3)]
    props[5] = (not bad5, sorted(bad5))
    bad6 = []
    for s in rel:
        if len(set(q.neighbours(s)) & small) >= 3:
            for v in c.fibers[s]:
                cv = individualize(c, [v])
                if any(len([x for x in f if x in c.fibers[s]]) > 1 for f in cv.fibers):
                    bad6.append(s)
                    break
    props[6] = (not bad6, sorted(bad6))
    bad7 = [s for s in rel if is_dominating(c, [s])]
    props[7] = (not bad7, sorted(bad7))
    return TReducedReport(props)


# CFI graphs ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CFIInstance:
    base: np.ndarray
    twist: frozenset
    graph: ColoredDigraph
    gadgets: tuple                # per base vertex, list of (vertex id, even subset)

    @property
    def parity(self) -> int:
        return len(self.twist) % 2


def cfi(base, twist: Sequence[tuple[int, int]] = (), colored: bool = True) -> CFIInstance:
    """Even-subset CFI graph; gadget vertices are colored by their base vertex."""
    adj = _as_adjacency(base)
    n = adj.shape[0]
    deg = adj.sum(axis=1)
    if n == 0 or (deg < 2).any():
        raise UnsupportedError("CFI base must have minimum degree 2")
    import networkx as nx
    if not nx.is_connected(nx.from_numpy_array(adj.astype(int))):
        raise UnsupportedError("CFI base must be connected")
    tw = set()
    for u, v in twist:
        if not adj[u, v]:
            raise ValueError(f"twist edge {(u, v)} is not a base edge")
        tw ^= {frozenset((u, v))}
    gadgets = []
    vid = 0
    members = []
    for v in range(n):
        inc = [frozenset((v, int(w))) for w in np.flatnonzero(adj[v])]
        g = []
        for k in range(0, len(inc) + 1, 2):
            for sub in combinations(inc, k):
                g.append((vid, frozenset(sub)))
                members.append(v)
                vid += 1
        gadgets.append(tuple(g))
    m = vid
    out = np.zeros((m, m), dtype=bool)
    for u, v in zip(*np.nonzero(np.triu(adj, 1))):
        e = frozenset((int(u), int(v)))
        flip = e in tw
        for a, sa in gadgets[u]:
            for b, sb in gadgets[v]:
                if ((e in sa) == (e in sb)) != flip:
                    out[a, b] = out[b, a] = True
    graph = from_adjacency(out, members if colored else None)
    return CFIInstance(adj, frozenset(tw), graph, tuple(gadgets))


def brute_force_isomorphic(adj1: np.ndarray, col1: Sequence[int], adj2: np.ndarray,
                           col2: Sequence[int], node_budget: int = 5_000_000) -> bool:
    """Color-preserving isomorphism by plain backtracking (no refinement)."""
    a, b = np.asarray(adj1, dtype=bool), np.asarray(adj2, dtype=bool)
    n = a.shape[0]
    if b.shape[0] != n or sorted(col1) != sorted(col2):
        return False
    if sorted(zip(col1, a.sum(1))) != sorted(zip(col2, b.sum(1))):
        return False
    # connected visiting order keeps the adjacency checks tight
    order, seen = [], set()
    for s in range(n):
        if s in seen:
            continue
        stack = [s]
        seen.add(s)
        while stack:
            v = stack.pop(0)
            order.append(v)
            for w in np.flatnonzero(a[v]):
                if int(w) not in seen:
                    seen.add(int(w))
                    stack.append(int(w))
    phi = [-1] * n
    used = [False] * n
    nodes = 0

    def rec(i):
        nonlocal nodes
        if i == n:
            return True
        v = order[i]
        for w in range(n):
            if used[w] or col2[w] != col1[v] or a[v].sum() != b[w].sum():
                continue
            nodes += 1
            if nodes > node_budget:
                raise ResourceError("isomorphism search exceeded its node budget")
            if all(a[v, order[j]] == b[w, phi[order[j]]] for j in range(i)):
                phi[v] = w
                used[w] = True
                if rec(i + 1):
                    return True
                used[w] = False
                phi[v] = -1
        return False

    return rec(0)


def cfi_isomorphic(x: CFIInstance, y: CFIInstance) -> bool:
    from .critical import graph_parts
    a1, c1 = graph_parts(x.graph)
    a2, c2 = graph_parts(y.graph)
    return brute_force_isomorphic(a1, c1, a2, c2)


@dataclass(frozen=True)
class CFICheck:
    k: int
    distinguished: bool
    treewidth: int
    exact_tw: bool

    @property
    def consistent(self) -> bool:
        return not (self.exact_tw and self.k < self.treewidth and self.distinguished)


def cfi_lower_bound_check(base, k: int, edge: Optional[tuple[int, int]] = None) -> CFICheck:
    adj = _as_adjacency(base)
    if edge is None:
        u, v = map(int, np.argwhere(np.triu(adj, 1))[0])
        edge = (u, v)
    g = cfi(adj).graph
    h = cfi(adj, [edge]).graph
    if g.n ** k > 2_000_000:
        raise ResourceError(f"{k}-WL on {g.n} vertices exceeds the tuple budget")
    d = distinguishes(g, h, k)
    w, dec = treewidth(adj)
    rep = CFICheck(k, d, w, dec.exact)
    if not rep.consistent:
        raise IntegrityError("CFI pair distinguished below the base treewidth", rep)
    return rep


# upper-bound certificates ---------------------------------------------------------------

@dataclass
class CertificateLink:
    individualized: tuple
    lemma: str
    fibers: tuple                 # fiber sizes of the resulting configuration


@dataclass
class BoundCertificate:
    links: list
    terminal: str
    terminal_bound: int
    total: int
    conditional: str = "conditional on the individualization and treewidth lemmas"

    def check(self) -> bool:
        spent = sum(len(x.individualized) for x in self.links)
        return self.total == spent + max(2, self.terminal_bound)

    def to_json(self) -> dict:
        return {"links": [{"individualized": list(x.individualized), "lemma": x.lemma,
                           "fibers": list(x.fibers)} for x in self.links],
                "terminal": self.terminal, "terminal_bound": self.terminal_bound,
                "total": self.total, "conditional": self.conditional}


def _component_bound(c: CoherentConfiguration) -> int:
    """Largest sound treewidth bound over the quotient components."""
    from .algebra import sub_configuration
    q = quotient_graph(c)
    best = 0
    for comp in q.components():
        sub, _ = sub_configuration(c, comp)
        best = max(best, tw_dimension_bound(sub).sound)
    return best


def upper_bound_certificate(g: Union[ColoredDigraph, CoherentConfiguration],
                            max_links: int = 8) -> BoundCertificate:
    """Chain individualizations while they lower the bound; terminate with
    exact_wldim (graphs on <= 7 vertices) or the treewidth bound."""
    from .critical import UNIVERSE_LIMIT, exact_wldim, graph_parts
    is_graph = isinstance(g, ColoredDigraph)
    if is_graph:
        try:
            graph_parts(g)
        except UnsupportedError:
            is_graph = False
    if is_graph and g.n <= UNIVERSE_LIMIT:
        k = exact_wldim(g)
        return BoundCertificate([], "exact_wldim", k, max(2, k))
    c = coherent_closure(g)
    links: list[CertificateLink] = []
    bound = _component_bound(c)
    total = max(2, bound)
    spent = 0
    while len(links) < max_links and c.n:
        best = None
        for f in c.fibers:
            if len(f) == 1:
                continue
            v = f[0]
            cv = individualize(c, [v])
            b = _component_bound(cv)
            if best is None or b < best[0]:
                best = (b, v, cv)
        if best is None or spent + 1 + max(2, best[0]) >= total:
            break
        b, v, cv = best
        spent += 1
        links.append(CertificateLink((v,), "individualization (+1)", tuple(len(f) for f in cv.fibers)))
        c = cv
        bound = b
        total = spent + max(2, bound)
    return BoundCertificate(links, "treewidth bound t*(tw+1)-1", bound, total)

"""Colored complete digraphs: the universal input object.

A ``ColoredDigraph`` stores one color id per ordered pair of vertices in a
dense ``n x n`` matrix.  Diagonal entries are vertex colors, off-diagonal
entries are arc colors.  Plain graphs are encoded with one color for loops,
one for arcs and one for non-arcs, so graphs and configurations share a type.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

from .errors import ConflictError, ParseError, RangeError


def _compact(mat: np.ndarray) -> np.ndarray:
    """Renumber the ids of ``mat`` to 0..r-1 keeping their relative order."""
    _, inv = np.unique(mat, return_inverse=True)
    return inv.reshape(mat.shape).astype(np.int64)


def _split_loop_colors(mat: np.ndarray) -> np.ndarray:
    """Give loop entries and arc entries disjoint color ids."""
    n = mat.shape[0]
    if n == 0:
        return mat.astype(np.int64)
    key = mat.astype(np.int64) * 2
    key[np.arange(n), np.arange(n)] += 1
    return _compact(key)


@dataclass(frozen=True, eq=False)
class ColoredDigraph:
    """Complete arc-colored digraph with vertex colors on the diagonal.

    The constructor compacts the color ids and splits any id that occurs both
    on a loop and on a proper arc, so every instance separates loops from arcs.
    """

    arc_color: np.ndarray
    color_names: Optional[tuple] = None
    _rank: int = field(init=False, repr=False, default=0)

    def __post_init__(self):
        mat = np.asarray(self.arc_color)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("arc_color must be a square matrix")
        before = len(np.unique(mat)) if mat.size else 0
        mat = _split_loop_colors(mat)
        mat.setflags(write=False)
        names = self.color_names
        if names is not None:
            names = tuple(names)
            if mat.size and (int(mat.max()) + 1 != before or len(names) != before):
                names = None
            object.__setattr__(self, "color_names", names)
        object.__setattr__(self, "arc_color", mat)
        object.__setattr__(self, "_rank", int(mat.max()) + 1 if mat.size else 0)

    @property
    def n(self) -> int:
        return self.arc_color.shape[0]

    @property
    def rank(self) -> int:
        """Number of distinct colors."""
        return self._rank

    def color(self, u: int, v: int) -> int:
        return int(self.arc_color[u, v])

    def vertex_colors(self) -> np.ndarray:
        return np.diagonal(self.arc_color).copy()

    def loop_colors(self) -> list[int]:
        return sorted(set(np.diagonal(self.arc_color).tolist()))

    def color_classes(self) -> dict[int, np.ndarray]:
        """Map color id to an array of (u, v) pairs, row-major order."""
        flat = self.arc_color.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(self.rank + 1))
        out = {}
        n = self.n
        for c in range(self.rank):
            idx = order[bounds[c]:bounds[c + 1]]
            out[c] = np.stack([idx // n, idx % n], axis=1)
        return out

    def induced(self, vertices: Sequence[int]) -> "ColoredDigraph":
        vs = np.asarray(list(vertices), dtype=np.int64)
        return ColoredDigraph(self.arc_color[np.ix_(vs, vs)])

    def permuted(self, perm: Sequence[int]) -> "ColoredDigraph":
        """Relabel vertex ``v`` as ``perm[v]``."""
        p = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(p)
        inv[p] = np.arange(len(p))
        return ColoredDigraph(self.arc_color[np.ix_(inv, inv)])

    def same_partition(self, other: "ColoredDigraph") -> bool:
        """True if both color matrices induce the same partition of pairs."""
        if self.n != other.n:
            return False
        return np.array_equal(canonical_colors(self).arc_color,
                              canonical_colors(other).arc_color)

    def __eq__(self, other):
        if not isinstance(other, ColoredDigraph):
            return NotImplemented
        return np.array_equal(self.arc_color, other.arc_color)

    def __hash__(self):
        return hash((self.n, self.arc_color.tobytes()))

    def __repr__(self):
        return f"ColoredDigraph(n={self.n}, rank={self.rank})"


# construction helpers -------------------------------------------------------

def from_adjacency(adj, vertex_colors: Optional[Sequence[int]] = None,
                   arc_colors=None) -> ColoredDigraph:
    """Encode a (di)graph: loops get ``(0, vcolor)``, arcs ``(1, color)``,
    non-arcs ``(2, 0)``.

    ``adj`` is a boolean matrix.  ``arc_colors`` optionally gives a color per
    arc (same shape as ``adj``).
    """
    a = np.asarray(adj, dtype=bool)
    n = a.shape[0]
    vc = np.zeros(n, dtype=np.int64) if vertex_colors is None else np.asarray(vertex_colors, dtype=np.int64)
    ac = np.zeros((n, n), dtype=np.int64) if arc_colors is None else np.asarray(arc_colors, dtype=np.int64)
    big = int(max(vc.max(initial=0), ac.max(initial=0))) + 1
    key = np.full((n, n), 2 * big, dtype=np.int64)
    key[a] = big + ac[a]
    key[np.arange(n), np.arange(n)] = vc
    symmetric = arc_colors is None and np.array_equal(a, a.T)
    names = []
    for k in np.unique(key).tolist():
        if k < big:
            names.append("v%d" % k)
        elif k == 2 * big:
            names.append("nonarc")
        else:
            names.append("edge" if symmetric else "arc%d" % (k - big))
    return ColoredDigraph(key, tuple(names))


def from_edges(n: int, edges: Iterable[tuple[int, int]],
               vertex_colors: Optional[Sequence[int]] = None) -> ColoredDigraph:
    """Undirected simple graph from an edge list."""
    adj = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        if u == v:
            raise ValueError("self-loop in simple graph")
        adj[u, v] = adj[v, u] = True
    return from_adjacency(adj, vertex_colors)


def adjacency(g: ColoredDigraph, arc_color: int) -> np.ndarray:
    return g.arc_color == arc_color


# canonical renaming ---------------------------------------------------------

def canonical_colors(g: ColoredDigraph) -> ColoredDigraph:
    """Renumber colors: loop classes first, then by class size, then by the
    lexicographically smallest member pair."""
    mat = g.arc_color
    n = g.n
    if n == 0:
        return g
    r = g.rank
    flat = mat.ravel()
    sizes = np.bincount(flat, minlength=r)
    first = np.full(r, n * n, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(n * n))
    is_loop = np.zeros(r, dtype=bool)
    is_loop[np.diagonal(mat)] = True
    order = np.lexsort((first, sizes, ~is_loop))
    rename = np.empty(r, dtype=np.int64)
    rename[order] = np.arange(r)
    names = None
    if g.color_names is not None:
        names = tuple(g.color_names[c] for c in order)
    return ColoredDigraph(rename[mat], names)


# validation -----------------------------------------------------------------

@dataclass
class PartitionReport:
    cc1: bool
    cc2: bool
    cc1_violations: list[int]
    cc2_violations: list[int]
    transpose: dict[int, int]

    @property
    def ok(self) -> bool:
        return self.cc1 and self.cc2


def validate_partition(g: Union[ColoredDigraph, np.ndarray]) -> PartitionReport:
    """Check the loop/arc separation and closure under transposition.

    Accepts a raw matrix as well, since ``ColoredDigraph`` already enforces
    the first condition on construction.
    """
    mat = g.arc_color if isinstance(g, ColoredDigraph) else np.asarray(g, dtype=np.int64)
    n = mat.shape[0]
    diag = set(np.diagonal(mat).tolist())
    off = mat[~np.eye(n, dtype=bool)]
    cc1_bad = sorted(diag & set(off.tolist()))
    transpose: dict[int, int] = {}
    cc2_bad = []
    for c in np.unique(mat).tolist():
        images = np.unique(mat.T[mat == c])
        if len(images) != 1:
            cc2_bad.append(c)
            continue
        d = int(images[0])
        if np.count_nonzero(mat == d) != np.count_nonzero(mat == c):
            cc2_bad.append(c)
            continue
        transpose[c] = d
    return PartitionReport(not cc1_bad, not cc2_bad, cc1_bad, sorted(cc2_bad), transpose)


# text format ----------------------------------------------------------------

def parse_graph(text: Union[str, TextIO]) -> ColoredDigraph:
    """Read the line format: ``n``, ``vcolor``, ``arc``, ``edge``, ``#`` comments."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    n = None
    vcol: dict[int, int] = {}
    arcs: dict[tuple[int, int], tuple] = {}

    def vertex(tok: str, lineno: int) -> int:
        try:
            v = int(tok)
        except ValueError:
            raise ParseError(f"line {lineno}: bad vertex '{tok}'", lineno)
        if v < 0 or v >= n:
            raise RangeError(f"line {lineno}: vertex {v} out of range for n={n}", lineno)
        return v

    def put(u, v, key, lineno):
        old = arcs.get((u, v))
        if old is not None and old != key:
            raise ConflictError(f"line {lineno}: arc {u} {v} declared with conflicting colors", lineno)
        arcs[(u, v)] = key

    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        if n is None:
            if head != "n" or len(tok) != 2:
                raise ParseError(f"line {lineno}: expected 'n <int>' first", lineno)
            try:
                n = int(tok[1])
            except ValueError:
                raise ParseError(f"line {lineno}: bad vertex count", lineno)
            if n < 0:
                raise ParseError(f"line {lineno}: negative vertex count", lineno)
            continue
        try:
            if head == "vcolor" and len(tok) == 3:
                v, c = vertex(tok[1], lineno), int(tok[2])
                if v in vcol and vcol[v] != c:
                    raise ConflictError(f"line {lineno}: vertex {v} recolored", lineno)
                vcol[v] = c
            elif head == "arc" and len(tok) == 4:
                u, v, c = vertex(tok[1], lineno), vertex(tok[2], lineno), int(tok[3])
                if u == v:
                    raise ParseError(f"line {lineno}: arc must join distinct vertices", lineno)
                put(u, v, (1, c), lineno)
            elif head == "edge" and len(tok) == 3:
                u, v = vertex(tok[1], lineno), vertex(tok[2], lineno)
                if u == v:
                    raise ParseError(f"line {lineno}: edge must join distinct vertices", lineno)
                put(u, v, (2, 0), lineno)
                put(v, u, (2, 0), lineno)
            else:
                raise ParseError(f"line {lineno}: malformed '{line}'", lineno)
        except ValueError as exc:
            if isinstance(exc, (ParseError, RangeError, ConflictError)):
                raise
            raise ParseError(f"line {lineno}: malformed '{line}'", lineno)
    if n is None:
        raise ParseError("missing 'n <int>' line", 0)

    # keys: loops (0, c); explicit arcs (1, c); edges (2, 0); non-arcs (3, 0)
    keys: dict[tuple, int] = {}
    mat = np.empty((n, n), dtype=np.int64)
    for u in range(n):
        for v in range(n):
            if u == v:
                key = (0, vcol.get(u, 0))
            else:
                key = arcs.get((u, v), (3, 0))
            mat[u, v] = keys.setdefault(key, len(keys))
    names = tuple(_key_name(k) for k in keys)
    return canonical_colors(ColoredDigraph(mat, names))


def _key_name(key: tuple) -> str:
    kind, c = key
    return ("v%d" % c, "arc%d" % c, "edge", "nonarc")[kind]


def read_graph(path) -> ColoredDigraph:
    with open(path) as fh:
        return parse_graph(fh)


def read_edge_list(text: Union[str, TextIO]) -> ColoredDigraph:
    """Undirected edge list: one ``u v`` pair per line; ``n`` inferred."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    edges = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 2:
            raise ParseError(f"line {lineno}: expected 'u v'", lineno)
        try:
            edges.append((int(tok[0]), int(tok[1])))
        except ValueError:
            raise ParseError(f"line {lineno}: bad vertex", lineno)
    n = 1 + max((max(e) for e in edges), default=-1)
    return canonical_colors(from_edges(n, edges))


def serialize(g: ColoredDigraph, header: Optional[Sequence[str]] = None) -> str:
    """Emit the canonical text form; every ordered pair is written explicitly."""
    g = canonical_colors(g)
    out = []
    for line in header or ():
        out.append(f"# {line}")
    out.append(f"n {g.n}")
    mat = g.arc_color
    for v in range(g.n):
        out.append(f"vcolor {v} {mat[v, v]}")
    for u in range(g.n):
        for v in range(g.n):
            if u != v:
                out.append(f"arc {u} {v} {mat[u, v]}")
    return "\n".join(out) + "\n"


def is_simple_graph(g: ColoredDigraph) -> bool:
    """True if ``g`` has at most two symmetric arc colors and one loop color."""
    loops = set(np.diagonal(g.arc_color).tolist())
    if len(loops) > 1 or g.rank - len(loops) > 2:
        return False
    return np.array_equal(g.arc_color, g.arc_color.T)


def simple_adjacency(g: ColoredDigraph, edge_color: Optional[int] = None) -> np.ndarray:
    """Boolean adjacency of ``g`` for the given edge color.

    Without ``edge_color`` the color named ``edge`` is used (as produced by
    the parsers and ``from_adjacency``); a graph without that name has no
    edges.
    """
    n = g.n
    off = ~np.eye(n, dtype=bool)
    if edge_color is None:
        names = g.color_names or ()
        if "edge" not in names:
            return np.zeros((n, n), dtype=bool)
        edge_color = names.index("edge")
    return (g.arc_color == edge_color) & off

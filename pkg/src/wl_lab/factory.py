"""Small configurations realizing each interspace pattern.

An instance is a small fiber S with a fixed homogeneous configuration and a
large fiber L whose vertices are the images of a template tuple of subsets of
S under a transitive group of automorphisms of c[S], each repeated
``multiplicity`` times.  The coherent closure does the rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Optional, Sequence

import numpy as np

from .core import ColoredDigraph
from .errors import IntegrityError
from .refinement import CoherentConfiguration, coherent_closure


def _cyclic(n: int, sym: bool) -> np.ndarray:
    d = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return np.minimum(d, n - d) if sym else d


def _s3_thin() -> np.ndarray:
    elems = list(permutations(range(3)))
    inv = {g: tuple(np.argsort(g)) for g in elems}
    comp = lambda g, h: tuple(g[h[i]] for i in range(3))
    index = {g: i for i, g in enumerate(elems)}
    return np.array([[index[comp(inv[g], h)] for h in elems] for g in elems])


SMALL_TYPES: dict[str, np.ndarray] = {
    "(K4)": 1 - np.eye(4, dtype=int),
    "(2K2,2K2,2K2)": np.bitwise_xor.outer(np.arange(4), np.arange(4)),
    "(C4,2K2)": _cyclic(4, True),
    "(C4->,2K2)": _cyclic(4, False),
    "(K6)": 1 - np.eye(6, dtype=int),
    "(3K2,K222)": np.where(np.eye(6, dtype=bool), 0,
                           np.where(np.arange(6)[:, None] // 2 == np.arange(6)[None, :] // 2, 1, 2)),
    "(C6,2K3,3K2)": _cyclic(6, True),
    "(C6->,2C3->,3K2)": _cyclic(6, False),
    "(3K2,C3->[K2])": np.array([[0 if v == w else 1 if v // 2 == w // 2
                                 else 2 if (w // 2 - v // 2) % 3 == 1 else 3
                                 for w in range(6)] for v in range(6)]),
    "(2K3,K33)": np.where(np.eye(6, dtype=bool), 0,
                          np.where(np.arange(6)[:, None] // 3 == np.arange(6)[None, :] // 3, 1, 2)),
    "(2C3->,K33)": np.array([[0 if v == w else (w - v) % 3 if v // 3 == w // 3 else 3
                              for w in range(6)] for v in range(6)]),
    "S3-thin": _s3_thin(),
}


def automorphisms_small(mat: np.ndarray) -> list[tuple[int, ...]]:
    n = mat.shape[0]
    out = []
    for p in permutations(range(n)):
        q = np.array(p)
        # v -> p[v] preserves colors iff M[q][:, q] == M
        if np.array_equal(mat[np.ix_(q, q)], mat):
            out.append(p)
    return out


def generated_group(gens: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    n = len(gens[0])
    ident = tuple(range(n))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for g in frontier:
            for h in gens:
                gh = tuple(h[g[i]] for i in range(n))
                if gh not in seen:
                    seen.add(gh)
                    nxt.append(gh)
        frontier = nxt
    return sorted(seen)


def _psl25() -> list[tuple[int, ...]]:
    """PSL(2,5) on the projective line {0..4, inf=5}; 2-transitive on 6 points."""
    inf = 5

    def mobius(f):
        return tuple(f(x) for x in range(6))

    def inv(x):
        return inf if x == 0 else 0 if x == inf else pow(x, 3, 5)

    shift = mobius(lambda x: inf if x == inf else (x + 1) % 5)
    scale = mobius(lambda x: inf if x == inf else (4 * x) % 5)
    neg_inv = mobius(lambda x: inv(x) if x in (0, inf) else (-inv(x)) % 5)
    return generated_group([shift, scale, neg_inv])


def _even_flips(mat: np.ndarray) -> list[tuple[int, ...]]:
    """Automorphisms of a 3K2-based scheme flipping an even number of pairs."""
    out = []
    for p in automorphisms_small(mat):
        flips = sum(1 for v in (0, 2, 4) if p[v] % 2 == 1)
        if flips % 2 == 0:
            out.append(p)
    return out


def _k6_ddagger_group(mat):
    return _psl25()


# pattern -> list of (small type, template tuple, group selector or None)
_TEMPLATES: dict[str, list] = {
    "(K4,2)": [("(K4)", [{0, 1}], None)],
    "(2K2,2)": [("(2K2,2K2,2K2)", [{0, 1}], None), ("(C4,2K2)", [{0, 2}], None),
                ("(C4->,2K2)", [{0, 2}], None)],
    "(C4,2)": [("(C4,2K2)", [{0, 1}], None)],
    "(K6,2)": [("(K6)", [{0, 1}], None)],
    "(K6,2,2)": [("(K6)", [{0, 1}, {2, 3}], None)],
    "(3K2,2)": [("(3K2,K222)", [{0, 1}], None), ("(C6,2K3,3K2)", [{0, 3}], None)],
    "(3K2,2,2)": [("(3K2,K222)", [{0, 1}, {2, 3}], None), ("(C6,2K3,3K2)", [{0, 3}, {1, 4}], None),
                  ("(3K2,C3->[K2])", [{0, 1}, {2, 3}], None),
                  ("(C6->,2C3->,3K2)", [{0, 3}, {1, 4}], None)],
    "(C6,2;3K2,2)": [("(C6,2K3,3K2)", [{0, 1}, {2, 5}], None)],
    "(3K2,2;3K2,2)": [("S3-thin", [{0, 1}, {2, 4}], None)],
    "(K222,2,2)": [("(3K2,K222)", [{0, 2}, {1, 3}], None)],
    "(K33,2)": [("(2K3,K33)", [{0, 3}], None)],
    "(K33,2,2)": [("(2K3,K33)", [{0, 3}, {1, 4}], None)],
    "(K6,3†)": [("(K6)", [{0, 1, 2}], None)],
    "(K6,3‡)": [("(K6)", [{0, 1, 2}], _k6_ddagger_group)],
    "(2K3,3)": [("(2K3,K33)", [{0, 1, 2}], None), ("(2C3->,K33)", [{0, 1, 2}], None),
                ("(C6,2K3,3K2)", [{0, 2, 4}], None), ("(C6->,2C3->,3K2)", [{0, 2, 4}], None),
                ("S3-thin", [{0, 3, 4}], None)],
    "(K222,3†)": [("(3K2,K222)", [{0, 2, 4}], None), ("(3K2,C3->[K2])", [{0, 2, 4}], None)],
    "(K222,3‡)": [("(3K2,K222)", [{0, 2, 4}], _even_flips), ("(3K2,C3->[K2])", [{0, 2, 4}], _even_flips)],
}


def pattern_names() -> list[str]:
    return list(_TEMPLATES)


def small_types_for(pattern: str) -> list[str]:
    return [t for t, _, _ in _TEMPLATES[pattern]]


@dataclass(frozen=True)
class PatternInstance:
    pattern: str
    small_type: str
    config: CoherentConfiguration
    large: int
    small: int
    parts: tuple                  # realized template tuples


def _orbit(tpl, group):
    out = set()
    for p in group:
        out.add(tuple(frozenset(p[x] for x in u) for u in tpl))
    return sorted(out, key=lambda t: [sorted(u) for u in t])


def build_instance(small: np.ndarray, tuples: Sequence[Sequence[frozenset]],
                   multiplicity: int = 1) -> tuple[CoherentConfiguration, int, int]:
    """Closure of S plus one L vertex per tuple copy; L -> S colors are the
    tuple index, the leftover set gets its own color."""
    k = small.shape[0]
    rows = [t for t in tuples for _ in range(multiplicity)]
    m = len(rows)
    n = k + m
    base = int(small.max()) + 1
    mat = np.empty((n, n), dtype=np.int64)
    mat[:k, :k] = small
    mat[k:, k:] = base + 1
    np.fill_diagonal(mat[k:, k:], base)
    t = len(rows[0])
    for i, tup in enumerate(rows):
        for s in range(k):
            j = next((j for j, u in enumerate(tup) if s in u), t)
            mat[k + i, s] = base + 2 + j
            mat[s, k + i] = base + 3 + t + j
    c = coherent_closure(ColoredDigraph(mat))
    return c, c.fiber_of[k], c.fiber_of[0]


def build_pattern_instance(pattern: str, multiplicity: int = 1,
                           small_type: Optional[str] = None) -> PatternInstance:
    """Coherent configuration whose interspace (L, S) realizes ``pattern``."""
    if pattern not in _TEMPLATES:
        raise KeyError(f"unknown pattern {pattern!r}")
    if multiplicity < 1:
        raise ValueError("multiplicity must be positive")
    options = _TEMPLATES[pattern]
    if small_type is None:
        small_type, tpl, sel = options[0]
    else:
        match = [o for o in options if o[0] == small_type]
        if not match:
            raise KeyError(f"{pattern} has no instance over {small_type}")
        _, tpl, sel = match[0]
    small = SMALL_TYPES[small_type]
    group = sel(small) if sel else automorphisms_small(small)
    parts = _orbit([frozenset(u) for u in tpl], group)
    c, l, s = build_instance(small, parts, multiplicity)
    if len(c.fibers[s]) != small.shape[0] or len(c.fibers[l]) != len(parts) * multiplicity:
        raise IntegrityError(f"closure split the fibers of the {pattern} instance")
    return PatternInstance(pattern, small_type, c, l, s, tuple(parts))


def with_copy_fiber(inst: PatternInstance, width: int = 4) -> PatternInstance:
    """Attach a fiber X adjacent to L only: for multiplicity m, X has m
    blocks of ``width`` vertices and the i-th copy of every L tuple sees
    block i.  Makes {S} non-dominating without touching I[L, S]."""
    c = inst.config
    lv, sv = c.fibers[inst.large], c.fibers[inst.small]
    blocks: dict = {}
    for v in lv:
        blocks.setdefault(tuple(c.matrix[v, list(sv)]), []).append(v)
    mult = {len(b) for b in blocks.values()}
    if mult != {max(mult)} or max(mult) < 2:
        raise ValueError("needs an instance built with multiplicity >= 2")
    m = max(mult)
    n = c.n
    big = n + m * width
    mat = np.zeros((big, big), dtype=np.int64)
    mat[:n, :n] = c.matrix
    base = int(c.matrix.max()) + 1
    mat[n:, n:] = base + 1
    np.fill_diagonal(mat[n:, n:], base)
    mat[n:, :n] = base + 2
    mat[:n, n:] = base + 3
    for b in blocks.values():
        for i, v in enumerate(b):
            mat[n + i * width:n + (i + 1) * width, v] = base + 4
            mat[v, n + i * width:n + (i + 1) * width] = base + 5
    d = coherent_closure(ColoredDigraph(mat))
    l, s = int(d.fiber_of[lv[0]]), int(d.fiber_of[sv[0]])
    if len(d.fibers) != 3 or len(d.fibers[l]) != len(lv) or len(d.fibers[s]) != len(sv):
        raise IntegrityError("closure split the fibers of the extended instance")
    return PatternInstance(inst.pattern, inst.small_type, d, l, s, inst.parts)


@dataclass(frozen=True)
class PathInstance:
    config: CoherentConfiguration
    large: int
    smalls: tuple                 # (S1, S2)
    patterns: tuple


def _template(pattern: str, small_type: Optional[str]):
    options = _TEMPLATES[pattern]
    if small_type is None:
        return options[0]
    match = [o for o in options if o[0] == small_type]
    if not match:
        raise KeyError(f"{pattern} has no instance over {small_type}")
    return match[0]


def build_path_instance(p1: str, p2: str, multiplicity: int = 1, small_types=(None, None),
                        diagonal: bool = False) -> PathInstance:
    """Two small fibers S1, S2 hanging off one fiber L.

    L is the product of the two tuple orbits (every pair once), or with
    ``diagonal`` the two orbits are walked in lockstep (same length needed).
    """
    for p in (p1, p2):
        if p not in _TEMPLATES:
            raise KeyError(f"unknown pattern {p!r}")
    blocks = []
    for p, st in zip((p1, p2), small_types):
        name, tpl, sel = _template(p, st)
        small = SMALL_TYPES[name]
        group = sel(small) if sel else automorphisms_small(small)
        blocks.append((small, _orbit([frozenset(u) for u in tpl], group)))
    (m1, o1), (m2, o2) = blocks
    if diagonal:
        if len(o1) != len(o2):
            raise ValueError("diagonal coupling needs orbits of equal length")
        rows = list(zip(o1, o2))
    else:
        rows = [(a, b) for a in o1 for b in o2]
    rows = [r for r in rows for _ in range(multiplicity)]
    k1, k2, m = m1.shape[0], m2.shape[0], len(rows)
    n = k1 + k2 + m
    mat = np.zeros((n, n), dtype=np.int64)
    mat[:k1, :k1] = m1
    off = int(m1.max()) + 1
    mat[k1:k1 + k2, k1:k1 + k2] = m2 + off
    off += int(m2.max()) + 1
    mat[k1:k1 + k2, :k1] = off
    mat[:k1, k1:k1 + k2] = off + 1
    off += 2
    lo = k1 + k2
    mat[lo:, lo:] = off + 1
    np.fill_diagonal(mat[lo:, lo:], off)
    off += 2
    for side, (start, k, tuples) in enumerate(((0, k1, [r[0] for r in rows]), (k1, k2, [r[1] for r in rows]))):
        t = len(tuples[0])
        for i, tup in enumerate(tuples):
            for s in range(k):
                j = next((j for j, u in enumerate(tup) if s in u), t)
                mat[lo + i, start + s] = off + j
                mat[start + s, lo + i] = off + t + 1 + j
        off += 2 * t + 2
    c = coherent_closure(ColoredDigraph(mat))
    l, s1, s2 = int(c.fiber_of[lo]), int(c.fiber_of[0]), int(c.fiber_of[k1])
    if len(c.fibers[l]) != m or len(c.fibers[s1]) != k1 or len(c.fibers[s2]) != k2:
        raise IntegrityError("closure split the fibers of the path instance")
    return PathInstance(c, l, (s1, s2), (p1, p2))

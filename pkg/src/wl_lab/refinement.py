"""k-dimensional Weisfeiler-Leman refinement and coherent closure."""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .core import ColoredDigraph, canonical_colors, validate_partition
from .errors import IntegrityError, ResourceError

DEFAULT_MEM_MB = 2048


def memory_budget_bytes() -> int:
    mb = os.environ.get("WL_LAB_MEM_MB")
    try:
        return int(float(mb) * 2**20) if mb else DEFAULT_MEM_MB * 2**20
    except ValueError:
        return DEFAULT_MEM_MB * 2**20


def _check_budget(n_graphs: int, n: int, k: int) -> None:
    width = max(k, 2)
    tuples = n_graphs * n ** k * n
    need = tuples * width * 8 * 3
    if need > memory_budget_bytes():
        raise ResourceError(
            f"{k}-WL on {n_graphs} graph(s) of order {n} needs {tuples} tuple slots "
            f"(~{need / 2**20:.0f} MiB); budget is {memory_budget_bytes() / 2**20:.0f} MiB")


def _row_ids(rows: np.ndarray) -> np.ndarray:
    """Injective, order-preserving recoding of the rows of a 2-d array."""
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if rows.shape[1] == 1:
        _, inv = np.unique(rows[:, 0], return_inverse=True)
        return inv.astype(np.int64)
    rows = np.ascontiguousarray(rows)
    _, inv = np.unique(rows, axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


def _shared_initial(graphs: Sequence[ColoredDigraph]) -> list[np.ndarray]:
    """Color matrices over a common id space.

    Colors are matched by name when every graph carries names, otherwise by id.
    """
    if all(g.color_names is not None for g in graphs):
        names = sorted({nm for g in graphs for nm in g.color_names})
        index = {nm: i for i, nm in enumerate(names)}
        out = []
        for g in graphs:
            table = np.array([index[nm] for nm in g.color_names], dtype=np.int64)
            out.append(table[g.arc_color] if g.n else g.arc_color.copy())
        return out
    return [np.asarray(g.arc_color, dtype=np.int64) for g in graphs]


# refinement kernels ---------------------------------------------------------

def _refine1(mats: np.ndarray) -> tuple[np.ndarray, int]:
    """Color refinement on vertices; neighbours are read through arc colors."""
    g, n, _ = mats.shape
    diag = mats[:, np.arange(n), np.arange(n)]
    chi = _row_ids(diag.reshape(-1, 1)).reshape(g, n)
    r0 = int(mats.max()) + 1 if mats.size else 1
    out_c = mats
    in_c = mats.transpose(0, 2, 1)
    classes = len(np.unique(chi))
    rounds = 0
    while True:
        rounds += 1
        r = int(chi.max()) + 1
        code = (chi[:, None, :] * r0 + out_c) * r0 + in_c
        code.sort(axis=2)
        rows = np.concatenate([chi[:, :, None], code], axis=2).reshape(g * n, n + 1)
        new = _row_ids(rows).reshape(g, n)
        new_classes = int(new.max()) + 1 if new.size else 0
        chi = new
        if new_classes == classes:
            return chi, rounds
        classes = new_classes


def _atomic_pairs(mats: np.ndarray) -> np.ndarray:
    g, n, _ = mats.shape
    loops = mats[:, np.arange(n), np.arange(n)]
    rows = np.stack([
        np.broadcast_to(loops[:, :, None], (g, n, n)),
        mats,
        mats.transpose(0, 2, 1),
        np.broadcast_to(loops[:, None, :], (g, n, n)),
    ], axis=3).reshape(g * n * n, 4)
    return _row_ids(rows).reshape(g, n, n)


def _refine2(mats: np.ndarray, atomic: bool = True) -> tuple[np.ndarray, int]:
    g, n, _ = mats.shape
    chi = _atomic_pairs(mats) if atomic else _row_ids(mats.reshape(-1, 1)).reshape(g, n, n)
    classes = int(chi.max()) + 1 if chi.size else 0
    rounds = 0
    while True:
        rounds += 1
        r = classes
        # x[g, v, w, u] = (chi[v, u], chi[u, w])
        x = chi[:, :, None, :] * r + chi.transpose(0, 2, 1)[:, None, :, :]
        x.sort(axis=3)
        rows = np.concatenate([chi[..., None], x], axis=3).reshape(g * n * n, n + 1)
        new = _row_ids(rows).reshape(g, n, n)
        new_classes = int(new.max()) + 1 if new.size else 0
        chi = new
        if new_classes == classes:
            return chi, rounds
        classes = new_classes


def _atomic_tuples(mat: np.ndarray, k: int) -> np.ndarray:
    n = mat.shape[0]
    grids = np.indices((n,) * k).reshape(k, -1)
    cols = [mat[grids[i], grids[j]] for i in range(k) for j in range(k)]
    return np.stack(cols, axis=1)


def _refinek(mats: np.ndarray, k: int) -> tuple[np.ndarray, int]:
    g, n, _ = mats.shape
    size = n ** k
    rows = np.concatenate([_atomic_tuples(m, k) for m in mats], axis=0)
    chi = _row_ids(rows).reshape((g,) + (n,) * k)
    classes = int(chi.max()) + 1 if chi.size else 0
    rounds = 0
    while True:
        rounds += 1
        per_graph = []
        for gi in range(g):
            c = chi[gi]
            parts = []
            for i in range(k):
                moved = np.moveaxis(c, i, -1)           # w takes position i
                parts.append(np.broadcast_to(np.expand_dims(moved, i), (n,) * (k + 1)))
            per_graph.append(np.stack(parts, axis=-1).reshape(size * n, k))
        stacked = np.concatenate(per_graph, axis=0)
        code = _row_ids(stacked).reshape(g * size, n)
        code.sort(axis=1)
        rows = np.concatenate([chi.reshape(g * size, 1), code], axis=1)
        new = _row_ids(rows).reshape(chi.shape)
        new_classes = int(new.max()) + 1 if new.size else 0
        chi = new
        if new_classes == classes:
            return chi, rounds
        classes = new_classes


def refine_joint(graphs: Sequence[ColoredDigraph], k: int) -> tuple[list[np.ndarray], int]:
    """Refine equal-order graphs in lockstep over one shared color space.

    Returns the per-graph stable colorings (ids comparable across graphs) and
    the number of rounds.
    """
    if k < 1:
        raise ValueError("dimension must be >= 1")
    if not graphs:
        return [], 0
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise ValueError("joint refinement needs graphs of equal order")
    _check_budget(len(graphs), n, k)
    if n == 0:
        shape = (0,) * k
        return [np.zeros(shape, dtype=np.int64) for _ in graphs], 0
    mats = np.stack(_shared_initial(graphs))
    if k == 1:
        chi, rounds = _refine1(mats)
    elif k == 2:
        chi, rounds = _refine2(mats)
    else:
        chi, rounds = _refinek(mats, k)
    return list(chi), rounds


# public api -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PartitionSignature:
    """Multiset of (color id, class size) of one graph's stable coloring."""

    counts: tuple
    joint: bool

    def __eq__(self, other):
        return isinstance(other, PartitionSignature) and self.counts == other.counts

    def __hash__(self):
        return hash(self.counts)


@dataclass(frozen=True, eq=False)
class StableColoring:
    k: int
    colors: np.ndarray
    rounds: int

    @property
    def num_classes(self) -> int:
        return len(np.unique(self.colors))

    def arcs(self) -> ColoredDigraph:
        """Restriction to pairs, for k = 2."""
        if self.k != 2:
            raise ValueError("arc restriction is defined for k = 2")
        return canonical_colors(ColoredDigraph(self.colors))

    def signature(self, joint: bool = False) -> PartitionSignature:
        vals, cnt = np.unique(self.colors, return_counts=True)
        return PartitionSignature(tuple(zip(vals.tolist(), cnt.tolist())), joint)


def wl_refine(g: ColoredDigraph, k: int) -> StableColoring:
    (chi,), rounds = refine_joint([g], k)
    return StableColoring(k, chi, rounds)


def joint_signatures(graphs: Sequence[ColoredDigraph], k: int) -> list[PartitionSignature]:
    chis, _ = refine_joint(graphs, k)
    return [StableColoring(k, c, 0).signature(joint=True) for c in chis]


def distinguishes(g: ColoredDigraph, h: ColoredDigraph, k: int) -> bool:
    """True iff k-WL tells ``g`` and ``h`` apart (joint refinement)."""
    if g.n != h.n:
        return True
    a, b = joint_signatures([g, h], k)
    return a != b


# coherent configurations ----------------------------------------------------

@dataclass(frozen=True)
class RelationMeta:
    color: int
    source: int          # fiber index
    target: int
    transpose: int
    degree: int


@dataclass(frozen=True, eq=False)
class CoherentConfiguration:
    """A coherent configuration given by a canonical colored digraph.

    Fibers are numbered by their loop color, which canonical ordering puts
    first; relation ids are the color ids of ``base``.
    """

    base: ColoredDigraph
    fibers: tuple = field(init=False)
    fiber_of: np.ndarray = field(init=False, repr=False)
    relation_meta: tuple = field(init=False, repr=False)

    def __post_init__(self):
        base = canonical_colors(self.base)
        object.__setattr__(self, "base", base)
        mat = base.arc_color
        n = base.n
        loops = np.diagonal(mat)
        nf = len(np.unique(loops)) if n else 0
        fibers = tuple(tuple(np.flatnonzero(loops == f).tolist()) for f in range(nf))
        fiber_of = loops.copy()
        fiber_of.setflags(write=False)
        object.__setattr__(self, "fibers", fibers)
        object.__setattr__(self, "fiber_of", fiber_of)
        report = validate_partition(base)
        if not report.ok:
            raise IntegrityError("partition violates loop separation or transposition",
                                 {"cc1": report.cc1_violations, "cc2": report.cc2_violations})
        meta = []
        classes = base.color_classes()
        for c in range(base.rank):
            pairs = classes[c]
            u, v = int(pairs[0, 0]), int(pairs[0, 1])
            src, dst = int(fiber_of[u]), int(fiber_of[v])
            deg = len(pairs) // len(fibers[src])
            meta.append(RelationMeta(c, src, dst, report.transpose[c], deg))
        object.__setattr__(self, "relation_meta", tuple(meta))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def rank(self) -> int:
        return self.base.rank

    @property
    def matrix(self) -> np.ndarray:
        return self.base.arc_color

    def degree(self, a: int) -> int:
        return self.relation_meta[a].degree

    def transpose(self, a: int) -> int:
        return self.relation_meta[a].transpose

    def relations(self, r: int, b: int) -> list[int]:
        """Basis relation ids of the interspace from fiber ``r`` to fiber ``b``."""
        return [m.color for m in self.relation_meta if m.source == r and m.target == b]

    def neighbourhood(self, v: int, a: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[v] == a)

    @cached_property
    def intersection_numbers(self) -> dict:
        rep = verify_coherence(self.base)
        if not rep.ok:
            raise IntegrityError("not coherent", rep.witness)
        return rep.intersection_numbers

    def same_partition(self, other: "CoherentConfiguration") -> bool:
        return np.array_equal(self.matrix, other.matrix)

    def __repr__(self):
        return f"CoherentConfiguration(n={self.n}, rank={self.rank}, fibers={[len(f) for f in self.fibers]})"


def coherent_closure(g: Union[ColoredDigraph, CoherentConfiguration]) -> CoherentConfiguration:
    """Coarsest coherent configuration whose relations refine the colors of ``g``."""
    if isinstance(g, CoherentConfiguration):
        g = g.base
    if g.n == 0:
        return CoherentConfiguration(g)
    _check_budget(1, g.n, 2)
    chi, _ = _refine2(np.asarray(g.arc_color, dtype=np.int64)[None])
    return CoherentConfiguration(ColoredDigraph(chi[0]))


def individualize(c: Union[CoherentConfiguration, ColoredDigraph],
                  vs: Sequence[int]) -> CoherentConfiguration:
    """Closure after giving each vertex of ``vs`` its own loop color."""
    vs = list(vs)
    if len(set(vs)) != len(vs):
        raise ValueError("duplicate vertex in individualization sequence")
    base = c.base if isinstance(c, CoherentConfiguration) else c
    if not vs:
        return c if isinstance(c, CoherentConfiguration) else coherent_closure(c)
    mat = np.array(base.arc_color, dtype=np.int64)
    for i, v in enumerate(vs):
        if not 0 <= v < base.n:
            raise ValueError(f"vertex {v} not in configuration")
        mat[v, v] = base.rank + i
    return coherent_closure(ColoredDigraph(mat))


@dataclass
class CoherenceReport:
    cc1: bool
    cc2: bool
    cc3: bool
    witness: Optional[dict] = None
    intersection_numbers: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.cc1 and self.cc2 and self.cc3


def verify_coherence(g: Union[ColoredDigraph, CoherentConfiguration, np.ndarray]) -> CoherenceReport:
    """Exhaustive check of the three axioms.

    For every pair (v, w) the multiset of (color(v,u), color(u,w)) over all u
    must depend only on the color of (v, w).  On success the intersection
    numbers are read off one representative per color.
    """
    if isinstance(g, CoherentConfiguration):
        g = g.base
    mat = g.arc_color if isinstance(g, ColoredDigraph) else np.asarray(g, dtype=np.int64)
    part = validate_partition(mat)
    if not part.ok:
        return CoherenceReport(part.cc1, part.cc2, False,
                               {"cc1": part.cc1_violations, "cc2": part.cc2_violations})
    n = mat.shape[0]
    if n == 0:
        return CoherenceReport(True, True, True)
    _, mat = np.unique(mat, return_inverse=True)
    mat = mat.reshape(n, n).astype(np.int64)
    r = int(mat.max()) + 1
    flat = mat.ravel()
    rep = np.full(r, n * n, dtype=np.int64)
    np.minimum.at(rep, flat, np.arange(n * n))
    # rows[v*n + w] = sorted codes of (mat[v,u], mat[u,w]) over u
    rows = (mat[:, None, :] * r + mat.T[None, :, :]).reshape(n * n, n)
    rows.sort(axis=1)
    ref = rows[rep[flat]]
    bad = np.flatnonzero((rows != ref).any(axis=1))
    if len(bad):
        i = int(bad[0])
        t = int(flat[i])
        j = int(rep[t])
        ci = Counter(rows[i].tolist())
        cj = Counter(rows[j].tolist())
        code = next(x for x in sorted(set(ci) | set(cj)) if ci[x] != cj[x])
        a, b = divmod(code, r)
        witness = {"A": a, "B": b, "T": t,
                   "arcs": [(j // n, j % n), (i // n, i % n)],
                   "counts": [cj[code], ci[code]]}
        return CoherenceReport(True, True, False, witness)
    table = {}
    for t in range(r):
        for code, cnt in Counter(rows[rep[t]].tolist()).items():
            a, b = divmod(code, r)
            table[(a, b, t)] = cnt
    return CoherenceReport(True, True, True, None, table)

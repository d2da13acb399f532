"""The twelve acceptance criteria.

Each criterion is a plain function returning ``(ok, detail)``; pytest records
the outcome for the terminal summary and fails on a red criterion.  Running
this file as a script prints one PASS/FAIL line per criterion.
"""

import itertools
import math
import os
import sys
import time
from collections import defaultdict
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from conftest import ACCEPTANCE, random_limit_instance, random_suite, rook4, shrikhande  # noqa: E402
from wl_lab.bounds import (LocalReduction, apply_local_reduction, audit_fiber_size,  # noqa: E402
                           audit_valence, cfi, cfi_isomorphic, h_function, limit_color_valence,
                           limit_fiber_size, masks_to_adjacency, progress_for_split, tau,
                           treewidth, treewidth_of_masks, treewidth_subset_dp)
from wl_lab.census import (enumerate_homogeneous, enumerate_small_interspaces,  # noqa: E402
                           interspace_type, small_interspace_instances)
from wl_lab.core import from_adjacency  # noqa: E402
from wl_lab.errors import IntegrityError  # noqa: E402
from wl_lab.critical import exact_wldim, graph_masks, graph_universe  # noqa: E402
from wl_lab.factory import build_pattern_instance, pattern_names, small_types_for, with_copy_fiber  # noqa: E402
from wl_lab.patterns import (classify_pattern, divisor_check, equivalence_classes,  # noqa: E402
                             induced_paths, partition_structure, pattern_candidates)
from wl_lab.refinement import coherent_closure, distinguishes, joint_signatures, verify_coherence  # noqa: E402

# number of graphs on n unlabeled vertices
GRAPH_COUNTS = {1: 1, 2: 2, 3: 4, 4: 11, 5: 34, 6: 156, 7: 1044, 8: 12346, 9: 274668}

HOMOGENEOUS_TYPES = {
    1: {("K1",)},
    2: {("K2",)},
    3: {("K3",), ("C3->",)},
    4: {("K4",), ("2K2", "C4"), ("2K2", "2K2", "2K2"), ("2K2", "C4->")},
    5: {("K5",), ("C5", "C5"), ("C5->", "C5->")},
    6: {("K6",), ("2K3", "K33"), ("2C3->", "K33"), ("3K2", "K222"), ("3K2", "C3->[K2]"),
        ("2K3", "3K2", "C6"), ("2C3->", "3K2", "C6->"), ("2C3->", "3K2", "3K2", "3K2")},
    7: {("K7",), ("C7", "C7", "C7"), ("PTr(7)",), ("C7->", "C7->", "C7->")},
}

SMALL_INTERSPACES = {
    (4, 4): {("C8", "C8"), ("2K22", "2K22")},
    (4, 6): {("I(K4,6)", "I(K4,6)"), ("2K23", "2K23")},
    (6, 6): {("3K22", "C12", "C12"), ("2K33", "2K33"), ("3K22", "3K22", "3K22"), ("3K22", "RxB-3K22")},
    (7, 7): {("I(F)", "RxB-I(F)")},
}

PART_SIZES = {
    2: ["(2K2,2)", "(2K3,3)"],
    3: ["(3K2,2)", "(3K2,2,2)", "(3K2,2;3K2,2)"],
    4: ["(C4,2)", "(K222,3‡)"],
    6: ["(C6,2;3K2,2)", "(K4,2)"],
    8: ["(K222,3†)"],
    9: ["(K33,2)", "(K33,2,2)"],
    10: ["(K6,3‡)"],
    12: ["(K222,2,2)"],
    15: ["(K6,2)", "(K6,2,2)"],
    20: ["(K6,3†)"],
}

# (pattern, small type or None for every factory type) -> partition structure type
STRUCTURE_ROWS = [
    ("(K4,2)", None, ("3K2", "K222")),
    ("(2K2,2)", None, ("K2",)),
    ("(C4,2)", None, ("2K2", "C4")),
    ("(3K2,2)", None, ("K3",)),
    ("(3K2,2,2)", "(3K2,K222)", ("2C3->", "3K2", "3K2", "3K2")),
    ("(3K2,2,2)", "(C6,2K3,3K2)", ("2C3->", "3K2", "3K2", "3K2")),
    ("(3K2,2,2)", "(3K2,C3->[K2])", ("C3->",)),
    ("(3K2,2,2)", "(C6->,2C3->,3K2)", ("C3->",)),
    ("(C6,2;3K2,2)", None, ("2K3", "3K2", "C6")),
    ("(K33,2)", None, ("R3", "R3")),
    ("(2K3,3)", None, ("K2",)),
    ("(3K2,2;3K2,2)", None, ("K3",)),
    ("(K222,3†)", None, ("2K4", "4K2", "K44-4K2")),
    ("(K222,3‡)", None, ("K4",)),
]


# criteria ----------------------------------------------------------------------------

def criterion_1():
    t0 = time.time()
    counts = []
    for n in range(1, 8):
        types = [e.type for e in enumerate_homogeneous(n)]
        counts.append(len(types))
        if len(set(types)) != len(types) or set(types) != HOMOGENEOUS_TYPES[n]:
            return False, f"order {n}: got {types}"
    ok = counts == [1, 1, 2, 4, 3, 8, 4]
    return ok, f"counts {counts} total {sum(counts)} in {time.time() - t0:.1f}s"


def criterion_2():
    found = 0
    for key, cs in small_interspace_instances().items():
        types = set()
        for c in cs:
            if not verify_coherence(c).ok:
                return False, f"{key} instance not coherent"
            types.add(interspace_type(c, int(c.fiber_of[0]), int(c.fiber_of[key[0]])))
        if types != SMALL_INTERSPACES[key]:
            return False, f"{key}: {sorted(types)}"
        found += len(types)
    exhaustive = set(enumerate_small_interspaces(4, 4, exhaustive=True))
    ok = found == 9 and exhaustive == SMALL_INTERSPACES[(4, 4)]
    return ok, f"{found} types realized; exhaustive (4,4) search leaves {sorted(exhaustive)}"


def _pairwise_non_isomorphic(adjs):
    buckets = defaultdict(list)
    for a in adjs:
        buckets[tuple(sorted(a.sum(axis=1).tolist()))].append(nx.from_numpy_array(a.astype(int)))
    for gs in buckets.values():
        for g, h in itertools.combinations(gs, 2):
            if nx.is_isomorphic(g, h):
                return False
    return True


def criterion_3(seed=3, pairs=1000):
    t0 = time.time()
    for n in range(1, 8):
        adjs = graph_universe(n)
        if len(adjs) != GRAPH_COUNTS[n] or not _pairwise_non_isomorphic(adjs):
            return False, f"universe of order {n} is wrong"
        sigs = joint_signatures([from_adjacency(a) for a in adjs], 2)
        if len(set(sigs)) != len(sigs):
            return False, f"order {n}: 2-WL merges non-isomorphic graphs"
    rng = np.random.default_rng(seed)
    for _ in range(pairs):
        n = int(rng.integers(1, 13))
        g = nx.gnp_random_graph(n, float(rng.uniform(0.1, 0.9)), seed=int(rng.integers(2 ** 31)))
        a = nx.to_numpy_array(g, nodelist=range(n)).astype(bool)
        p = rng.permutation(n)
        if distinguishes(from_adjacency(a), from_adjacency(a[np.ix_(p, p)]), 2):
            return False, "2-WL separates a graph from a relabeling"
    return True, f"n<=7 universes separated, {pairs} permuted pairs merged, {time.time() - t0:.1f}s"


def criterion_4():
    r, s = rook4(), shrikhande()
    d2, d3 = distinguishes(r, s, 2), distinguishes(r, s, 3)
    return (not d2 and d3), f"k=2 distinguishes={d2}, k=3 distinguishes={d3}"


def criterion_5():
    t0 = time.time()
    k4 = nx.complete_graph(4)
    x, y = cfi(k4), cfi(k4, [(0, 1)])
    iso = cfi_isomorphic(x, y)
    d2 = distinguishes(x.graph, y.graph, 2)
    d3 = distinguishes(x.graph, y.graph, 3)
    tw, dec = treewidth(k4)
    ok = not iso and not d2 and d3 and tw == 3 and dec.exact and x.graph.n == 16
    return ok, (f"isomorphic={iso}, k=2 {d2}, k=3 {d3}, tw(K4)={tw}, "
                f"{time.time() - t0:.1f}s")


def _handshake(c):
    mat = c.matrix
    sizes = np.bincount(c.fiber_of, minlength=len(c.fibers))
    for a in range(c.rank):
        m = c.relation_meta[a]
        pairs = int((mat == a).sum())
        out_deg = (mat[list(c.fibers[m.source])] == a).sum(axis=1)
        in_deg = (mat[:, list(c.fibers[m.target])] == a).sum(axis=0)
        if len(set(out_deg.tolist())) != 1 or len(set(in_deg.tolist())) != 1:
            return False
        if pairs != sizes[m.source] * int(out_deg[0]) or pairs != sizes[m.target] * int(in_deg[0]):
            return False
    return True


def criterion_6(seed=6, count=1000):
    for i, g in enumerate(random_suite(seed, count)):
        c = coherent_closure(g)
        if not verify_coherence(c).ok:
            return False, f"instance {i}: closure not coherent"
        if not coherent_closure(c).same_partition(c):
            return False, f"instance {i}: closure not idempotent"
        if not _handshake(c):
            return False, f"instance {i}: handshake identity fails"
    return True, f"{count} instances coherent, idempotent, handshake exact"


def criterion_7():
    checked = 0
    for n in range(1, 7):
        for a in graph_universe(n):
            k = exact_wldim(from_adjacency(a))
            for v in range(n):
                cols = [0] * n
                cols[v] = 1
                kv = exact_wldim(from_adjacency(a, cols))
                checked += 1
                if k > 1 + max(2, kv):
                    return False, f"violated on n={n}, v={v}"
    return True, f"{checked} (graph, vertex) pairs"


def criterion_8():
    counts = []
    for p in pattern_names():
        for t in small_types_for(p):
            inst = build_pattern_instance(p, 1, t)
            c = inst.config
            cands = [x.name for x in pattern_candidates(c, inst.large, inst.small)]
            if cands != [p]:
                return False, f"{p}/{t}: candidates {cands}"
            pat = classify_pattern(c, inst.large, inst.small)
            size = len(equivalence_classes(c, inst.large, [inst.small], [pat]).first)
            expected = next(k for k, ps in PART_SIZES.items() if p in ps)
            if size != expected:
                return False, f"{p}/{t}: |Part| {size}, expected {expected}"
        counts.append(size)
    rows = 0
    for p, t, want in STRUCTURE_ROWS:
        for st in ([t] if t else small_types_for(p)):
            inst = build_pattern_instance(p, 1, st)
            got = partition_structure(inst.config, inst.large, [inst.small]).type()
            if tuple(sorted(got)) != tuple(sorted(want)):
                return False, f"{p}/{st}: structure {got}, expected {want}"
            rows += 1
    return True, f"|Part| sizes {counts}; {rows} (pattern, small type) structure rows"


def criterion_9(seed=6, count=1000):
    paths = checks = 0
    for g in random_suite(seed, count):
        c = coherent_closure(g)
        for path in induced_paths(c):
            r, b, y = path
            paths += 1
            nb = len(c.fibers[b])
            if all(nb % q for q in range(2, int(math.isqrt(nb)) + 1)):
                return False, f"|B| = {nb} is prime on an induced path"
            for u in c.relations(r, b):
                for u2 in c.relations(y, b):
                    try:
                        divisor_check(c, path, u, u2)
                    except IntegrityError as e:
                        return False, f"{path}: {e}"
                    checks += 1
    ok = paths > 0
    return ok, f"{paths} induced paths, {checks} relation pairs, all identities exact"


def criterion_10(seed=10, splits=1000):
    if tau(16, 1, 4) != Fraction(11, 5) or h_function(Fraction(1, 2)) != Fraction(-2, 5):
        return False, "tau or h examples"
    rng = np.random.default_rng(seed)
    for _ in range(splits):
        n = int(rng.integers(8, 400))
        k = int(rng.integers(2, min(n, 20) + 1))
        cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False))
        parts = np.diff(np.concatenate([[0], cuts, [n]])).tolist()
        if not progress_for_split(n, parts).holds:
            return False, f"split {n} -> {parts}"
    inst = with_copy_fiber(build_pattern_instance("(3K2,2,2)", 2))
    red = apply_local_reduction(inst.config, "L-S/(3K2,2,2)")
    if not isinstance(red, LocalReduction):
        return False, f"rule missed: {red}"
    ok = red.delta <= Fraction(-11, 10)
    return ok, f"{splits} splits hold; (3K2,2,2) delta tau = {red.delta}"


def criterion_11(seed=11, count=200):
    rng = np.random.default_rng(seed)
    worst = Fraction(0)
    for i in range(count):
        c = coherent_closure(random_limit_instance(rng))
        d = int(rng.integers(1, 5))
        cap = int(rng.choice([2, 4, 8, 16]))
        a1 = audit_valence(c, d, limit_color_valence(c, d))
        a2 = audit_fiber_size(c, cap, d, limit_fiber_size(c, cap, d))
        if not (a1.ok and a2.ok):
            return False, f"instance {i} (n={c.n}, d={d}, cap={cap}): {a1} {a2}"
        worst = max(worst, Fraction(a2.used) / a2.bound)
    return True, f"{count} instances within bounds; worst |S|/bound = {float(worst):.2f}"


def criterion_12(top=9):
    t0 = time.time()
    total = 0
    for n in range(1, top + 1):
        masks = graph_masks(n)
        if len(masks) != GRAPH_COUNTS[n]:
            return False, f"order {n}: {len(masks)} graphs"
        for nb in masks:
            adj = masks_to_adjacency(nb)
            w, dec = treewidth(adj)
            if w != treewidth_of_masks(nb) or w != treewidth_subset_dp(adj) or not dec.verify(adj):
                return False, f"disagreement on order {n}: {nb}"
        total += len(masks)
    return True, f"{total} graphs on <= {top} vertices, {time.time() - t0:.0f}s"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = CRITERIA[number]()
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


if __name__ == "__main__":
    for number, fn in CRITERIA.items():
        ok, detail = fn()
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)

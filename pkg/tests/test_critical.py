import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import nx_graph, random_circulant, random_colored_digraph
from wl_lab.census import small_interspace_instances
from wl_lab.core import from_edges
from wl_lab.critical import (automorphisms, detect_alternating_cycle, detect_star, detect_tiny,
                             exact_wldim, graph_masks, is_automorphism, is_dominating,
                             is_restorable, is_taken_care_of, reduce_to_core, replay,
                             small_module_check)
from wl_lab.errors import PreconditionMiss, ResourceError, UnsupportedError
from wl_lab.factory import build_pattern_instance
from wl_lab.refinement import coherent_closure, individualize


def closure(g):
    return coherent_closure(nx_graph(g))


def fibered(sizes, edges):
    colors = [i for i, s in enumerate(sizes) for _ in range(s)]
    return coherent_closure(from_edges(len(colors), edges, colors))


def c8(a, b):
    return [(a + i, b + i) for i in range(4)] + [(a + i, b + (i + 1) % 4) for i in range(4)]


def test_tiny_detection():
    c = individualize(closure(nx.cycle_graph(6)), [0])
    assert sorted(len(f) for f in c.fibers) == [1, 1, 2, 2]
    assert detect_tiny(c) == list(range(4))
    assert detect_tiny(closure(nx.petersen_graph())) == []


def test_star_on_matching():
    c = fibered([4, 4], [(i, 4 + i) for i in range(4)])
    assert detect_star(c) == [(0, 1), (1, 0)]


def test_star_on_k12_forest():
    # 4 centers of color 0, each joined to two leaves of color 1
    c = fibered([4, 8], [(i, 4 + 2 * i + j) for i in range(4) for j in range(2)])
    leaves = int(c.fiber_of[4])
    centers = int(c.fiber_of[0])
    assert (leaves, centers) in detect_star(c)
    assert (centers, leaves) not in detect_star(c)


def test_alternating_cycle_odd_only():
    c10 = [(i, 5 + i) for i in range(5)] + [(i, 5 + (i + 1) % 5) for i in range(5)]
    hits = detect_alternating_cycle(fibered([5, 5], c10))
    assert hits and all(h.matching_emerges for h in hits)
    assert detect_alternating_cycle(fibered([4, 4], c8(0, 4))) == []


def test_automorphism_counts():
    c4 = closure(nx.cycle_graph(4))
    assert len(automorphisms(c4, range(4))) == 8
    k4 = closure(nx.complete_graph(4))
    auts = automorphisms(k4, range(4))
    assert len(auts) == 24 and all(is_automorphism(k4, a) for a in auts)
    assert automorphisms(k4, [2]) == [{2: 2}]


def test_automorphism_guard():
    with pytest.raises(ResourceError):
        automorphisms(closure(nx.empty_graph(21)), range(21))


def test_restorable_with_certificate():
    # R joined to B as 2K22, B linked to Y by an 8-cycle: {R} is not dominating
    k22 = [(i, 4 + j) for i in range(4) for j in range(4) if (i + j) % 2 == 0]
    c = fibered([4, 4, 4], k22 + c8(4, 8))
    r = int(c.fiber_of[0])
    assert not is_dominating(c, [r])
    ok, cert = is_restorable(c, [r])
    assert ok and cert.verify(c)
    # a tampered table entry must fail verification
    phi, ext = cert.table[0]
    bad = dict(ext)
    a, b = list(bad)[:2]
    bad[a], bad[b] = bad[b], bad[a]
    cert.table[0] = (phi, bad)
    assert not cert.verify(c)


def test_taken_care_of():
    c = fibered([4, 4, 4], [(i, 4 + i) for i in range(4)] + [(8 + i, 4 + i) for i in range(4)])
    r, y = int(c.fiber_of[4]), int(c.fiber_of[0])
    # the third fiber sees R through the same matching
    assert is_taken_care_of(c, r, y)
    with pytest.raises(ValueError):
        is_taken_care_of(c, r, r)


def test_small_module_check():
    inst = build_pattern_instance("(3K2,2)", 2)
    hit = small_module_check(inst.config, inst.small)
    assert hit is not None and len(hit.partition) == 3
    assert hit.collapsed.n == inst.config.n - 3
    c8pair = small_interspace_instances()[(4, 4)][0]
    assert small_module_check(c8pair, int(c8pair.fiber_of[0])) is None
    with pytest.raises(PreconditionMiss):
        small_module_check(closure(nx.cycle_graph(5)), 0)


def test_reduce_individualized_cycle_to_empty():
    c = individualize(closure(nx.cycle_graph(6)), [0])
    core, trace = reduce_to_core(c)
    assert core.n == 0
    assert trace.removed() == list(range(6))


def test_reduce_keeps_c8_pair():
    c = small_interspace_instances()[(4, 4)][0]
    core, trace = reduce_to_core(c)
    assert core.n == c.n and trace.steps == []


def test_reduce_replay_matches():
    c = fibered([4, 4, 4], [(i, 4 + i) for i in range(4)] + c8(4, 8))
    core, trace = reduce_to_core(c)
    again, kept = replay(coherent_closure(c), trace)
    assert again.n == core.n
    assert np.array_equal(again.matrix, core.matrix)
    assert set(kept).isdisjoint(trace.removed())


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_core_is_free_of_tiny_and_stars(seed, circulant):
    rng = np.random.default_rng(seed)
    g = random_circulant(rng) if circulant else random_colored_digraph(rng, int(rng.integers(1, 10)))
    core, trace = reduce_to_core(coherent_closure(g), restorable=False)
    assert detect_tiny(core) == []
    assert detect_star(core) == []
    assert len(trace.removed()) + core.n == g.n


def test_exact_wldim_examples():
    assert exact_wldim(nx_graph(nx.empty_graph(1))) == 1
    assert exact_wldim(nx_graph(nx.cycle_graph(5))) == 1
    assert exact_wldim(nx_graph(nx.cycle_graph(6))) == 2
    with pytest.raises(UnsupportedError):
        exact_wldim(nx_graph(nx.cycle_graph(8)))


def test_exact_wldim_invariant_under_complement():
    g = nx.path_graph(5)
    assert exact_wldim(nx_graph(g)) == exact_wldim(nx_graph(nx.complement(g)))


@pytest.mark.parametrize("n,count", [(1, 1), (2, 2), (3, 4), (4, 11), (5, 34), (6, 156), (7, 1044)])
def test_graph_mask_counts(n, count):
    assert len(graph_masks(n)) == count

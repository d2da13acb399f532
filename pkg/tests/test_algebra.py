import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import nx_graph, random_circulant, random_colored_digraph
from wl_lab.algebra import (LARGE, SMALL, TINY, constituent, direct_sum, find_modules, interspace,
                            max_modules, module_partitions, quotient_graph, size_class, ul_classes,
                            ul_size, underlying_undirected)
from wl_lab.census import small_interspace_instances
from wl_lab.core import ColoredDigraph
from wl_lab.factory import build_pattern_instance
from wl_lab.refinement import coherent_closure, individualize, verify_coherence


def closure(g):
    return coherent_closure(nx_graph(g))


def test_size_classes():
    assert [size_class(s) for s in (1, 3, 4, 7, 8)] == [TINY, TINY, SMALL, SMALL, LARGE]


def test_fibers_of_cycle():
    c = closure(nx.cycle_graph(6))
    assert [len(f) for f in c.fibers] == [6]
    d = individualize(c, [0])
    # reflection through vertex 0 survives: {1,5} and {2,4} stay together
    assert sorted(len(f) for f in d.fibers) == [1, 1, 2, 2]


def test_bipartite_fibers():
    g = nx.complete_bipartite_graph(4, 8)
    c = coherent_closure(nx_graph(g, [0] * 4 + [1] * 8))
    assert sorted(len(f) for f in c.fibers) == [4, 8]


def test_matching_interspace_degrees():
    c = small_interspace_instances()[(4, 4)][0]
    r, b = int(c.fiber_of[0]), int(c.fiber_of[4])
    assert sorted(interspace(c, r, b).degrees) == [2, 2]
    m = np.eye(4, dtype=np.int64)
    mat = np.zeros((8, 8), dtype=np.int64)
    mat[:4, 4:] = m + 2
    mat[4:, :4] = m.T + 4
    np.fill_diagonal(mat, [0] * 4 + [1] * 4)
    mat[:4, :4][~np.eye(4, dtype=bool)] = 6
    mat[4:, 4:][~np.eye(4, dtype=bool)] = 7
    d = coherent_closure(ColoredDigraph(mat))
    isp = interspace(d, int(d.fiber_of[0]), int(d.fiber_of[4]))
    assert sorted(isp.degrees) == [1, 3]
    with pytest.raises(KeyError):
        interspace(d, 0, 9)


def test_fano_constituent():
    c = small_interspace_instances()[(7, 7)][0]
    r, b = int(c.fiber_of[0]), int(c.fiber_of[7])
    degs = sorted(interspace(c, r, b).degrees)
    assert degs == [3, 4]


def test_homogeneous_quotient():
    q = quotient_graph(closure(nx.petersen_graph()))
    assert q.num_fibers == 1 and not q.edges


def test_direct_sum_quotient_is_disjoint_union():
    c1 = closure(nx.cycle_graph(5))
    s = direct_sum(c1, c1)
    assert verify_coherence(s).ok
    assert s.rank == 8 and len(s.fibers) == 2
    assert not quotient_graph(s).edges
    k1 = coherent_closure(ColoredDigraph(np.zeros((1, 1), dtype=np.int64)))
    s2 = direct_sum(k1, k1)
    assert s2.rank == 4
    assert len(max_modules(s2)) == 2


def test_path_quotient_from_factory():
    inst = build_pattern_instance("(2K2,2)", 4)
    q = quotient_graph(inst.config)
    assert q.edges == {frozenset((inst.large, inst.small))}


def test_ul_sizes():
    c = closure(nx.cycle_graph(6))
    assert ul_size(c, 0) == 4
    # two directed triangles: symmetrized into 2K3
    g = nx.DiGraph([(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    a = nx.to_numpy_array(g, nodelist=range(6)).astype(bool)
    from wl_lab.core import from_adjacency
    d = coherent_closure(from_adjacency(a))
    groups = ul_classes(d, 0)[1:]
    sizes = sorted(len(gr) for gr in groups)
    assert sizes == [1, 2]
    assert underlying_undirected(d).size(0) == 3


def test_modules():
    # blow-up: three pairs, each pair seen uniformly from outside
    inst = build_pattern_instance("(3K2,2)", 2)
    mods = find_modules(inst.config, inst.small)
    assert mods is not None and sorted(len(m) for m in mods) == [2, 2, 2]
    c8 = small_interspace_instances()[(4, 4)][0]
    r = int(c8.fiber_of[0])
    assert module_partitions(c8, r, 3) == []
    # no outside vertex can tell clique members apart
    k = closure(nx.complete_graph(4))
    assert find_modules(k, 0) is not None
    assert len(max_modules(k)) == 4


def test_max_modules_of_cycle():
    assert len(max_modules(closure(nx.cycle_graph(6)))) == 1


@given(st.integers(0, 2 ** 32 - 1))
def test_transpose_involution_and_handshake(seed):
    rng = np.random.default_rng(seed)
    g = random_circulant(rng) if seed % 2 else random_colored_digraph(rng, int(rng.integers(1, 10)))
    c = coherent_closure(g)
    nf = len(c.fibers)
    for r in range(nf):
        for b in range(nf):
            fwd = sorted(c.transpose(a) for a in interspace(c, r, b).relations)
            assert fwd == sorted(interspace(c, b, r).relations)
            for a in interspace(c, r, b).relations:
                assert len(c.fibers[r]) * c.degree(a) == len(c.fibers[b]) * c.degree(c.transpose(a))
    q = quotient_graph(c)
    for e in q.edges:
        r, b = tuple(e)
        assert len(interspace(c, r, b).relations) > 1


@given(st.integers(0, 2 ** 32 - 1))
def test_direct_sum_coherent(seed):
    rng = np.random.default_rng(seed)
    a = coherent_closure(random_colored_digraph(rng, int(rng.integers(1, 6))))
    b = coherent_closure(random_circulant(rng, max_n=8))
    assert verify_coherence(direct_sum(a, b)).ok


def test_constituent_vertices():
    c = closure(nx.cycle_graph(5))
    rel = ul_classes(c, 0)[1][0]
    con = constituent(c, rel)
    assert len(con.vertices) == 5

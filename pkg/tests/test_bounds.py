from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import nx_graph, random_limit_instance, rook4
from wl_lab.bounds import (RULES, LocalReduction, RuleMiss, apply_local_reduction, audit_fiber_size,
                           audit_valence, cfi, cfi_isomorphic, cfi_lower_bound_check,
                           check_progress_in_large, decomposition_from_order, h_function,
                           is_t_reduced, limit_color_valence, limit_fiber_size,
                           max_non_maximal_degree, potential, progress_for_split, tau,
                           treewidth, treewidth_subset_dp, tw_dimension_bound,
                           upper_bound_certificate)
from wl_lab.core import from_edges
from wl_lab.errors import PreconditionMiss, UnsupportedError
from wl_lab.factory import build_pattern_instance, with_copy_fiber
from wl_lab.refinement import coherent_closure, individualize


def fibered(sizes, edges):
    colors = [i for i, s in enumerate(sizes) for _ in range(s)]
    return coherent_closure(from_edges(len(colors), edges, colors))


def partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield []
        return
    for p in range(min(n, largest), 0, -1):
        for rest in partitions(n - p, p):
            yield [p] + rest


# potential ------------------------------------------------------------------------

def test_tau_and_h_values():
    assert tau(16, 1, 4) == Fraction(11, 5)
    assert h_function(Fraction(1, 2)) == Fraction(-2, 5)
    assert h_function(Fraction(1, 8)) == Fraction(-3, 20)
    assert h_function(Fraction(1, 16)) == Fraction(-3, 20)
    assert h_function(Fraction(1, 4)) == Fraction(-3, 10)
    with pytest.raises(ValueError):
        h_function(0)


def test_potential_ignores_tiny_fibers():
    c = individualize(coherent_closure(nx_graph(nx.cycle_graph(6))), [0])
    assert potential(c) == 0


def test_even_split_is_tight():
    rep = progress_for_split(16, [8, 8])
    assert rep.after == rep.bound and rep.holds
    rep = progress_for_split(12, [6, 6])
    assert rep.after == Fraction(3, 5) and rep.bound == 1


def test_progress_exhaustive_up_to_24():
    for n in range(8, 25):
        for parts in partitions(n):
            if len(parts) == 1:
                continue
            assert progress_for_split(n, parts).holds, (n, parts)


@given(st.integers(8, 200), st.data())
def test_progress_random_splits(n, data):
    cuts = sorted(data.draw(st.sets(st.integers(1, n - 1), min_size=1, max_size=min(12, n - 1))))
    parts = np.diff([0] + cuts + [n]).tolist()
    assert progress_for_split(n, parts).holds


def test_progress_preconditions():
    with pytest.raises(PreconditionMiss):
        progress_for_split(6, [3, 3])
    with pytest.raises(ValueError):
        progress_for_split(10, [3, 3])
    c = coherent_closure(nx_graph(nx.cycle_graph(10)))
    rep = check_progress_in_large(c, individualize(c, [0]))
    assert rep.holds
    with pytest.raises(PreconditionMiss):
        check_progress_in_large(individualize(c, [0]), c)


# limiting ------------------------------------------------------------------------------

def test_valence_limit_is_empty_when_already_bounded():
    c = coherent_closure(nx_graph(nx.cycle_graph(12)))
    assert max_non_maximal_degree(c) <= 2
    res = limit_color_valence(c, 2)
    assert res.individualized == []


def test_fiber_limit_with_large_degree_individualizes_all():
    c = coherent_closure(nx_graph(nx.cycle_graph(10)))
    res = limit_fiber_size(c, 4, 4)
    assert sorted(res.individualized) == list(range(10))
    assert audit_fiber_size(c, 4, 4, res).ok


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, 3, 4]), st.sampled_from([2, 4, 8, 16]))
def test_limit_audits(seed, d, cap):
    c = coherent_closure(random_limit_instance(np.random.default_rng(seed)))
    res = limit_color_valence(c, d)
    assert audit_valence(c, d, res).ok
    res = limit_fiber_size(c, cap, d)
    assert audit_fiber_size(c, cap, d, res).ok


def test_limit_rejects_bad_arguments():
    c = coherent_closure(nx_graph(nx.cycle_graph(8)))
    with pytest.raises(ValueError):
        limit_color_valence(c, 0)
    with pytest.raises(ValueError):
        limit_fiber_size(c, 0, 1)


# treewidth ---------------------------------------------------------------------------------

@pytest.mark.parametrize("g,w", [(nx.path_graph(6), 1), (nx.complete_graph(4), 3),
                                 (nx.grid_2d_graph(3, 3), 3), (nx.petersen_graph(), 4),
                                 (nx.grid_2d_graph(4, 4), 4), (nx.empty_graph(3), 0)])
def test_treewidth_examples(g, w):
    g = nx.convert_node_labels_to_integers(g)
    adj = nx.to_numpy_array(g).astype(bool)
    tw, dec = treewidth(adj)
    assert tw == w and dec.width == w
    assert dec.exact == (adj.shape[0] <= 15)
    assert dec.verify(adj)
    assert treewidth_subset_dp(adj) == w


def test_decomposition_verify_rejects_bad_bags():
    adj = nx.to_numpy_array(nx.cycle_graph(5)).astype(bool)
    dec = decomposition_from_order(adj, range(5))
    assert dec.verify(adj)
    dec.bags = [b - {0} for b in dec.bags]
    assert not dec.verify(adj)


@settings(max_examples=80)
@given(st.integers(1, 9), st.floats(0.1, 0.9), st.integers(0, 2 ** 32 - 1))
def test_treewidth_search_matches_subset_dp(n, p, seed):
    g = nx.gnp_random_graph(n, p, seed=seed)
    adj = nx.to_numpy_array(g, nodelist=range(n)).astype(bool)
    tw, dec = treewidth(adj)
    assert dec.verify(adj)
    assert tw == treewidth_subset_dp(adj)


def test_treewidth_bound_on_fibered_path():
    # pairings of the middle fiber differ, so the end fibers see each other uniformly
    e = ([(r, 4 + b) for r in range(4) for b in range(4) if r // 2 == b // 2]
         + [(4 + b, 8 + y) for b in range(4) for y in range(4) if b % 2 == y % 2])
    b = tw_dimension_bound(fibered([4, 4, 4], e))
    assert (b.t, b.treewidth, b.stated, b.sound) == (4, 1, 4, 7)


def test_treewidth_bound_on_k4_quotient():
    e = [(2 * f + i, 2 * g + i) for f in range(4) for g in range(f + 1, 4) for i in range(2)]
    b = tw_dimension_bound(fibered([2] * 4, e))
    assert (b.t, b.treewidth, b.stated, b.sound) == (2, 3, 6, 7)


def test_stated_bound_fails_on_rook_graph():
    # a single fiber has treewidth 0, yet 2-WL does not pin the rook graph down
    b = tw_dimension_bound(coherent_closure(rook4()))
    assert b.stated == 0 and b.sound == 15


# local reductions -----------------------------------------------------------------------------

@pytest.mark.parametrize("pattern", ["(3K2,2,2)", "(C6,2;3K2,2)", "(K222,2,2)", "(K33,2)",
                                     "(K33,2,2)", "(K222,3†)"])
def test_ls_rules_within_claim(pattern):
    inst = with_copy_fiber(build_pattern_instance(pattern, 2))
    red = apply_local_reduction(inst.config, "L-S/" + pattern)
    assert isinstance(red, LocalReduction), red
    assert red.within_claim, (red.delta, red.rule.claimed)


def test_thin_double_rule_within_claim():
    inst = with_copy_fiber(build_pattern_instance("(3K2,2;3K2,2)", 4, "S3-thin"))
    red = apply_local_reduction(inst.config, "L-S/(3K2,2;3K2,2)")
    assert isinstance(red, LocalReduction) and red.within_claim


def test_rule_misses_and_unknown_ids():
    c = coherent_closure(nx_graph(nx.cycle_graph(6)))
    for rid in RULES:
        assert isinstance(apply_local_reduction(c, rid), RuleMiss)
    with pytest.raises(KeyError):
        apply_local_reduction(c, "no-such-rule")


def test_dominating_small_fiber_is_a_miss():
    inst = build_pattern_instance("(3K2,2,2)", 2)
    miss = apply_local_reduction(inst.config, "L-S/(3K2,2,2)")
    assert isinstance(miss, RuleMiss) and "dominating" in miss.reason


def test_t_reduced_reports():
    empty = coherent_closure(from_edges(0, []))
    assert is_t_reduced(empty, 5).ok
    # four large fibers joined by matchings: every one has three large neighbours
    c = fibered([8] * 4, [(i, 8 * k + i) for k in (1, 2, 3) for i in range(8)])
    rep = is_t_reduced(c, 10)
    assert not rep.properties[3][0]
    assert rep.properties[2][0]
    assert not is_t_reduced(c, 4).properties[2][0]


# CFI --------------------------------------------------------------------------------------------

def test_cfi_parity_and_isomorphism():
    k4 = nx.complete_graph(4)
    x0 = cfi(k4)
    x1 = cfi(k4, [(0, 1)])
    x2 = cfi(k4, [(0, 1), (2, 3)])
    assert x0.graph.n == 16
    assert (x0.parity, x1.parity, x2.parity) == (0, 1, 0)
    assert not cfi_isomorphic(x0, x1)
    assert cfi_isomorphic(x0, x2)
    # twisting an edge twice cancels
    assert cfi(k4, [(0, 1), (1, 0)]).twist == frozenset()


def test_cfi_errors():
    with pytest.raises(UnsupportedError):
        cfi(nx.path_graph(4))
    with pytest.raises(UnsupportedError):
        cfi(nx.disjoint_union(nx.cycle_graph(3), nx.cycle_graph(3)))
    with pytest.raises(ValueError):
        cfi(nx.cycle_graph(4), [(0, 2)])


def test_cfi_triangle_not_separated_by_color_refinement():
    rep = cfi_lower_bound_check(nx.cycle_graph(3), 1)
    assert cfi(nx.cycle_graph(3)).graph.n == 6
    assert rep.consistent and not rep.distinguished


def test_cfi_k4_at_dimension_two():
    rep = cfi_lower_bound_check(nx.complete_graph(4), 2)
    assert not rep.distinguished and rep.treewidth == 3 and rep.consistent


# certificates ----------------------------------------------------------------------------------

def test_certificate_small_graph_uses_exact_value():
    cert = upper_bound_certificate(nx_graph(nx.cycle_graph(6)))
    assert cert.total == 2 and cert.terminal == "exact_wldim" and cert.check()


def test_certificate_json_round_trip():
    cert = upper_bound_certificate(nx_graph(nx.petersen_graph()))
    assert cert.check()
    js = cert.to_json()
    assert js["total"] == cert.total and len(js["links"]) == len(cert.links)


@settings(max_examples=15)
@given(st.integers(8, 14), st.integers(0, 2 ** 32 - 1))
def test_certificates_are_self_consistent(n, seed):
    g = nx.gnp_random_graph(n, 0.4, seed=seed)
    cert = upper_bound_certificate(nx_graph(g))
    assert cert.check() and cert.total >= 2

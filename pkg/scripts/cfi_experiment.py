#!/usr/bin/env python3
"""CFI pairs over small base graphs: the least k at which k-WL separates the
untwisted and the once-twisted graph, next to the treewidth of the base."""

import argparse
import time
from dataclasses import dataclass, field

import networkx as nx

from wl_lab.bounds import cfi, treewidth
from wl_lab.errors import ResourceError
from wl_lab.refinement import distinguishes

BASES = {
    "C3": nx.cycle_graph(3),
    "C5": nx.cycle_graph(5),
    "K4": nx.complete_graph(4),
    "K33": nx.complete_bipartite_graph(3, 3),
    "prism": nx.circular_ladder_graph(3),
}


@dataclass
class Config:
    bases: list = field(default_factory=lambda: list(BASES))
    max_k: int = 3
    tuple_budget: int = 2_000_000


def separation_level(g, h, cfg: Config):
    for k in range(1, cfg.max_k + 1):
        if g.n ** k > cfg.tuple_budget:
            raise ResourceError(f"k={k} on {g.n} vertices")
        if distinguishes(g, h, k):
            return k
    return None


def main(cfg: Config) -> None:
    print("base\tn(base)\tn(CFI)\ttw\tseparating k")
    for name in cfg.bases:
        base = nx.convert_node_labels_to_integers(BASES[name])
        u, v = next(iter(base.edges))
        x, y = cfi(base), cfi(base, [(u, v)])
        tw, _ = treewidth(base)
        t0 = time.time()
        try:
            k = separation_level(x.graph, y.graph, cfg)
            shown = str(k) if k else f"> {cfg.max_k}"
        except ResourceError as e:
            shown = f"budget ({e})"
        print(f"{name}\t{base.number_of_nodes()}\t{x.graph.n}\t{tw}\t{shown}\t({time.time() - t0:.1f}s)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bases", nargs="*", default=list(BASES), choices=list(BASES))
    ap.add_argument("--max-k", type=int, default=3)
    a = ap.parse_args()
    main(Config(a.bases, a.max_k))

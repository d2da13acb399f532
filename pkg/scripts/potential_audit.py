#!/usr/bin/env python3
"""Measured change of the potential for each local reduction rule on
factory instances, and a batch of limiting audits."""

import argparse
from dataclasses import dataclass

import networkx as nx
import numpy as np

from wl_lab.bounds import (RULES, LocalReduction, apply_local_reduction, audit_fiber_size,
                           audit_valence, limit_color_valence, limit_fiber_size)
from wl_lab.core import from_adjacency
from wl_lab.factory import build_pattern_instance, with_copy_fiber
from wl_lab.refinement import coherent_closure

# rule -> (pattern, multiplicity, small type)
INSTANCES = {
    "L-S/(K33,2)": ("(K33,2)", 2, None),
    "L-S/(3K2,2;3K2,2)": ("(3K2,2;3K2,2)", 4, "S3-thin"),
    "L-S/(C6,2;3K2,2)": ("(C6,2;3K2,2)", 2, None),
    "L-S/(3K2,2,2)": ("(3K2,2,2)", 2, None),
    "L-S/(K222,2,2)": ("(K222,2,2)", 2, None),
    "L-S/(K222,3†)": ("(K222,3†)", 2, None),
    "L-S/(K33,2,2)": ("(K33,2,2)", 2, None),
}


@dataclass
class Config:
    audits: int = 50
    seed: int = 0


def rules_table() -> None:
    print("rule\tclaimed\tmeasured\tok")
    for rid, (p, mult, st) in INSTANCES.items():
        inst = with_copy_fiber(build_pattern_instance(p, mult, st))
        red = apply_local_reduction(inst.config, rid)
        if isinstance(red, LocalReduction):
            print(f"{rid}\t{RULES[rid].claimed}\t{red.delta}\t{red.within_claim}")
        else:
            print(f"{rid}\t{RULES[rid].claimed}\tmiss: {red.reason}")


def audits(cfg: Config) -> None:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(cfg.audits):
        n = int(rng.integers(16, 49))
        g = nx.circulant_graph(n, [int(x) for x in rng.choice(np.arange(1, n // 2 + 1), 3, replace=False)])
        a = nx.to_numpy_array(g, nodelist=range(n)).astype(bool)
        c = coherent_closure(from_adjacency(a))
        d, cap = int(rng.integers(1, 5)), int(rng.choice([4, 8, 16]))
        r1 = audit_valence(c, d, limit_color_valence(c, d))
        r2 = audit_fiber_size(c, cap, d, limit_fiber_size(c, cap, d))
        assert r1.ok and r2.ok
        worst = max(worst, r2.used / float(r2.bound))
    print(f"\n{cfg.audits} limiting audits passed; worst |S|/bound {worst:.2f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--audits", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    rules_table()
    audits(Config(a.audits, a.seed))

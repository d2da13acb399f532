#!/usr/bin/env python3
"""Rebuild the small-configuration tables: homogeneous configurations up to
order 7, interspaces between small fibers, and the pattern tables
(|Part| and partition-structure types) on factory instances."""

import argparse
import time
from dataclasses import dataclass

from wl_lab.census import enumerate_homogeneous, enumerate_small_interspaces, small_interspace_instances
from wl_lab.factory import build_pattern_instance, pattern_names, small_types_for
from wl_lab.patterns import classify_pattern, equivalence_classes, partition_structure


@dataclass
class Config:
    max_order: int = 7
    exhaustive_44: bool = True
    structures: bool = True


def fmt(t):
    return "(" + ",".join(t) + ")"


def main(cfg: Config) -> None:
    t0 = time.time()
    print("# homogeneous configurations")
    for n in range(1, cfg.max_order + 1):
        types = [fmt(e.type) for e in enumerate_homogeneous(n)]
        print(f"{n}\t{len(types)}\t{' '.join(types)}")
    print(f"# ({time.time() - t0:.1f}s)\n")

    print("# interspaces between small fibers")
    for key in sorted(small_interspace_instances()):
        print(f"{key[0]},{key[1]}\t{' '.join(fmt(t) for t in enumerate_small_interspaces(*key))}")
    if cfg.exhaustive_44:
        left = enumerate_small_interspaces(4, 4, exhaustive=True)
        print(f"exhaustive 4,4\t{' '.join(fmt(t) for t in left)}")
    print()

    print("# interspace patterns")
    for p in pattern_names():
        for t in small_types_for(p):
            inst = build_pattern_instance(p, 1, t)
            c = inst.config
            pat = classify_pattern(c, inst.large, inst.small)
            size = len(equivalence_classes(c, inst.large, [inst.small], [pat]).first)
            line = f"{p}\t{t}\t|Part|={size}"
            if cfg.structures and size <= 12:
                line += "\t" + fmt(sorted(partition_structure(c, inst.large, [inst.small]).type()))
            print(line)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-order", type=int, default=7)
    ap.add_argument("--skip-exhaustive", action="store_true")
    ap.add_argument("--no-structures", action="store_true")
    a = ap.parse_args()
    main(Config(a.max_order, not a.skip_exhaustive, not a.no_structures))

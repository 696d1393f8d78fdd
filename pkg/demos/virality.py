"""Structural virality separates broadcast-like trees from long chains.

A star, where every model is tuned straight from one base, scores near 2.
A chain of successive finetunes grows linearly with its length.
"""

from modelphylo.graph import Tree, structural_virality

for n in (5, 20, 100):
    chain = Tree.from_edges([(i, i + 1) for i in range(n - 1)])
    star = Tree.from_edges([("base", i) for i in range(n - 1)])
    print(f"n={n:3d}  chain {structural_virality(chain):7.3f}   star {structural_virality(star):6.3f}")

# a binary tree sits in between
binary = Tree.from_edges([(i, c) for i in range(63) for c in (2 * i + 1, 2 * i + 2)])
print(f"complete binary tree of {len(binary)} nodes: {structural_virality(binary):.3f}")

"""Shared tree builders for the test suite.

The corpus:

  star_tree(m)       hub ``h`` with leaves ``x1 .. xm``, observed in leaf
                     order.  Every triple is a star, every quadruple
                     degenerate.
  observed_chain(k)  path ``1 - 2 - ... - k`` with every node observed.
  caterpillar()      latent hubs ``5`` and ``6`` joined by an edge, leaves
                     1, 3 under 5 and 2, 4 under 6; observed order 1, 2,
                     3, 4.  The quadruple splits {1,3} | {2,4}.
  inner_node_tree()  latent ``4`` with leaves 1 and 2; observed ``5``
                     adjacent to 4 and to leaf 3; observed order 1, 2,
                     3, 5.  Node 5 sits inside two observed chains.

random_latent_tree draws a uniform labeled tree from its sequence
encoding, forces degree <= 2 nodes to be observed, promotes higher-degree
nodes with probability one half, and rejects until the observed count
lands in the requested range.
"""

from __future__ import annotations

import heapq

import numpy as np

from treegof.tree import LatentTree


def star_tree(m: int) -> LatentTree:
    leaves = [f"x{i}" for i in range(1, m + 1)]
    return LatentTree([("h", leaf) for leaf in leaves], leaves)


def observed_chain(k: int) -> LatentTree:
    ids = [str(i) for i in range(1, k + 1)]
    return LatentTree(list(zip(ids, ids[1:])), ids)


def caterpillar() -> LatentTree:
    edges = [("1", "5"), ("3", "5"), ("2", "6"), ("4", "6"), ("5", "6")]
    return LatentTree(edges, ["1", "2", "3", "4"])


def inner_node_tree() -> LatentTree:
    edges = [("1", "4"), ("2", "4"), ("4", "5"), ("3", "5")]
    return LatentTree(edges, ["1", "2", "3", "5"])


def _edges_from_sequence(seq, n):
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[leaf] -= 1
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    return edges


def random_latent_tree(rng: np.random.Generator, m_lo=3, m_hi=6, n_hi=10):
    """Random latent tree with between m_lo and m_hi observed nodes."""
    while True:
        n = int(rng.integers(3, n_hi + 1))
        seq = [int(v) for v in rng.integers(0, n, size=n - 2)]
        edges = _edges_from_sequence(seq, n)
        degree = [0] * n
        for a, b in edges:
            degree[a] += 1
            degree[b] += 1
        observed = [v for v in range(n) if degree[v] <= 2]
        for v in range(n):
            if degree[v] >= 3 and rng.random() < 0.5:
                observed.append(v)
        observed.sort()
        if not m_lo <= len(observed) <= m_hi:
            continue
        str_edges = [(str(a), str(b)) for a, b in edges]
        return LatentTree(str_edges, [str(v) for v in observed])

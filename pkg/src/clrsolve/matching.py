"""Minimum-weight perfect matching on general graphs.

The production routine delegates to networkx's blossom implementation
(exact, O(n^3)); the recursive enumerator serves as an independent oracle
for small inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import OddVertexCount, TooLarge

BRUTE_FORCE_CAP = 12


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    weight: float

    def cover(self) -> set[int]:
        return {v for pair in self.pairs for v in pair}


def _canonical(pairs, weight: float) -> Matching:
    norm = tuple(sorted((min(a, b), max(a, b)) for a, b in pairs))
    return Matching(pairs=norm, weight=float(weight))


def min_weight_perfect_matching(costs) -> Matching:
    """Exact minimum-weight perfect matching of a complete even vertex set.

    ``costs`` is a square symmetric matrix (metric not required). Raises
    :class:`OddVertexCount` on an odd number of vertices.
    """
    w = np.asarray(costs, dtype=float)
    n = w.shape[0]
    if n % 2 != 0:
        raise OddVertexCount(f"{n} vertices")
    if n == 0:
        return Matching(pairs=(), weight=0.0)
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            graph.add_edge(i, j, weight=float(w[i, j]))
    pairs = nx.min_weight_matching(graph)
    if len(pairs) * 2 != n:
        raise OddVertexCount("matching is not perfect")  # complete graph: unreachable
    weight = sum(w[a, b] for a, b in pairs)
    return _canonical(pairs, weight)


def brute_force_matching(costs) -> Matching:
    """Exhaustive minimum over all perfect matchings (n <= 12)."""
    w = np.asarray(costs, dtype=float)
    n = w.shape[0]
    if n % 2 != 0:
        raise OddVertexCount(f"{n} vertices")
    if n > BRUTE_FORCE_CAP:
        raise TooLarge(f"{n} vertices exceeds cap {BRUTE_FORCE_CAP}")
    if n == 0:
        return Matching(pairs=(), weight=0.0)

    best: list = [float("inf"), None]

    def recurse(remaining: list[int], acc: list[tuple[int, int]], weight: float):
        if not remaining:
            key = tuple(sorted(acc))
            if weight < best[0] - 1e-15 or (
                abs(weight - best[0]) <= 1e-15 and (best[1] is None or key < best[1])
            ):
                best[0] = weight
                best[1] = key
            return
        a = remaining[0]
        rest = remaining[1:]
        for idx, b in enumerate(rest):
            recurse(rest[:idx] + rest[idx + 1 :], acc + [(a, b)], weight + w[a, b])

    recurse(list(range(n)), [], 0.0)
    return Matching(pairs=best[1], weight=best[0])

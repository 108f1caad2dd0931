"""Turning spanning structures into capacity-feasible tours.

``close_tour`` walks a connected subgraph into a closed tour at an anchor
depot, either by doubling all edges or by adding a minimum matching on the
odd-degree vertices; both ways the tour costs at most twice the subgraph.

``tree_split`` repeatedly carves sub-trees with demand in ``(k/2, k]`` out
of each forest tree; ``path_split`` repeatedly cuts a suffix of each rooted
path delivering exactly ``k``. Both attach carved pieces to the cheapest
opened depot and both enforce their per-run cost guarantees:

    tree:  w(tours) <= 2*w(forest)  + sum_v (4/k) d(v) min_{u in O} w(v,u)
    path:  w(tours) <= 2*w(packing) + sum_v (2/k) d(v) min_{u in O} w(v,u)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import (
    Disconnected,
    InfeasibleUnsplittable,
    InvariantViolation,
    UnsplittableUnsupported,
    ValidationError,
)
from .instance import ClrInstance, CostMatrix, build_cost_matrix
from .matching import min_weight_perfect_matching
from .structures import ConstrainedForest, PathPacking, euler_circuit

SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Tour:
    """A closed walk at one depot with the amount delivered per customer."""

    depot: int
    visit_order: tuple[int, ...]
    assignments: dict[int, float]
    cost: float

    @property
    def load(self) -> float:
        return sum(self.assignments.values())


def _connected(edges: Sequence[tuple[int, int]], vertices: set[int]) -> bool:
    if not vertices:
        return True
    comp = {min(vertices)}
    pending = list(edges)
    grown = True
    while grown:
        grown = False
        rest = []
        for a, b in pending:
            if a in comp or b in comp:
                comp.add(a)
                comp.add(b)
                grown = True
            else:
                rest.append((a, b))
        pending = rest
    return vertices <= comp


def close_tour(
    matrix: CostMatrix,
    edges: Sequence[tuple[int, int]],
    anchor: int,
    serve: dict[int, float],
    mode: str = "match",
) -> Tour:
    """Close a connected subgraph into a tour at ``anchor``.

    ``serve`` maps customers to the amount this tour delivers; zero-amount
    customers are shortcut out of the walk. In ``match`` mode the cheaper of
    the matching-based and the doubling-based walk is kept, so matching can
    never lose to doubling.
    """
    if mode not in ("double", "match"):
        raise ValidationError(f"unknown tour-closing mode {mode!r}")
    positive = {v: x for v, x in serve.items() if x > 0}
    if not positive:
        raise ValidationError("a tour must deliver something")
    vertices = {anchor, *positive}
    if not _connected(edges, vertices):
        raise Disconnected(f"anchor {anchor} cannot reach all served customers")

    subgraph_weight = sum(matrix.cost(a, b) for a, b in edges)

    def walk_cost(order: Sequence[int]) -> float:
        cost = matrix.cost(anchor, order[0]) + matrix.cost(order[-1], anchor)
        cost += sum(matrix.cost(order[i], order[i + 1]) for i in range(len(order) - 1))
        return cost

    def shortcut(circuit: Sequence[int]) -> tuple[int, ...]:
        seen: set[int] = set()
        out = []
        for v in circuit:
            if v in positive and v not in seen:
                seen.add(v)
                out.append(v)
        return tuple(out)

    def doubled_order() -> tuple[int, ...]:
        adjacency: dict[int, list[int]] = {anchor: []}
        for a, b in edges:
            adjacency.setdefault(a, []).extend([b, b])
            adjacency.setdefault(b, []).extend([a, a])
        return shortcut(euler_circuit(adjacency, anchor))

    def matched_order() -> tuple[int, ...]:
        degree: dict[int, int] = {anchor: 0}
        for a, b in edges:
            degree[a] = degree.get(a, 0) + 1
            degree[b] = degree.get(b, 0) + 1
        odd = sorted(v for v, deg in degree.items() if deg % 2 == 1)
        extra: list[tuple[int, int]] = []
        if odd:
            sub = [[matrix.cost(a, b) for b in odd] for a in odd]
            matching = min_weight_perfect_matching(sub)
            if matching.weight > subgraph_weight + SLACK:
                raise InvariantViolation(
                    "odd-vertex matching outweighs the subgraph it closes"
                )
            extra = [(odd[a], odd[b]) for a, b in matching.pairs]
        adjacency: dict[int, list[int]] = {anchor: []}
        for a, b in list(edges) + extra:
            adjacency.setdefault(a, []).append(b)
            adjacency.setdefault(b, []).append(a)
        return shortcut(euler_circuit(adjacency, anchor))

    order = doubled_order()
    cost = walk_cost(order)
    if mode == "match":
        alt = matched_order()
        alt_cost = walk_cost(alt)
        if alt_cost <= cost:
            order, cost = alt, alt_cost

    if cost > 2.0 * subgraph_weight + SLACK:
        raise InvariantViolation(
            f"tour cost {cost} exceeds twice the subgraph weight {subgraph_weight}"
        )
    return Tour(depot=anchor, visit_order=order, assignments=dict(positive), cost=cost)


def _nearest_opened(matrix: CostMatrix, opened: Sequence[int], v: int) -> int:
    return min(opened, key=lambda u: (matrix.cost(u, v), u))


def _connection_bound(
    inst: ClrInstance, matrix: CostMatrix, opened: Sequence[int], factor: float
) -> float:
    k = inst.capacity
    total = 0.0
    for c in inst.customers:
        u = _nearest_opened(matrix, opened, c.id)
        total += (factor / k) * c.demand * matrix.cost(u, c.id)
    return total


def _check_split_result(inst, matrix, opened, tours, resid, factor, bound_weight):
    k = inst.capacity
    leftover = [v for v, d in resid.items() if abs(d) > SLACK]
    if leftover:
        raise InvariantViolation(f"unserved residual demand at {leftover}")
    for t in tours:
        if t.load > k + SLACK:
            raise InvariantViolation(f"tour load {t.load} exceeds capacity {k}")
        if t.depot not in opened:
            raise InvariantViolation(f"tour anchored at unopened depot {t.depot}")
    total = sum(t.cost for t in tours)
    bound = 2.0 * bound_weight + _connection_bound(inst, matrix, opened, factor)
    if total > bound + SLACK:
        raise InvariantViolation(f"splitting bound violated: tours {total} > {bound}")


def tree_split(
    inst: ClrInstance,
    opened: Iterable[int],
    forest: ConstrainedForest,
    splittable: bool,
    mode: str = "match",
    matrix: Optional[CostMatrix] = None,
) -> list[Tour]:
    """Split a constrained spanning forest into feasible tours.

    Oversized demands (splittable only) are served first by ceil(d/k) direct
    round trips and zeroed out. Each forest tree is then reduced: while its
    demand exceeds ``k``, the deepest overloaded vertex is located, the
    pieces hanging off it are greedily binned into groups with demand in
    ``(k/2, k]``, and every such group becomes one tour hooked to the
    cheapest opened depot. What remains fits one tour at the tree's depot.
    """
    matrix = matrix if matrix is not None else build_cost_matrix(inst)
    opened = sorted(set(opened))
    k = inst.capacity
    if not {t.root for t in forest.trees} <= set(opened):
        raise ValidationError("every forest depot must be opened")

    resid = dict(inst.demands())
    if not splittable:
        oversized = sorted(v for v, d in resid.items() if d > k)
        if oversized:
            raise InfeasibleUnsplittable(
                f"demand exceeds capacity for customers {oversized}"
            )

    tours: list[Tour] = []
    used_edges: set[frozenset[int]] = set()

    def charge(edge_list: Sequence[tuple[int, int]]) -> None:
        for a, b in edge_list:
            key = frozenset((a, b))
            if key in used_edges:
                raise InvariantViolation(f"structure edge {sorted(key)} reused")
            used_edges.add(key)

    for v in sorted(v for v, d in resid.items() if d > k):
        u = _nearest_opened(matrix, opened, v)
        trips = math.ceil(resid[v] / k)
        loads = [k] * (trips - 1) + [resid[v] - k * (trips - 1)]
        for load in loads:
            tours.append(close_tour(matrix, [(u, v)], u, {v: load}, mode))
        resid[v] = 0.0

    for tree in forest.trees:
        children = {v: list(cs) for v, cs in tree.children.items()}

        def descendants(x: int) -> list[int]:
            out = [x]
            stack = list(children.get(x, ()))
            while stack:
                y = stack.pop()
                out.append(y)
                stack.extend(children.get(y, ()))
            return out

        def subtree_loads() -> dict[int, float]:
            loads: dict[int, float] = {}
            order: list[int] = []
            stack = [tree.root]
            while stack:
                x = stack.pop()
                order.append(x)
                stack.extend(children.get(x, ()))
            for x in reversed(order):
                total = resid.get(x, 0.0)
                for child in children.get(x, ()):
                    total += loads[child]
                loads[x] = total
            return loads

        while True:
            loads = subtree_loads()
            if loads[tree.root] <= k:
                break
            # Deepest vertex carrying more than k while each child fits;
            # depth ties fall to the lowest id. This can be the root itself.
            best_v, best_depth = None, -1
            stack = [(tree.root, 0)]
            while stack:
                x, depth = stack.pop()
                kids = children.get(x, ())
                if loads[x] > k and all(loads[c] <= k for c in kids):
                    if depth > best_depth or (depth == best_depth and x < best_v):
                        best_v, best_depth = x, depth
                for child in kids:
                    stack.append((child, depth + 1))
            v = best_v
            assert v is not None

            items = [(resid.get(v, 0.0), v, None)]
            items += [(loads[c], c, c) for c in children.get(v, ())]
            items.sort(key=lambda it: (-it[0], it[1]))

            bins: list[list] = [[]]
            for item in items:
                held = sum(i[0] for i in bins[-1])
                if bins[-1] and held + item[0] > k:
                    bins.append([item])
                else:
                    bins[-1].append(item)
            if sum(i[0] for i in bins[-1]) <= k / 2:
                bins.pop()  # light leftover stays on the tree
            assert bins and all(sum(i[0] for i in b) > k / 2 for b in bins)

            for group in bins:
                s_vertices = {v}
                s_edges: list[tuple[int, int]] = []
                serve: dict[int, float] = {}
                for _, key, child in group:
                    if child is None:
                        if v in resid and resid[v] > 0:
                            serve[v] = resid[v]
                    else:
                        s_edges.append((v, child))
                        for y in descendants(child):
                            s_vertices.add(y)
                            if resid[y] > 0:
                                serve[y] = resid[y]
                if tree.root in s_vertices:
                    anchor = tree.root
                    edges = list(s_edges)
                else:
                    u, x = min(
                        ((u, x) for u in opened for x in sorted(s_vertices)),
                        key=lambda p: (matrix.cost(p[0], p[1]), p[0], p[1]),
                    )
                    anchor = u
                    edges = list(s_edges) + [(u, x)]
                charge(s_edges)
                tours.append(close_tour(matrix, edges, anchor, serve, mode))
                for y in serve:
                    resid[y] = 0.0
                for _, key, child in group:
                    if child is not None:
                        children[v].remove(child)

        serve = {
            y: resid[y]
            for y in descendants(tree.root)
            if y != tree.root and resid[y] > 0
        }
        if serve:
            edges = [
                (x, child)
                for x in descendants(tree.root)
                for child in children.get(x, ())
            ]
            charge(edges)
            tours.append(close_tour(matrix, edges, tree.root, serve, mode))
            for y in serve:
                resid[y] = 0.0

    _check_split_result(
        inst, matrix, opened, tours, resid, factor=4.0, bound_weight=forest.weight
    )
    if not splittable:
        seen: dict[int, int] = {}
        for t in tours:
            for v in t.assignments:
                seen[v] = seen.get(v, 0) + 1
        multi = sorted(v for v, count in seen.items() if count > 1)
        if multi:
            raise InvariantViolation(f"unsplittable customers served twice: {multi}")
    return tours


def path_split(
    inst: ClrInstance,
    opened: Iterable[int],
    packing: PathPacking,
    mode: str = "match",
    splittable: bool = True,
    matrix: Optional[CostMatrix] = None,
) -> list[Tour]:
    """Split a rooted path-packing into tours; inner tours deliver exactly k.

    Oversized demands are first reduced into ``(0, k]`` by ceil(d/k)-1 full
    round trips. Each path is then consumed from its far end: the suffix
    holding just over ``k`` of demand becomes a tour whose boundary customer
    delivers only what tops the tour up to ``k`` and keeps the rest, until
    the remainder fits a single closing tour at the root depot.
    """
    if not splittable:
        raise UnsplittableUnsupported("path splitting serves splittable demand only")
    matrix = matrix if matrix is not None else build_cost_matrix(inst)
    opened = sorted(set(opened))
    k = inst.capacity
    if not {p.depot for p in packing.paths} <= set(opened):
        raise ValidationError("every packing depot must be opened")

    resid = dict(inst.demands())
    tours: list[Tour] = []
    used_edges: set[frozenset[int]] = set()

    def charge(edge_list: Sequence[tuple[int, int]]) -> None:
        for a, b in edge_list:
            key = frozenset((a, b))
            if key in used_edges:
                raise InvariantViolation(f"structure edge {sorted(key)} reused")
            used_edges.add(key)

    for v in sorted(v for v, d in resid.items() if d > k):
        u = _nearest_opened(matrix, opened, v)
        trips = math.ceil(resid[v] / k) - 1
        for _ in range(trips):
            tours.append(close_tour(matrix, [(u, v)], u, {v: k}, mode))
        resid[v] -= k * trips

    for path in packing.paths:
        cs = list(path.customers)
        while True:
            suffix = [0.0] * (len(cs) + 1)
            for i in range(len(cs) - 1, -1, -1):
                suffix[i] = suffix[i + 1] + resid[cs[i]]
            if suffix[0] <= k:
                break
            cut = max(i for i in range(len(cs)) if suffix[i] > k)
            v = cs[cut]
            tail = cs[cut:]
            take = k - suffix[cut + 1]
            serve = {c: resid[c] for c in cs[cut + 1 :]}
            if take > 0:
                serve[v] = take
            edges = [(tail[i], tail[i + 1]) for i in range(len(tail) - 1)]
            u, x = min(
                ((u, x) for u in opened for x in tail),
                key=lambda p: (matrix.cost(p[0], p[1]), p[0], p[1]),
            )
            charge(edges)
            tour = close_tour(matrix, edges + [(u, x)], u, serve, mode)
            if abs(tour.load - k) > SLACK:
                raise InvariantViolation(
                    f"inner path tour delivers {tour.load}, expected exactly {k}"
                )
            tours.append(tour)
            for c in cs[cut + 1 :]:
                resid[c] = 0.0
            resid[v] -= take
            cs = cs[: cut + 1]

        serve = {c: resid[c] for c in cs if resid[c] > 0}
        if serve:
            edges = [(path.depot, cs[0])] + [
                (cs[i], cs[i + 1]) for i in range(len(cs) - 1)
            ]
            charge(edges)
            tours.append(close_tour(matrix, edges, path.depot, serve, mode))
            for c in serve:
                resid[c] = 0.0

    _check_split_result(
        inst, matrix, opened, tours, resid, factor=2.0, bound_weight=packing.weight
    )
    return tours

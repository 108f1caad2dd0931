"""Depot-rooted spanning structures for the two solvers.

Two constructions are provided on top of the routing metric ``w``:

* a minimum constrained spanning forest (one depot per tree) found as an
  MST of the graph where depot-customer edges are surcharged by half the
  depot's opening cost and all depots hang off a free auxiliary root;
* a constrained spanning path-packing (one depot per path, at a terminal)
  obtained by contracting all depots into a super-depot, running the
  MST-plus-matching TSP heuristic there, expanding the resulting cycle back
  into depot edges, and trimming the cycle/path components.

Surcharged costs are written ``w'`` throughout; ``w`` is always the routing
metric of the instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvariantViolation, ValidationError
from .instance import ClrInstance, CostMatrix, build_cost_matrix
from .matching import min_weight_perfect_matching

SLACK = 1e-9


def prim_parent(weights: np.ndarray) -> list[int]:
    """Dense Prim from index 0; ties broken by (cost, min index, max index)."""
    n = weights.shape[0]
    in_tree = [False] * n
    parent = [-1] * n
    best = [math.inf] * n
    best[0] = 0.0
    for _ in range(n):
        pick = -1
        pick_key = None
        for v in range(n):
            if in_tree[v] or best[v] == math.inf:
                continue
            if parent[v] < 0:
                key = (best[v], -1, -1)
            else:
                a, b = sorted((v, parent[v]))
                key = (best[v], a, b)
            if pick_key is None or key < pick_key:
                pick, pick_key = v, key
        if pick < 0:
            raise ValidationError("graph is not connected")
        in_tree[pick] = True
        for u in range(n):
            if in_tree[u]:
                continue
            w = float(weights[pick, u])
            if math.isinf(w):
                continue
            if w < best[u]:
                best[u] = w
                parent[u] = pick
            elif w == best[u] and parent[u] >= 0:
                if tuple(sorted((u, pick))) < tuple(sorted((u, parent[u]))):
                    parent[u] = pick
    return parent


def _effective_phi(inst: ClrInstance, opening_overrides) -> dict[int, float]:
    overrides = set(opening_overrides or ())
    return {
        d.id: (0.0 if d.id in overrides else d.opening_cost) for d in inst.depots
    }


# ---------------------------------------------------------------------------
# Constrained spanning forest
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RootedTree:
    """One forest tree: a depot root and its customer subtree."""

    root: int
    children: dict[int, tuple[int, ...]]
    edges: tuple[tuple[int, int], ...]  # (parent, child)

    @property
    def customers(self) -> tuple[int, ...]:
        out = []
        stack = list(self.children.get(self.root, ()))
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(self.children.get(v, ()))
        return tuple(sorted(out))


@dataclass(frozen=True, eq=False)
class ConstrainedForest:
    trees: tuple[RootedTree, ...]
    weight: float  # total edge cost in w
    weight_shifted: float  # total edge cost in w'

    @property
    def depots(self) -> tuple[int, ...]:
        return tuple(sorted(t.root for t in self.trees))


def _validate_forest(inst: ClrInstance, forest: ConstrainedForest) -> None:
    seen: set[int] = set()
    for tree in forest.trees:
        custs = set(tree.customers)
        assert tree.root in inst.depot_ids
        assert not custs & seen, "forest trees are not vertex-disjoint"
        assert len(tree.edges) == len(custs), "tree is not acyclic"
        seen |= custs
    assert seen == set(inst.customer_ids), "forest does not cover all customers"


def min_constrained_spanning_forest(
    inst: ClrInstance,
    opening_overrides: Optional[Iterable[int]] = None,
    cost_matrix: Optional[CostMatrix] = None,
) -> ConstrainedForest:
    """Minimum spanning forest with exactly one depot per tree.

    Depot-customer edges carry ``w + phi(u)/2``; listed depots in
    ``opening_overrides`` count as free to open. The optimum is an MST over
    the graph plus an auxiliary root joined to every depot at zero cost.
    """
    w = cost_matrix if cost_matrix is not None else build_cost_matrix(inst)
    phi = _effective_phi(inst, opening_overrides)
    m, n = inst.n_depots, inst.n_customers
    ids = inst.vertex_ids
    total = 1 + m + n

    weights = np.full((total, total), math.inf)
    np.fill_diagonal(weights, 0.0)
    weights[1 : 1 + m + n, 1 : 1 + m + n] = w.entries
    for i, d in enumerate(inst.depots):
        weights[0, 1 + i] = 0.0
        weights[1 + i, 0] = 0.0
        weights[1 + i, 1 + m :] += phi[d.id] / 2.0
        weights[1 + m :, 1 + i] += phi[d.id] / 2.0

    parent = prim_parent(weights)

    kids: dict[int, list[int]] = {v: [] for v in ids}
    for idx in range(1, total):
        p = parent[idx]
        if p == 0 or idx <= m:
            continue  # depot hanging off the root, or unreachable
        kids[ids[p - 1]].append(ids[idx - 1])

    trees = []
    w_total = 0.0
    wp_total = 0.0
    for depot in inst.depots:
        if not kids[depot.id]:
            continue  # depot attracted no customers
        edges: list[tuple[int, int]] = []
        children: dict[int, tuple[int, ...]] = {}
        stack = [depot.id]
        while stack:
            v = stack.pop()
            cs = tuple(sorted(kids[v]))
            if cs:
                children[v] = cs
            for child in cs:
                edges.append((v, child))
                stack.append(child)
        for a, b in edges:
            w_total += w.cost(a, b)
            wp_total += w.cost(a, b)
            if a == depot.id:
                wp_total += phi[depot.id] / 2.0
        trees.append(
            RootedTree(root=depot.id, children=children, edges=tuple(edges))
        )

    forest = ConstrainedForest(
        trees=tuple(trees), weight=w_total, weight_shifted=wp_total
    )
    if __debug__:
        _validate_forest(inst, forest)
    return forest


# ---------------------------------------------------------------------------
# Contracted graph and the TSP heuristic on it
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ContractedGraph:
    """All customers plus a super-depot (index 0) with metric closure costs.

    ``costs[0, i]`` is the cheapest surcharged depot edge to customer ``i``
    and ``depot_for[i-1]`` names the depot realizing it. A customer-customer
    entry is either the direct edge or the two-depot shortcut through the
    super-depot, whichever is cheaper; ``through`` records which.
    """

    customer_ids: tuple[int, ...]
    costs: np.ndarray
    depot_for: tuple[int, ...]
    through: np.ndarray
    theta: float
    phi_eff: dict[int, float]
    base: CostMatrix

    @property
    def size(self) -> int:
        return len(self.customer_ids) + 1


def build_contracted_graph(
    inst: ClrInstance,
    theta: float = 0.25,
    opening_overrides: Optional[Iterable[int]] = None,
    cost_matrix: Optional[CostMatrix] = None,
) -> ContractedGraph:
    if theta < 0:
        raise ValidationError("theta must be nonnegative")
    w = cost_matrix if cost_matrix is not None else build_cost_matrix(inst)
    phi = _effective_phi(inst, opening_overrides)
    custs = list(inst.customer_ids)
    n = len(custs)

    depot_for: list[int] = []
    r_cost = np.zeros(n)
    for i, v in enumerate(custs):
        best = min(inst.depot_ids, key=lambda u: (w.cost(u, v) + theta * phi[u], u))
        depot_for.append(best)
        r_cost[i] = w.cost(best, v) + theta * phi[best]

    costs = np.zeros((n + 1, n + 1))
    through = np.zeros((n + 1, n + 1), dtype=bool)
    costs[0, 1:] = r_cost
    costs[1:, 0] = r_cost
    for i in range(n):
        for j in range(i + 1, n):
            direct = w.cost(custs[i], custs[j])
            via = r_cost[i] + r_cost[j]
            if via < direct:
                costs[i + 1, j + 1] = costs[j + 1, i + 1] = via
                through[i + 1, j + 1] = through[j + 1, i + 1] = True
            else:
                costs[i + 1, j + 1] = costs[j + 1, i + 1] = direct

    return ContractedGraph(
        customer_ids=tuple(custs),
        costs=costs,
        depot_for=tuple(depot_for),
        through=through,
        theta=theta,
        phi_eff=phi,
        base=w,
    )


@dataclass(frozen=True)
class HamiltonianCycle:
    vertices: tuple[int, ...]  # contracted-graph indices, starting at 0
    cost: float


def euler_circuit(adjacency: dict[int, list[int]], start: int) -> list[int]:
    """Hierholzer circuit taking the smallest available neighbor first."""
    adj = {v: sorted(ns, reverse=True) for v, ns in adjacency.items()}
    stack = [start]
    circuit: list[int] = []
    while stack:
        v = stack[-1]
        if adj.get(v):
            u = adj[v].pop()
            adj[u].remove(v)
            stack.append(u)
        else:
            circuit.append(stack.pop())
    circuit.reverse()
    return circuit


def christofides_cycle(g: ContractedGraph) -> HamiltonianCycle:
    """MST plus odd-vertex matching, walked from the super-depot."""
    size = g.size
    if size < 2:
        raise ValidationError("contracted graph needs at least one customer")
    parent = prim_parent(g.costs)
    edges = [(parent[v], v) for v in range(1, size)]
    mst_cost = sum(g.costs[a, b] for a, b in edges)

    degree = [0] * size
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    odd = [v for v in range(size) if degree[v] % 2 == 1]
    match_cost = 0.0
    if odd:
        matching = min_weight_perfect_matching(g.costs[np.ix_(odd, odd)])
        match_cost = matching.weight
        edges += [(odd[a], odd[b]) for a, b in matching.pairs]

    adjacency: dict[int, list[int]] = {v: [] for v in range(size)}
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    circuit = euler_circuit(adjacency, 0)

    seen: set[int] = set()
    order = [v for v in circuit if not (v in seen or seen.add(v))]
    cost = sum(
        g.costs[order[i], order[(i + 1) % len(order)]] for i in range(len(order))
    )
    if cost > mst_cost + match_cost + SLACK:
        raise InvariantViolation(
            f"tour cost {cost} exceeds tree+matching bound {mst_cost + match_cost}"
        )
    return HamiltonianCycle(vertices=tuple(order), cost=cost)


# ---------------------------------------------------------------------------
# Cycle packing and path packing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PackedComponent:
    """Cycle (one depot) or open path (depots at both terminals)."""

    kind: str  # "cycle" | "path"
    start: int  # depot id
    customers: tuple[int, ...]
    end: int  # depot id (== start for cycles)

    def depot_ids(self) -> tuple[int, ...]:
        return (self.start,) if self.kind == "cycle" else (self.start, self.end)


@dataclass(frozen=True, eq=False)
class CyclePacking:
    components: tuple[PackedComponent, ...]
    weight: float  # in w
    weight_shifted: float  # in w'
    theta: float
    phi_eff: dict[int, float]
    base: CostMatrix

    @property
    def cycles(self) -> tuple[PackedComponent, ...]:
        return tuple(c for c in self.components if c.kind == "cycle")

    @property
    def paths(self) -> tuple[PackedComponent, ...]:
        return tuple(c for c in self.components if c.kind == "path")


@dataclass(frozen=True, eq=False)
class PackedPath:
    """A path rooted at its depot; customers run outward from it."""

    depot: int
    customers: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class PathPacking:
    paths: tuple[PackedPath, ...]
    weight: float
    weight_shifted: float

    @property
    def depots(self) -> tuple[int, ...]:
        return tuple(sorted(p.depot for p in self.paths))


def _component_costs(
    comp: PackedComponent, w: CostMatrix, theta: float, phi: dict[int, float]
) -> tuple[float, float]:
    # Cycles and two-depot paths both have exactly two depot-incident edges.
    cs = comp.customers
    base = sum(w.cost(cs[i], cs[i + 1]) for i in range(len(cs) - 1))
    base += w.cost(comp.start, cs[0]) + w.cost(comp.end, cs[-1])
    shifted = base + theta * (phi[comp.start] + phi[comp.end])
    return base, shifted


def derive_cycle_packing(
    cycle: HamiltonianCycle, g: ContractedGraph, inst: ClrInstance
) -> CyclePacking:
    """Expand the contracted tour into depot edges and split it into
    depot-disjoint cycles and paths.

    The tour is cut wherever its realization passes between two different
    depots; the resulting strands are then merged whenever a depot ends up
    in more than one of them, skipping the repeated depot visit. Merging
    never increases the surcharged cost (triangle inequality).
    """
    order = cycle.vertices
    assert order and order[0] == 0
    custs = g.customer_ids

    def cust(idx: int) -> int:
        return custs[idx - 1]

    def anchor(idx: int) -> int:
        return g.depot_for[idx - 1]

    # Strands: maximal runs of customers with the realizing depot at each end.
    strands: list[tuple[int, list[int], int]] = []
    start_depot = anchor(order[1])
    run = [cust(order[1])]
    for a, b in zip(order[1:], order[2:]):
        if g.through[a, b]:
            strands.append((start_depot, run, anchor(a)))
            start_depot = anchor(b)
            run = [cust(b)]
        else:
            run.append(cust(b))
    strands.append((start_depot, run, anchor(order[-1])))

    # Merge strands until every depot appears in at most one of them.
    comps: list[tuple[int, list[int], int]] = strands
    while True:
        usage: dict[int, list[int]] = {}
        for ci, (s, _, e) in enumerate(comps):
            usage.setdefault(s, []).append(ci)
            if e != s:
                usage.setdefault(e, []).append(ci)
        shared = sorted(u for u, cis in usage.items() if len(cis) >= 2)
        if not shared:
            break
        u = shared[0]
        ai, bi = usage[u][0], usage[u][1]
        a_start, a_run, a_end = comps[ai]
        b_start, b_run, b_end = comps[bi]
        if a_end != u:  # orient A to finish at u
            a_start, a_end = a_end, a_start
            a_run = a_run[::-1]
        if b_start != u:  # orient B to leave from u
            b_start, b_end = b_end, b_start
            b_run = b_run[::-1]
        merged = (a_start, a_run + b_run, b_end)
        comps[ai] = merged
        del comps[bi]

    components = tuple(
        PackedComponent(
            kind="cycle" if s == e else "path",
            start=s,
            customers=tuple(run),
            end=e,
        )
        for s, run, e in comps
    )

    weight = 0.0
    shifted = 0.0
    for comp in components:
        b, sft = _component_costs(comp, g.base, g.theta, g.phi_eff)
        weight += b
        shifted += sft
    if shifted > cycle.cost + SLACK:
        raise InvariantViolation(
            f"packing cost {shifted} exceeds contracted tour cost {cycle.cost}"
        )

    packing = CyclePacking(
        components=components,
        weight=weight,
        weight_shifted=shifted,
        theta=g.theta,
        phi_eff=dict(g.phi_eff),
        base=g.base,
    )
    if __debug__:
        _validate_cycle_packing(inst, packing)
    return packing


def _validate_cycle_packing(inst: ClrInstance, packing: CyclePacking) -> None:
    seen_custs: set[int] = set()
    seen_depots: set[int] = set()
    for comp in packing.components:
        cs = set(comp.customers)
        assert cs and not cs & seen_custs, "components are not vertex-disjoint"
        seen_custs |= cs
        for u in set(comp.depot_ids()):
            assert u not in seen_depots, "depot appears in two components"
            seen_depots.add(u)
        if comp.kind == "cycle":
            assert comp.start == comp.end
        else:
            assert comp.start != comp.end
    assert seen_custs == set(inst.customer_ids), "packing does not cover customers"


def cycle_packing_to_paths(cp: CyclePacking) -> PathPacking:
    """Trim each component down to a single-depot rooted path.

    A cycle drops the cheaper of its two depot edges. A two-depot path keeps
    the depot whose (effective) opening cost is smaller and drops the edge
    at the other one; this is what makes the packing's combined cost bound
    go through. Ties fall to the lower vertex id.
    """
    w = cp.base
    paths: list[PackedPath] = []
    weight = 0.0
    shifted = 0.0
    for comp in cp.components:
        cs = list(comp.customers)
        if comp.kind == "cycle":
            u = comp.start
            # Two depot edges: (u, cs[0]) and (u, cs[-1]); drop the cheaper.
            c_first = w.cost(u, cs[0])
            c_last = w.cost(u, cs[-1])
            if (c_first, cs[0]) <= (c_last, cs[-1]):
                ordered = cs[::-1]  # dropped (u, cs[0]); enter via cs[-1]
            else:
                ordered = cs
            paths.append(PackedPath(depot=u, customers=tuple(ordered)))
        else:
            a, b = comp.start, comp.end
            if (cp.phi_eff[a], a) <= (cp.phi_eff[b], b):
                paths.append(PackedPath(depot=a, customers=tuple(cs)))
            else:
                paths.append(PackedPath(depot=b, customers=tuple(cs[::-1])))
    for p in paths:
        w_cost = w.cost(p.depot, p.customers[0])
        for i in range(len(p.customers) - 1):
            w_cost += w.cost(p.customers[i], p.customers[i + 1])
        weight += w_cost
        shifted += w_cost + cp.theta * cp.phi_eff[p.depot]
    return PathPacking(paths=tuple(paths), weight=weight, weight_shifted=shifted)

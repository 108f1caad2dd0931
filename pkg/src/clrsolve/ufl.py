"""Facility-location solvers: the 1.861-factor greedy and an exact oracle.

The greedy is the dual-fitting variant with switching: every unconnected
customer raises a budget at unit rate per unit of demand; a closed facility
opens once the offers against its opening cost are fully paid, where
connected customers offer the savings a switch would bring. Event times are
computed exactly from the piecewise-linear offer functions, and simultaneous
events resolve by (facility id, customer id).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooLarge
from .instance import UflInstance

BRUTE_FORCE_DEPOT_CAP = 15


@dataclass(frozen=True)
class UflSolution:
    open_ids: tuple[int, ...]
    assignment: dict[int, int]
    connection_cost: float
    opening_cost: float

    @property
    def total(self) -> float:
        return self.connection_cost + self.opening_cost


def _finalize(ufl: UflInstance, open_ids: list[int]) -> UflSolution:
    """Price a set of open depots with nearest-open assignment (ties: low id)."""
    open_ids = sorted(open_ids)
    assignment: dict[int, int] = {}
    connection = 0.0
    for v in ufl.customer_ids:
        best = min(open_ids, key=lambda u: (ufl.costs.cost(u, v), u))
        assignment[v] = best
        connection += ufl.demand(v) * ufl.costs.cost(best, v)
    opening = sum(ufl.opening_costs[u] for u in open_ids)
    return UflSolution(
        open_ids=tuple(open_ids),
        assignment=assignment,
        connection_cost=connection,
        opening_cost=opening,
    )


def solve_jms_greedy(ufl: UflInstance) -> UflSolution:
    """Greedy dual-fitting facility location with switching."""
    depots = list(ufl.depot_ids)
    custs = list(ufl.customer_ids)
    m, n = len(depots), len(custs)
    c = np.array(
        [[ufl.costs.cost(u, v) for v in custs] for u in depots], dtype=float
    )
    d = np.array([ufl.demand(v) for v in custs], dtype=float)
    phi = np.array([ufl.opening_costs[u] for u in depots], dtype=float)

    is_open = [False] * m
    serve_cost = [None] * n  # current connection cost; None while unconnected
    t = 0.0

    def opening_time(i: int) -> float:
        # Offers: switch savings from connected customers (constant in t)
        # plus d_j * (t - c_ij) from unconnected ones past their threshold.
        paid = 0.0
        for j in range(n):
            if serve_cost[j] is not None:
                paid += d[j] * max(0.0, serve_cost[j] - c[i, j])
        remaining = phi[i] - paid
        if remaining <= 0:
            return t
        pending = sorted(
            (c[i, j], d[j]) for j in range(n) if serve_cost[j] is None
        )
        level = 0.0  # offer accumulated at time `reach`
        slope = 0.0
        reach = 0.0
        for thresh, dem in pending:
            if slope > 0:
                gained = slope * (thresh - reach)
                if level + gained >= remaining:
                    return reach + (remaining - level) / slope
                level += gained
            reach = thresh
            slope += dem
        if slope <= 0:
            return float("inf")
        return reach + (remaining - level) / slope

    while any(cost is None for cost in serve_cost):
        # Candidate events: facility openings and connections to open depots.
        best_key = None
        best_event = None
        for i in range(m):
            if is_open[i]:
                continue
            ti = opening_time(i)
            key = (ti, i, -1)
            if best_key is None or key < best_key:
                best_key, best_event = key, ("open", i, None)
        for j in range(n):
            if serve_cost[j] is not None:
                continue
            open_costs = [(c[i, j], i) for i in range(m) if is_open[i]]
            if not open_costs:
                continue
            cost, i = min(open_costs)
            key = (max(cost, t), i, j)
            if best_key is None or key < best_key:
                best_key, best_event = key, ("connect", i, j)
        assert best_event is not None  # some facility always opens eventually
        t = best_key[0]
        kind, i, j = best_event
        if kind == "connect":
            serve_cost[j] = c[i, j]
        else:
            is_open[i] = True
            for j in range(n):
                if serve_cost[j] is None:
                    if c[i, j] <= t:
                        serve_cost[j] = c[i, j]
                elif c[i, j] < serve_cost[j]:
                    serve_cost[j] = c[i, j]  # switch to the new facility

    open_ids = [depots[i] for i in range(m) if is_open[i]]
    return _finalize(ufl, open_ids)


def brute_force_ufl(ufl: UflInstance) -> UflSolution:
    """Exact optimum by enumerating every nonempty open set (m <= 15)."""
    depots = list(ufl.depot_ids)
    m = len(depots)
    if m > BRUTE_FORCE_DEPOT_CAP:
        raise TooLarge(f"{m} depots exceeds cap {BRUTE_FORCE_DEPOT_CAP}")
    custs = list(ufl.customer_ids)
    c = np.array(
        [[ufl.costs.cost(u, v) for v in custs] for u in depots], dtype=float
    )
    d = np.array([ufl.demand(v) for v in custs], dtype=float)
    phi = np.array([ufl.opening_costs[u] for u in depots], dtype=float)

    best_cost = float("inf")
    best_mask = None
    for mask in range(1, 1 << m):
        rows = [i for i in range(m) if mask >> i & 1]
        cost = float(phi[rows].sum())
        if custs:
            cost += float((d * c[rows].min(axis=0)).sum())
        if cost < best_cost - 1e-15:
            best_cost = cost
            best_mask = mask
    rows = [depots[i] for i in range(m) if best_mask >> i & 1]
    return _finalize(ufl, rows)

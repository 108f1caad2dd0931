"""The two end-to-end solvers and a solution validator.

Both pipelines first open a set of depots through the greedy facility-
location reduction (opening costs scaled by ``alpha``), treat those depots
as free from then on, build their spanning structure, open its depots too,
and split the structure into feasible tours. Opening costs in the returned
solution are always the original ones, each opened depot charged once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import UnsplittableUnsupported
from .instance import ClrInstance, CostMatrix, build_cost_matrix, derive_ufl
from .splitting import Tour, path_split, tree_split
from .structures import (
    build_contracted_graph,
    christofides_cycle,
    cycle_packing_to_paths,
    derive_cycle_packing,
    min_constrained_spanning_forest,
)
from .ufl import solve_jms_greedy

DEFAULT_TREE_ALPHA = 0.4
DEFAULT_PATH_ALPHA = 0.7
DEFAULT_THETA = 0.25

COST_TOL = 1e-6
FEAS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ClrSolution:
    opened: tuple[int, ...]
    tours: tuple[Tour, ...]
    routing_cost: float
    opening_cost: float
    from_facility_phase: tuple[int, ...]  # depots opened by the UFL reduction
    from_structure: tuple[int, ...]  # depots anchoring the spanning structure
    params: dict

    @property
    def total(self) -> float:
        return self.routing_cost + self.opening_cost


def _package(
    inst: ClrInstance,
    tours,
    opened: set[int],
    o1: set[int],
    o2: set[int],
    params: dict,
) -> ClrSolution:
    phi = inst.opening_costs()
    return ClrSolution(
        opened=tuple(sorted(opened)),
        tours=tuple(tours),
        routing_cost=sum(t.cost for t in tours),
        opening_cost=sum(phi[u] for u in opened),
        from_facility_phase=tuple(sorted(o1)),
        from_structure=tuple(sorted(o2)),
        params=params,
    )


def tree_alg(
    inst: ClrInstance,
    alpha: float = DEFAULT_TREE_ALPHA,
    splittable: bool = True,
    mode: str = "match",
) -> ClrSolution:
    """Forest-based solver for splittable and unsplittable demand."""
    params = {
        "alg": "tree",
        "alpha": alpha,
        "theta": None,
        "mode": mode,
        "splittable": splittable,
    }
    if not inst.customers:
        return _package(inst, [], set(), set(), set(), params)
    matrix = build_cost_matrix(inst)
    ufl_solution = solve_jms_greedy(derive_ufl(inst, alpha, matrix))
    o1 = set(ufl_solution.open_ids)
    forest = min_constrained_spanning_forest(
        inst, opening_overrides=o1, cost_matrix=matrix
    )
    o2 = {t.root for t in forest.trees}
    opened = o1 | o2
    tours = tree_split(inst, opened, forest, splittable, mode, matrix)
    return _package(inst, tours, opened, o1, o2, params)


def path_alg(
    inst: ClrInstance,
    alpha: float = DEFAULT_PATH_ALPHA,
    theta: float = DEFAULT_THETA,
    splittable: bool = True,
    mode: str = "match",
) -> ClrSolution:
    """Path-packing solver; splittable demand only."""
    if not splittable:
        raise UnsplittableUnsupported("the path solver serves splittable demand only")
    params = {
        "alg": "path",
        "alpha": alpha,
        "theta": theta,
        "mode": mode,
        "splittable": True,
    }
    if not inst.customers:
        return _package(inst, [], set(), set(), set(), params)
    matrix = build_cost_matrix(inst)
    ufl_solution = solve_jms_greedy(derive_ufl(inst, alpha, matrix))
    o1 = set(ufl_solution.open_ids)
    contracted = build_contracted_graph(
        inst, theta=theta, opening_overrides=o1, cost_matrix=matrix
    )
    cycle = christofides_cycle(contracted)
    packing = cycle_packing_to_paths(derive_cycle_packing(cycle, contracted, inst))
    o2 = {p.depot for p in packing.paths}
    opened = o1 | o2
    tours = path_split(inst, opened, packing, mode, splittable=True, matrix=matrix)
    return _package(inst, tours, opened, o1, o2, params)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def validate_solution(
    inst: ClrInstance,
    sol: ClrSolution,
    splittable: bool,
    matrix: Optional[CostMatrix] = None,
) -> ValidationReport:
    """Check a solution independently of how it was produced.

    Violations are collected, not raised: anchors must be opened, loads must
    fit the capacity, every demand must be met exactly (by a single tour in
    unsplittable mode), and the stored costs must match a recomputation.
    """
    report = ValidationReport()
    matrix = matrix if matrix is not None else build_cost_matrix(inst)
    opened = set(sol.opened)
    demands = inst.demands()

    delivered: dict[int, float] = {v: 0.0 for v in demands}
    tours_per_customer: dict[int, int] = {v: 0 for v in demands}
    routing = 0.0
    for idx, tour in enumerate(sol.tours):
        if tour.depot not in opened:
            report.add(f"tour {idx}: anchor {tour.depot} not opened")
        if tour.load > inst.capacity + FEAS_TOL:
            report.add(f"tour {idx}: load {tour.load} exceeds capacity")
        for v, amount in tour.assignments.items():
            if v not in demands:
                report.add(f"tour {idx}: unknown customer {v}")
                continue
            if amount < -FEAS_TOL:
                report.add(f"tour {idx}: negative delivery to {v}")
            if amount > 0 and v not in tour.visit_order:
                report.add(f"tour {idx}: serves {v} without visiting it")
            delivered[v] += amount
            tours_per_customer[v] += 1
        if tour.visit_order:
            recomputed = matrix.cost(tour.depot, tour.visit_order[0])
            recomputed += matrix.cost(tour.visit_order[-1], tour.depot)
            recomputed += sum(
                matrix.cost(tour.visit_order[i], tour.visit_order[i + 1])
                for i in range(len(tour.visit_order) - 1)
            )
            if abs(recomputed - tour.cost) > COST_TOL:
                report.add(
                    f"tour {idx}: stored cost {tour.cost} != recomputed {recomputed}"
                )
            routing += recomputed

    for v, dem in demands.items():
        if abs(delivered[v] - dem) > FEAS_TOL:
            report.add(f"demand shortfall {v}: {dem - delivered[v]}")
        if not splittable and tours_per_customer[v] != 1:
            report.add(
                f"customer {v} served by {tours_per_customer[v]} tours in "
                "unsplittable mode"
            )

    phi = inst.opening_costs()
    opening = sum(phi[u] for u in opened)
    if abs(routing - sol.routing_cost) > COST_TOL:
        report.add(f"routing cost mismatch: {sol.routing_cost} != {routing}")
    if abs(opening - sol.opening_cost) > COST_TOL:
        report.add(f"opening cost mismatch: {sol.opening_cost} != {opening}")
    if abs(sol.total - (sol.routing_cost + sol.opening_cost)) > COST_TOL:
        report.add("total is not routing + opening")
    return report
